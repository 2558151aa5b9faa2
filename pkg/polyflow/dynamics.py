"""
Discrete-time nonlinear control systems x+ = f(x, u), their iterated maps
and Jacobian linearization.
"""

from __future__ import absolute_import
import numpy as np
from .common import InputError
from .constants import DEFAULT_FD_STEP
from .lincontrol import Polytope
from .utils import as_vector, as_matrix, frozen


class DiscreteSystem(object):
    """
    Deterministic discrete-time system with state dimension n and input
    dimension m.

    Subclasses implement `_evaluate(x, u)` on the last axis so that the same
    code serves one sample of shape (n,) and batches of shape (M, n).
    A plain callable can be given instead; it is then evaluated row by row
    for batches.
    """

    def __init__(self, n, m, step_function=None, name='system'):
        """
        Initialize.
        :param n: state dimension
        :param m: input dimension
        :param step_function: optional callable (x, u) -> x+
        :param name: identifier
        """
        if n < 1 or m < 1:
            raise InputError('dimensions must be positive, got n={}, m={}'
                             .format(n, m))
        self.n = int(n)
        self.m = int(m)
        self.name = name
        self._step_function = step_function

    def _evaluate(self, x, u):
        if self._step_function is None:
            raise NotImplementedError('no step function for {}'.format(
                self.name
            ))
        if x.ndim == 1:
            return np.asarray(self._step_function(x, u), dtype=float)
        return np.array([
            self._step_function(row_x, row_u) for row_x, row_u in zip(x, u)
        ], dtype=float).reshape(x.shape[0], self.n)

    def step(self, x, u):
        """
        Evaluates f(x, u) for one state.
        :param x: state, shape (n,)
        :param u: input, shape (m,)
        :return: next state, shape (n,)
        """
        x = as_vector(x, self.n, 'state')
        u = as_vector(u, self.m, 'input')
        result = np.asarray(self._evaluate(x, u), dtype=float)
        if result.shape != (self.n,):
            raise InputError('{} returned shape {}, expected ({},)'.format(
                self.name, result.shape, self.n
            ))
        return result

    def step_batch(self, states, inputs):
        """
        Evaluates f row-wise on a batch.
        :param states: array (M, n)
        :param inputs: array (M, m)
        :return: array (M, n)
        """
        states = np.asarray(states, dtype=float)
        inputs = np.asarray(inputs, dtype=float)
        if states.ndim != 2 or states.shape[1] != self.n:
            raise InputError('states must have shape (M, {}), got {}'.format(
                self.n, states.shape
            ))
        if inputs.shape != (states.shape[0], self.m):
            raise InputError('inputs must have shape ({}, {}), got {}'.format(
                states.shape[0], self.m, inputs.shape
            ))
        return np.asarray(self._evaluate(states, inputs), dtype=float)

    def parameters(self):
        """
        Model parameters, JSON serializable.
        :return: dict
        """
        return {}

    def to_dict(self):
        return {'name': self.name, 'parameters': self.parameters()}

    def __repr__(self):
        return '{}(n={}, m={})'.format(type(self).__name__, self.n, self.m)


class LinearSystem(DiscreteSystem):
    """
    x+ = A x + B u
    """

    def __init__(self, A, B, name='linear'):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        n = A.shape[0]
        super(LinearSystem, self).__init__(n, B.shape[1], name=name)
        self.A = frozen(as_matrix(A, n, n, 'A'))
        self.B = frozen(as_matrix(B, n, self.m, 'B'))

    def _evaluate(self, x, u):
        return x.dot(self.A.T) + u.dot(self.B.T)

    def parameters(self):
        return {'A': self.A.tolist(), 'B': self.B.tolist()}


class PestModel(DiscreteSystem):
    """
    Valuable/pest population dynamics in coordinates shifted to the
    equilibrium: x1 = v - 1, x2 = p - 0.2, u = a - 0.2.

        v+ = v + c v (1 - v / kappa) - r v p
        p+ = d p + v p - a p
    """

    V_EQ = 1.0
    P_EQ = 0.2
    A_EQ = 0.2

    def __init__(self, r=0.5, c=0.2, kappa=2.0, d=0.2, name='pest'):
        super(PestModel, self).__init__(2, 1, name=name)
        self.r = float(r)
        self.c = float(c)
        self.kappa = float(kappa)
        self.d = float(d)

    def _evaluate(self, x, u):
        v = x[..., 0] + self.V_EQ
        p = x[..., 1] + self.P_EQ
        a = u[..., 0] + self.A_EQ
        v_next = v + self.c * v * (1.0 - v / self.kappa) - self.r * v * p
        p_next = self.d * p + v * p - a * p
        return np.stack(
            [v_next - self.V_EQ, p_next - self.P_EQ], axis=-1
        )

    def parameters(self):
        return {'r': self.r, 'c': self.c, 'kappa': self.kappa, 'd': self.d}


class ImmersibleBlockSystem(DiscreteSystem):
    """
    Exactly immersible class

        x1+ = A1 x1 + phi(x2) + B1 u
        x2+ = A2 x2

    with phi a polynomial given as (exponent multi-index, coefficient vector)
    pairs: phi(x2) = sum_j coef_j * prod_i x2_i ** exp_j[i].
    """

    def __init__(self, A1, A2, B1, phi_terms, name='immersible'):
        A1 = np.atleast_2d(np.asarray(A1, dtype=float))
        A2 = np.atleast_2d(np.asarray(A2, dtype=float))
        B1 = np.atleast_2d(np.asarray(B1, dtype=float))
        n1 = A1.shape[0]
        n2 = A2.shape[0]
        super(ImmersibleBlockSystem, self).__init__(
            n1 + n2, B1.shape[1], name=name
        )
        self.n1 = n1
        self.n2 = n2
        self.A1 = frozen(as_matrix(A1, n1, n1, 'A1'))
        self.A2 = frozen(as_matrix(A2, n2, n2, 'A2'))
        self.B1 = frozen(as_matrix(B1, n1, self.m, 'B1'))
        if not phi_terms:
            raise InputError('phi needs at least one term')
        exponents = []
        coefficients = []
        for exponent, coefficient in phi_terms:
            exponent = [int(power) for power in exponent]
            if len(exponent) != n2 or min(exponent) < 0:
                raise InputError('bad phi exponent {}'.format(exponent))
            exponents.append(exponent)
            coefficients.append(as_vector(coefficient, n1, 'phi coefficient'))
        self.exponents = np.array(exponents, dtype=int)
        self.coefficients = frozen(np.array(coefficients))

    def phi(self, x2):
        """
        Evaluates the polynomial on the last axis.
        :param x2: array (..., n2)
        :return: array (..., n1)
        """
        x2 = np.asarray(x2, dtype=float)
        monomials = np.prod(
            x2[..., np.newaxis, :] ** self.exponents, axis=-1
        )
        return monomials.dot(self.coefficients)

    def _evaluate(self, x, u):
        x1 = x[..., :self.n1]
        x2 = x[..., self.n1:]
        x1_next = x1.dot(self.A1.T) + self.phi(x2) + u.dot(self.B1.T)
        x2_next = x2.dot(self.A2.T)
        return np.concatenate([x1_next, x2_next], axis=-1)

    def parameters(self):
        return {
            'A1': self.A1.tolist(),
            'A2': self.A2.tolist(),
            'B1': self.B1.tolist(),
            'phi': [
                [exponent.tolist(), coefficient.tolist()]
                for exponent, coefficient in zip(
                    self.exponents, self.coefficients
                )
            ],
        }


SYSTEMS = {
    'pest': lambda parameters: PestModel(**parameters),
    'linear': lambda parameters: LinearSystem(
        parameters['A'], parameters['B']
    ),
    'immersible': lambda parameters: ImmersibleBlockSystem(
        parameters['A1'],
        parameters['A2'],
        parameters['B1'],
        [(term[0], term[1]) for term in parameters['phi']],
    ),
}


def build_system(name, parameters=None):
    """
    Builds a registered benchmark system.
    :param name: one of SYSTEMS
    :param parameters: keyword parameters of the system
    :return: DiscreteSystem
    """
    if name not in SYSTEMS:
        raise InputError('unknown system {!r}, expected one of {}'.format(
            name, sorted(SYSTEMS)
        ))
    try:
        return SYSTEMS[name](dict(parameters or {}))
    except (KeyError, TypeError) as exception:
        raise InputError('bad parameters for {}: {}'.format(name, exception))


def iterate_map(sys, x, u, ell):
    """
    f^0(x, u) = x, f^1(x, u) = f(x, u), f^{l+1}(x, u) = f(f^l(x, u), 0).
    :param sys: DiscreteSystem
    :param x: state
    :param u: input
    :param ell: non-negative iterate index
    :return: state, shape (n,)
    """
    return iterate_sequence(sys, x, u, ell)[-1]


def iterate_sequence(sys, x, u, count):
    """
    All iterates f^0 ... f^count in one forward pass.
    :param sys: DiscreteSystem
    :param x: state
    :param u: input, applied at the first step only
    :param count: non-negative number of steps
    :return: array (count + 1, n)
    """
    if int(count) != count or count < 0:
        raise InputError('iterate index must be a non-negative integer')
    x = as_vector(x, sys.n, 'state')
    u = as_vector(u, sys.m, 'input')
    sequence = np.empty((int(count) + 1, sys.n))
    sequence[0] = x
    if count > 0:
        sequence[1] = sys.step(x, u)
        zero = np.zeros(sys.m)
        for ell in range(2, int(count) + 1):
            sequence[ell] = sys.step(sequence[ell - 1], zero)
    return sequence


def iterate_batch(sys, states, inputs, count):
    """
    Iterates for a batch of samples.
    :param sys: DiscreteSystem
    :param states: array (M, n)
    :param inputs: array (M, m) or None for zero input
    :param count: non-negative number of steps
    :return: array (M, count + 1, n)
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[1] != sys.n:
        raise InputError('states must have shape (M, {}), got {}'.format(
            sys.n, states.shape
        ))
    samples = states.shape[0]
    zero = np.zeros((samples, sys.m))
    if inputs is None:
        inputs = zero
    sequence = np.empty((samples, int(count) + 1, sys.n))
    sequence[:, 0] = states
    for ell in range(1, int(count) + 1):
        sequence[:, ell] = sys.step_batch(
            sequence[:, ell - 1], inputs if ell == 1 else zero
        )
    return sequence


def stacked_basis(sys, x, k):
    """
    [x; f^1(x, 0); ...; f^k(x, 0)].
    :param sys: DiscreteSystem
    :param x: state
    :param k: degree
    :return: array (n (k + 1),)
    """
    return iterate_sequence(sys, x, np.zeros(sys.m), k).ravel()


def jacobian_linearization(sys, x0, u0, h=DEFAULT_FD_STEP):
    """
    Central finite-difference Jacobians of f at (x0, u0).
    :param sys: DiscreteSystem
    :param x0: state
    :param u0: input
    :param h: step size
    :return: (A, B) with shapes (n, n) and (n, m)
    """
    if h <= 0:
        raise InputError('finite-difference step must be positive')
    x0 = as_vector(x0, sys.n, 'x0')
    u0 = as_vector(u0, sys.m, 'u0')
    A = np.empty((sys.n, sys.n))
    B = np.empty((sys.n, sys.m))
    for j in range(sys.n):
        delta = np.zeros(sys.n)
        delta[j] = h
        A[:, j] = (sys.step(x0 + delta, u0) - sys.step(x0 - delta, u0)) / (
            2.0 * h
        )
    for j in range(sys.m):
        delta = np.zeros(sys.m)
        delta[j] = h
        B[:, j] = (sys.step(x0, u0 + delta) - sys.step(x0, u0 - delta)) / (
            2.0 * h
        )
    return A, B


def input_jacobians(sys, count, h=DEFAULT_FD_STEP):
    """
    D_u f^l(0, 0) for l = 1 ... count by central differences, every
    iterate taken from the same forward pass.
    :param sys: DiscreteSystem
    :param count: number of iterates
    :param h: step size
    :return: array (count, n, m)
    """
    if h <= 0:
        raise InputError('finite-difference step must be positive')
    origin = np.zeros(sys.n)
    jacobians = np.empty((int(count), sys.n, sys.m))
    for j in range(sys.m):
        delta = np.zeros(sys.m)
        delta[j] = h
        forward = iterate_sequence(sys, origin, delta, count)
        backward = iterate_sequence(sys, origin, -delta, count)
        jacobians[:, :, j] = (forward[1:] - backward[1:]) / (2.0 * h)
    return jacobians


def simulate(sys, x0, inputs):
    """
    Open-loop trajectory.
    :param sys: DiscreteSystem
    :param x0: initial state
    :param inputs: array (T, m)
    :return: array (T + 1, n)
    """
    inputs = np.asarray(inputs, dtype=float).reshape(-1, sys.m)
    states = np.empty((inputs.shape[0] + 1, sys.n))
    states[0] = as_vector(x0, sys.n, 'x0')
    for t, u in enumerate(inputs):
        states[t + 1] = sys.step(states[t], u)
    return states


class ConstraintSpec(object):
    """
    State set X and input set U of a regulation problem.
    Both must be bounded and contain the origin in their interior.
    """

    def __init__(self, state_set, input_set):
        for name, constraint_set in (('state', state_set),
                                     ('input', input_set)):
            if not np.all(constraint_set.h > 0):
                raise InputError('{} set must contain the origin in its '
                                 'interior'.format(name))
            if not constraint_set.is_bounded():
                raise InputError('{} set must be bounded'.format(name))
        self.state_set = state_set
        self.input_set = input_set

    @classmethod
    def box(cls, state_lower, state_upper, input_lower, input_upper):
        return cls(Polytope.box(state_lower, state_upper),
                   Polytope.box(input_lower, input_upper))

    @property
    def n(self):
        return self.state_set.d

    @property
    def m(self):
        return self.input_set.d

    def to_dict(self):
        return {
            'state_set': self.state_set.to_dict(),
            'input_set': self.input_set.to_dict(),
        }

    @staticmethod
    def load_from_dict(constraints_data):
        return ConstraintSpec(
            Polytope.load_from_dict(constraints_data['state_set']),
            Polytope.load_from_dict(constraints_data['input_set']),
        )
