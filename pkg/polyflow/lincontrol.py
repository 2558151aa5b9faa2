"""
Linear-control backbone: H-polytopes, the discrete algebraic Riccati
equation, LQR gains and maximal constraint-admissible invariant sets.
"""

from __future__ import absolute_import
import warnings
from collections import namedtuple
import numpy as np
import scipy.linalg
import scipy.optimize
from .common import (
    InputError,
    NonConvergenceError,
    InvariantSetError,
    InfeasibleError,
    UnboundedError,
    PolyflowWarning,
)
from .constants import (
    DARE_TOL,
    DARE_STALL_TOL,
    DARE_STALL_WINDOW,
    DARE_MAX_ITER,
    OBSERVABILITY_TOL,
    INVARIANT_SET_SLACK,
    INVARIANT_SET_MAX_STEPS,
    POLYTOPE_CONTAINS_TOL,
    LP_REGULARIZATION,
    LP_DUALITY_GAP_TOL,
    STABILITY_MARGIN,
)
from .events.control import ControlEventFactory
from .instrumentation import instrument
from .qp import QpProblem, QpSettings, QpStatus, solve_qp
from .trace import trace_factory
from .utils import as_matrix, as_vector, frozen, print_debug

ZERO_ROW_NORM = 1e-12
BOUNDED_TOL = 1e-9
# LP oracles are polished every 10 iterations.
LP_SETTINGS = QpSettings(adapt_interval=10)

DareSolution = namedtuple('DareSolution', ['P', 'K', 'iterations', 'residual'])
InvariantSet = namedtuple('InvariantSet', ['polytope', 'determinedness'])


class Polytope(object):
    """
    {x : H x <= h} in dimension d.
    """

    def __init__(self, H, h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != h.shape[0]:
            raise InputError('H must have shape ({}, d), got {}'.format(
                h.shape[0], H.shape
            ))
        if np.any(np.isnan(H)) or np.any(np.isnan(h)):
            raise InputError('polytope data contains NaN values')
        self.H = frozen(H)
        self.h = frozen(h)

    @classmethod
    def box(cls, lower, upper):
        """
        Axis-aligned box, one unit row per face.
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InputError('box bounds must be vectors of equal length')
        if np.any(lower > upper):
            raise InputError('box lower bound exceeds upper bound')
        identity = np.eye(lower.shape[0])
        return cls(np.vstack([identity, -identity]),
                   np.concatenate([upper, -lower]))

    @property
    def d(self):
        return self.H.shape[1]

    @property
    def size(self):
        return self.H.shape[0]

    def contains(self, x, tol=POLYTOPE_CONTAINS_TOL):
        """
        Membership test with tolerance. Accepts one point or a (M, d) batch.
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise InputError('point dimension {} does not match {}'.format(
                x.shape[-1], self.d
            ))
        return np.all(x.dot(self.H.T) <= self.h + tol, axis=-1)

    def normalized(self):
        """
        Rows scaled to unit 2-norm. Zero rows with h >= 0 are dropped.
        """
        norms = np.linalg.norm(self.H, axis=1)
        zero = norms <= ZERO_ROW_NORM
        if np.any(zero & (self.h < 0)):
            raise InfeasibleError('polytope has a violated zero row')
        keep = ~zero
        return Polytope(
            self.H[keep] / norms[keep, np.newaxis],
            self.h[keep] / norms[keep],
        )

    def intersect(self, other):
        if other.d != self.d:
            raise InputError('cannot intersect dimensions {} and {}'.format(
                self.d, other.d
            ))
        return Polytope(np.vstack([self.H, other.H]),
                        np.concatenate([self.h, other.h]))

    def is_bounded(self):
        """
        Bounded iff the rows of H positively span R^d, checked by
        non-negative least squares against every signed unit vector.
        """
        if not self.size:
            return False
        for j in range(self.d):
            for sign in (1.0, -1.0):
                target = np.zeros(self.d)
                target[j] = sign
                _, residual = scipy.optimize.nnls(self.H.T, target)
                if residual > BOUNDED_TOL:
                    return False
        return True

    def interior_point(self):
        """
        Chebyshev center and radius.
        :return: (center, radius)
        """
        norms = np.linalg.norm(self.H, axis=1)
        radius_cap = np.zeros((1, self.d + 1))
        radius_cap[0, -1] = 1.0
        augmented = Polytope(
            np.vstack([
                np.hstack([self.H, norms[:, np.newaxis]]),
                radius_cap,
            ]),
            np.concatenate([self.h, [1.0]]),
        )
        objective = np.zeros(self.d + 1)
        objective[-1] = 1.0
        radius, argmax = lp_max(objective, augmented)
        return argmax[:-1], radius

    def bounding_box(self):
        """
        Tightest axis-aligned box.
        :return: (lower, upper)
        """
        lower = np.empty(self.d)
        upper = np.empty(self.d)
        for j in range(self.d):
            direction = np.zeros(self.d)
            direction[j] = 1.0
            upper[j] = lp_max(direction, self)[0]
            lower[j] = -lp_max(-direction, self)[0]
        return lower, upper

    def remove_redundant(self, tol=INVARIANT_SET_SLACK):
        """
        Drops every row whose maximum over the remaining rows stays within
        tol of its right-hand side. Rows are visited in order.
        """
        H = self.H
        h = self.h
        keep = np.ones(self.size, dtype=bool)
        for index in range(self.size):
            keep[index] = False
            others = Polytope(H[keep], h[keep])
            try:
                value, _ = lp_max(H[index], others)
                redundant = value <= h[index] + tol
            except (UnboundedError, NonConvergenceError):
                redundant = False
            keep[index] = not redundant
        return Polytope(H[keep], h[keep])

    def sample(self, count, seed=0, burn_in=200, thinning=5):
        """
        Hit-and-run samples, started at the Chebyshev center.
        :param count: number of points
        :param seed: generator seed
        :param burn_in: discarded initial steps
        :param thinning: steps between kept points
        :return: array (count, d)
        """
        rng = np.random.default_rng(seed)
        point, radius = self.interior_point()
        if radius <= 0:
            raise InputError('polytope has an empty interior')
        samples = np.empty((int(count), self.d))
        total = burn_in + int(count) * thinning
        kept = 0
        for step in range(total):
            direction = rng.standard_normal(self.d)
            direction /= np.linalg.norm(direction)
            rate = self.H.dot(direction)
            slack = self.h - self.H.dot(point)
            with np.errstate(divide='ignore'):
                limits = slack / rate
            upper = np.min(limits[rate > 0]) if np.any(rate > 0) else 1.0
            lower = np.max(limits[rate < 0]) if np.any(rate < 0) else -1.0
            point = point + rng.uniform(lower, upper) * direction
            if step >= burn_in and (step - burn_in) % thinning == 0:
                samples[kept] = point
                kept += 1
        return samples

    def to_dict(self):
        return {'H': self.H.tolist(), 'h': self.h.tolist()}

    @staticmethod
    def load_from_dict(polytope_data):
        return Polytope(polytope_data['H'], polytope_data['h'])

    def __repr__(self):
        return 'Polytope(rows={}, d={})'.format(self.size, self.d)


def lp_max(c, P):
    """
    Maximizes c'x over a polytope through the QP solver with a vanishing
    quadratic term eps ||x||^2. The returned value is c'x at the solution.
    :param c: direction, shape (d,)
    :param P: Polytope
    :return: (value, argmax)
    """
    c = as_vector(c, P.d, 'c')
    problem = QpProblem(
        2.0 * LP_REGULARIZATION * np.eye(P.d),
        -c,
        P.H,
        P.h,
    )
    solution = solve_qp(problem, settings=LP_SETTINGS)
    if solution.status == QpStatus.INFEASIBLE:
        raise InfeasibleError('polytope is empty')
    if solution.status == QpStatus.UNBOUNDED:
        raise UnboundedError('linear objective is unbounded over polytope')
    if solution.status != QpStatus.OPTIMAL:
        raise NonConvergenceError(
            'LP oracle did not converge',
            iterations=solution.iterations,
            residual=max(solution.primal_residual, solution.dual_residual),
        )

    argmax = solution.z
    value = float(c.dot(argmax))
    multipliers = solution.y[:P.size]
    dual_value = float(P.h.dot(multipliers))
    gap = abs(dual_value - value)
    scale = max(1.0, abs(value), float(np.abs(P.h).dot(np.abs(multipliers))))
    if gap > LP_DUALITY_GAP_TOL * scale:
        warnings.warn(
            'LP duality gap {:.3g} exceeds tolerance'.format(gap),
            PolyflowWarning,
        )
        trace_factory.add_label('lp_duality_gap', gap)
    return value, argmax


def dare_defect(A, B, Q, R, P, relative=False):
    """
    Infinity norm of A'PA - A'PB (R + B'PB)^-1 B'PA + Q - P, divided by
    max(1, |P|) when relative.
    """
    P = np.asarray(P, dtype=float)
    gain_term = scipy.linalg.solve(R + B.T.dot(P).dot(B), B.T.dot(P).dot(A))
    update = A.T.dot(P).dot(A) - A.T.dot(P).dot(B).dot(gain_term) + Q
    defect = float(np.max(np.abs(update - P)))
    if relative:
        defect /= max(1.0, float(np.max(np.abs(P))))
    return defect


@instrument(ControlEventFactory)
def solve_dare(A, B, Q, R, tol=DARE_TOL, max_iter=DARE_MAX_ITER):
    """
    Discrete algebraic Riccati equation by fixed-point iteration from
    P0 = Q, symmetrized every step. Stops when the max-norm step relative
    to max(1, |P|) is at most tol, or when the relative step has settled
    below DARE_STALL_TOL and stopped improving.
    :param A: (d, d)
    :param B: (d, m)
    :param Q: (d, d) positive semidefinite, Q = C'QC for a lifted model
    :param R: (m, m) positive definite
    :param tol: relative tolerance
    :param max_iter: iteration cap
    :return: DareSolution with K = -(R + B'PB)^-1 B'PA
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    dim = A.shape[0]
    A = as_matrix(A, dim, dim, 'A')
    B = np.asarray(B, dtype=float).reshape(dim, -1)
    inputs = B.shape[1]
    Q = as_matrix(Q, dim, dim, 'Q')
    R = as_matrix(R, inputs, inputs, 'R')
    Q = 0.5 * (Q + Q.T)
    R = 0.5 * (R + R.T)
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise InputError('R must be positive definite')
    eigenvalues = np.linalg.eigvalsh(Q)
    if eigenvalues.size and eigenvalues[0] < -1e-10 * max(
            1.0, abs(eigenvalues[-1])):
        raise InputError('Q must be positive semidefinite')

    P = Q.copy()
    difference = np.inf
    best = np.inf
    best_iteration = 0
    for iteration in range(1, int(max_iter) + 1):
        BtP = B.T.dot(P)
        gain = -scipy.linalg.solve(R + BtP.dot(B), BtP.dot(A), assume_a='pos')
        P_next = A.T.dot(P).dot(A + B.dot(gain)) + Q
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            raise NonConvergenceError(
                'Riccati iteration diverged', iterations=iteration,
                residual=np.inf,
            )
        difference = float(np.max(np.abs(P_next - P))) / max(
            1.0, float(np.max(np.abs(P_next)))
        )
        P = P_next
        if difference <= tol:
            break
        if difference < best:
            best = difference
            best_iteration = iteration
        elif (best <= DARE_STALL_TOL and
              iteration - best_iteration >= DARE_STALL_WINDOW):
            print_debug('Riccati iteration stalled at relative step '
                        '{:.3g}'.format(best))
            break
    else:
        raise NonConvergenceError(
            'Riccati iteration did not converge in {} iterations '
            '(last relative difference {:.3g}), the pair may not be '
            'stabilizable'.format(max_iter, difference),
            iterations=int(max_iter),
            residual=difference,
        )

    BtP = B.T.dot(P)
    K = -scipy.linalg.solve(R + BtP.dot(B), BtP.dot(A), assume_a='pos')
    return DareSolution(
        P=P,
        K=K,
        iterations=iteration,
        residual=dare_defect(A, B, Q, R, P, relative=True),
    )


def spectral_radius(matrix):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def observability_matrix(A, C):
    blocks = [C]
    for _ in range(A.shape[0] - 1):
        blocks.append(blocks[-1].dot(A))
    return np.vstack(blocks)


def is_observable(A, C, tol=OBSERVABILITY_TOL):
    """
    Rank test of [C; CA; ...; CA^(d-1)] with singular values below
    tol * sigma_max treated as zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    singular_values = np.linalg.svd(observability_matrix(A, C),
                                     compute_uv=False)
    if not singular_values.size or singular_values[0] == 0:
        return False
    rank = int(np.sum(singular_values > tol * singular_values[0]))
    return rank == A.shape[0]


def design_lqr(model, Q, R, tol=DARE_TOL, max_iter=DARE_MAX_ITER):
    """
    LQR on a lifted model with the lifted weight C'QC.
    Warns when (A, C) is not observable.
    :param model: object with A, B, C
    :param Q: (n, n) state weight
    :param R: (m, m) input weight
    :return: DareSolution
    """
    n = model.C.shape[0]
    Q = as_matrix(Q, n, n, 'Q')
    if not is_observable(model.A, model.C):
        warnings.warn(
            'lifted pair (A, C) is not observable, the LQR terminal cost '
            'may not be positive definite',
            PolyflowWarning,
        )
        trace_factory.add_label('unobservable_lift', True)
    Q_lift = model.C.T.dot(Q).dot(model.C)
    return solve_dare(model.A, model.B, Q_lift, R, tol=tol, max_iter=max_iter)


def _normalized_rows(H, h):
    norms = np.linalg.norm(H, axis=1)
    keep = norms > ZERO_ROW_NORM
    if np.any(~keep & (h < 0)):
        raise InvariantSetError('a constraint excludes every state')
    return H[keep] / norms[keep, np.newaxis], h[keep] / norms[keep]


@instrument(ControlEventFactory)
def max_invariant_set(A, B, K, C, X, U=None, k_max=INVARIANT_SET_MAX_STEPS,
                      slack=INVARIANT_SET_SLACK):
    """
    Maximal constraint-admissible invariant set of x+ = (A + BK) x under
    C x in X and K x in U, by constraint accumulation.

    Layers H_X C (A+BK)^k and H_U K (A+BK)^k are added for k = 0, 1, ...
    Until the accumulated set is bounded they are added without checks;
    afterwards every candidate row is tested by an LP and the iteration
    stops at the first step whose rows are all redundant.
    :return: InvariantSet
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    dim = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(dim, -1)
    K = np.asarray(K, dtype=float).reshape(B.shape[1], dim)
    C = np.asarray(C, dtype=float).reshape(-1, dim)
    closed_loop = A + B.dot(K)

    radius = spectral_radius(closed_loop)
    if radius >= 1.0 - STABILITY_MARGIN:
        raise InvariantSetError(
            'closed loop is not stable (spectral radius {:.6g})'.format(radius)
        )
    sets = [(X, C)]
    if U is not None:
        sets.append((U, K))
    for constraint_set, _ in sets:
        if not np.all(constraint_set.h > 0):
            raise InputError('constraint sets must contain the origin in '
                             'their interior')
        if not constraint_set.is_bounded():
            raise InputError('constraint sets must be bounded')

    stage_H = np.vstack([
        constraint_set.H.dot(output) for constraint_set, output in sets
    ])
    stage_h = np.concatenate([constraint_set.h for constraint_set, _ in sets])

    H, h = _normalized_rows(stage_H, stage_h)
    power = closed_loop.copy()
    step = 0
    while not Polytope(H, h).is_bounded():
        step += 1
        if step > dim:
            raise InvariantSetError(
                'constraint set stays unbounded after {} steps, the closed '
                'loop is not observable through the constraints'.format(dim)
            )
        layer_H, layer_h = _normalized_rows(stage_H.dot(power), stage_h)
        H = np.vstack([H, layer_H])
        h = np.concatenate([h, layer_h])
        power = power.dot(closed_loop)

    while True:
        step += 1
        if step > k_max:
            raise InvariantSetError(
                'invariant set not determined within {} steps'.format(k_max)
            )
        current = Polytope(H, h)
        candidates_H, candidates_h = _normalized_rows(
            stage_H.dot(power), stage_h
        )
        new_rows = []
        for row, bound in zip(candidates_H, candidates_h):
            try:
                value, _ = lp_max(row, current)
            except (NonConvergenceError, InfeasibleError,
                    UnboundedError) as exception:
                raise InvariantSetError(
                    'support LP failed at step {}: {}'.format(step, exception)
                )
            if value > bound + slack:
                new_rows.append((row, bound))
        if not new_rows:
            break
        H = np.vstack([H, np.array([row for row, _ in new_rows])])
        h = np.concatenate([h, [bound for _, bound in new_rows]])
        power = power.dot(closed_loop)

    polytope = Polytope(H, h).remove_redundant(slack)
    return InvariantSet(polytope=polytope, determinedness=step - 1)
