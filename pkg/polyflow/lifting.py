"""
Linear embeddings of discrete-time systems: polyflow approximation from the
nilpotency condition, EDMD with pluggable bases, redundancy removal and the
lifted model they produce.
"""

from __future__ import absolute_import
import itertools
import warnings
from collections import namedtuple
import numpy as np
import scipy.linalg
from .common import InputError, RedundancyError, PolyflowWarning
from .constants import DEFAULT_FD_STEP, DEFAULT_RANK_TOL, SCHEMA_VERSION
from .dynamics import (
    build_system,
    input_jacobians,
    iterate_batch,
    jacobian_linearization,
)
from .events.fit import FitEventFactory
from .instrumentation import instrument
from .trace import trace_factory
from .utils import as_vector, check_finite, frozen

ResidualStats = namedtuple('ResidualStats', ['rms', 'max'])
PolyflowFit = namedtuple('PolyflowFit', [
    'k',
    'alphas',
    'b_vecs',
    'residual',
    'rank',
])
NilpotencyReport = namedtuple('NilpotencyReport', [
    'rms',
    'max',
    'affine_rms',
    'affine_max',
])


def residual_stats(errors):
    """
    RMS and max of per-sample Euclidean error norms.
    :param errors: array (M, d)
    :return: ResidualStats
    """
    errors = np.asarray(errors, dtype=float)
    if not errors.size:
        return ResidualStats(0.0, 0.0)
    norms = np.linalg.norm(errors.reshape(errors.shape[0], -1), axis=1)
    return ResidualStats(
        rms=float(np.sqrt(np.mean(norms ** 2))),
        max=float(np.max(norms)),
    )


def _warn_rank(rank, columns, what):
    if rank < columns:
        warnings.warn(
            '{} regressor is rank deficient ({} < {}), using the '
            'minimum-norm solution'.format(what, rank, columns),
            PolyflowWarning,
        )
        trace_factory.add_label('{}_rank_deficient'.format(what), True)


class SampleSet(object):
    """
    Sample states, optionally with inputs and successor states
    x+ = f(x, u) for snapshot regression.
    """

    def __init__(self, points, inputs=None, successors=None, seed=None):
        self.points = frozen(np.atleast_2d(points))
        self.inputs = None if inputs is None else frozen(
            np.asarray(inputs, dtype=float).reshape(self.points.shape[0], -1)
        )
        self.successors = None if successors is None else frozen(
            np.asarray(successors, dtype=float).reshape(self.points.shape)
        )
        self.seed = seed

    @classmethod
    def snapshots_of(cls, sys, points, inputs, seed=None):
        """
        Snapshot triples generated by the system itself.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inputs = np.asarray(inputs, dtype=float).reshape(points.shape[0],
                                                         sys.m)
        return cls(points, inputs, sys.step_batch(points, inputs), seed)

    @property
    def count(self):
        return self.points.shape[0]

    @property
    def has_snapshots(self):
        return self.inputs is not None and self.successors is not None


def _box_bounds(polytope):
    """
    Bounds of an axis-aligned box, None for any other polytope.
    """
    if np.any(np.count_nonzero(polytope.H, axis=1) != 1):
        return None
    lower = np.full(polytope.d, -np.inf)
    upper = np.full(polytope.d, np.inf)
    for row, bound in zip(polytope.H, polytope.h):
        axis = int(np.flatnonzero(row)[0])
        if row[axis] > 0:
            upper[axis] = min(upper[axis], bound / row[axis])
        else:
            lower[axis] = max(lower[axis], bound / row[axis])
    if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
        return None
    return lower, upper


def _uniform_in(polytope, count, rng):
    """
    Uniform samples in a polytope by rejection from its bounding box.
    """
    bounds = _box_bounds(polytope)
    lower, upper = bounds if bounds else polytope.bounding_box()
    accepted = []
    total = 0
    while total < count:
        candidates = rng.uniform(lower, upper,
                                 size=(max(count - total, 16), polytope.d))
        inside = candidates[polytope.contains(candidates, tol=0.0)]
        accepted.append(inside)
        total += inside.shape[0]
    return np.vstack(accepted)[:count]


def generate_samples(sys, constraints, count, seed, with_inputs=False):
    """
    Uniform samples on the state set; with inputs uniform on the input set
    and successors computed by the system.
    :param sys: DiscreteSystem
    :param constraints: ConstraintSpec
    :param count: number of samples M
    :param seed: generator seed
    :param with_inputs: also draw inputs and successors
    :return: SampleSet
    """
    if count < 1:
        raise InputError('sample count must be positive')
    rng = np.random.default_rng(seed)
    points = _uniform_in(constraints.state_set, int(count), rng)
    if not with_inputs:
        return SampleSet(points, seed=seed)
    inputs = _uniform_in(constraints.input_set, int(count), rng)
    return SampleSet(points, inputs, sys.step_batch(points, inputs), seed)


def random_centers(state_set, count, seed):
    """
    RBF centers drawn uniformly in X.
    """
    return _uniform_in(state_set, int(count), np.random.default_rng(seed))


class Basis(object):
    """
    Lifting dictionary T: R^n -> R^dim.
    """

    FAMILY = 'base'

    def __init__(self, n):
        self.n = int(n)

    @property
    def dim(self):
        raise NotImplementedError

    @property
    def contains_state(self):
        """
        True when the first n functions are the raw state.
        """
        return True

    def _evaluate(self, states):
        raise NotImplementedError

    def evaluate(self, states):
        """
        Evaluates the basis.
        :param states: array (n,) or (M, n)
        :return: array (dim,) or (M, dim)
        """
        states = np.asarray(states, dtype=float)
        single = states.ndim == 1
        batch = np.atleast_2d(states)
        if batch.shape[1] != self.n:
            raise InputError('states must have {} columns, got {}'.format(
                self.n, batch.shape[1]
            ))
        values = self._evaluate(batch)
        return values[0] if single else values

    def state_selector(self):
        """
        C = [I 0] when the raw state leads the basis, otherwise None.
        """
        if not self.contains_state:
            return None
        selector = np.zeros((self.n, self.dim))
        selector[:, :self.n] = np.eye(self.n)
        return selector

    def to_dict(self):
        return {'family': self.FAMILY, 'n': self.n}

    def __repr__(self):
        return '{}(dim={})'.format(type(self).__name__, self.dim)


class StateBasis(Basis):
    """ Identity lifting. """

    FAMILY = 'state'

    @property
    def dim(self):
        return self.n

    def _evaluate(self, states):
        return states.copy()


class PolyflowBasis(Basis):
    """ [x; f^1(x, 0); ...; f^k(x, 0)] """

    FAMILY = 'polyflow'

    def __init__(self, system, k):
        super(PolyflowBasis, self).__init__(system.n)
        if int(k) != k or k < 0:
            raise InputError('polyflow degree must be a non-negative integer')
        self.system = system
        self.k = int(k)

    @property
    def dim(self):
        return self.n * (self.k + 1)

    def _evaluate(self, states):
        sequence = iterate_batch(self.system, states, None, self.k)
        return sequence.reshape(states.shape[0], self.dim)

    def to_dict(self):
        return {
            'family': self.FAMILY,
            'n': self.n,
            'k': self.k,
            'system': self.system.to_dict(),
        }


class MonomialBasis(Basis):
    """
    All monomials of total degree 1 ... max_degree, ordered by degree,
    so that the degree-one terms (the state) come first.
    """

    FAMILY = 'monomial'

    def __init__(self, n, max_degree):
        super(MonomialBasis, self).__init__(n)
        if int(max_degree) != max_degree or max_degree < 1:
            raise InputError('monomial degree must be a positive integer')
        self.max_degree = int(max_degree)
        exponents = []
        for degree in range(1, self.max_degree + 1):
            for combination in itertools.combinations_with_replacement(
                    range(self.n), degree):
                exponents.append(np.bincount(combination, minlength=self.n))
        self.exponents = np.array(exponents, dtype=int)

    @property
    def dim(self):
        return self.exponents.shape[0]

    def _evaluate(self, states):
        return np.prod(
            states[:, np.newaxis, :] ** self.exponents[np.newaxis], axis=-1
        )

    def to_dict(self):
        return {
            'family': self.FAMILY,
            'n': self.n,
            'max_degree': self.max_degree,
        }


class ThinPlateRbfBasis(Basis):
    """
    g_j(x) = r^2 log r with r = ||x - c_j||, and g_j(c_j) = 0.
    """

    FAMILY = 'rbf'

    def __init__(self, centers, include_state=True):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        super(ThinPlateRbfBasis, self).__init__(centers.shape[1])
        self.centers = frozen(centers)
        self.include_state = bool(include_state)

    @property
    def dim(self):
        return self.centers.shape[0] + (self.n if self.include_state else 0)

    @property
    def contains_state(self):
        return self.include_state

    def _evaluate(self, states):
        distances = np.linalg.norm(
            states[:, np.newaxis, :] - self.centers[np.newaxis], axis=-1
        )
        values = np.zeros_like(distances)
        positive = distances > 0
        values[positive] = (
            distances[positive] ** 2 * np.log(distances[positive])
        )
        if self.include_state:
            return np.hstack([states, values])
        return values

    def to_dict(self):
        return {
            'family': self.FAMILY,
            'n': self.n,
            'centers': self.centers.tolist(),
            'include_state': self.include_state,
        }


def basis_from_dict(basis_data):
    """
    Rebuilds a basis from its document.
    """
    family = basis_data.get('family')
    if family == StateBasis.FAMILY:
        return StateBasis(basis_data['n'])
    if family == PolyflowBasis.FAMILY:
        system_data = basis_data['system']
        return PolyflowBasis(
            build_system(system_data['name'], system_data['parameters']),
            basis_data['k'],
        )
    if family == MonomialBasis.FAMILY:
        return MonomialBasis(basis_data['n'], basis_data['max_degree'])
    if family == ThinPlateRbfBasis.FAMILY:
        return ThinPlateRbfBasis(basis_data['centers'],
                                 basis_data['include_state'])
    raise InputError('unknown basis family {!r}'.format(family))


class LiftedModel(object):
    """
    Lifted linear model z+ = A z + B u, x = C z with lifting z = V T(x).
    V is the identity unless redundant basis directions were removed.
    """

    def __init__(self, A, B, C, basis, projection=None, residual=None,
                 metadata=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        dim = A.shape[0]
        if A.shape != (dim, dim):
            raise InputError('A must be square, got {}'.format(A.shape))
        B = np.asarray(B, dtype=float).reshape(dim, -1)
        C = np.asarray(C, dtype=float).reshape(-1, dim)
        if C.shape[0] != basis.n:
            raise InputError('C has {} rows, the basis acts on R^{}'.format(
                C.shape[0], basis.n
            ))
        expected = basis.dim if projection is None else np.shape(
            projection)[1]
        if projection is not None and np.shape(projection)[0] != dim:
            raise InputError('projection rows must match the lifted '
                             'dimension')
        if projection is None and expected != dim:
            raise InputError('basis dimension {} does not match A ({})'.format(
                basis.dim, dim
            ))
        self.A = frozen(check_finite(A, 'A'))
        self.B = frozen(check_finite(B, 'B'))
        self.C = frozen(check_finite(C, 'C'))
        self.basis = basis
        self.projection = None if projection is None else frozen(projection)
        self.residual = residual or ResidualStats(0.0, 0.0)
        self.metadata = dict(metadata or {})

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def tag(self):
        return self.metadata.get('tag', self.basis.FAMILY)

    def lift(self, x):
        """
        T(x) for one state (n,) or a batch (M, n).
        """
        values = self.basis.evaluate(x)
        if self.projection is None:
            return values
        return values.dot(self.projection.T)

    def predict_lifted(self, z0, inputs):
        """
        Lifted states z_0 ... z_N under the input sequence.
        """
        inputs = np.asarray(inputs, dtype=float).reshape(-1, self.m)
        states = np.empty((inputs.shape[0] + 1, self.dim))
        states[0] = as_vector(z0, self.dim, 'z0')
        for index, u in enumerate(inputs):
            states[index + 1] = self.A.dot(states[index]) + self.B.dot(u)
        return states

    def __repr__(self):
        return 'LiftedModel(tag={!r}, dim={})'.format(self.tag, self.dim)


@instrument(FitEventFactory)
def fit_polyflow(sys, samples, k, rank_tol=DEFAULT_RANK_TOL,
                 h=DEFAULT_FD_STEP):
    """
    Least-squares coefficients of f^{k+1}(x, 0) = sum_l alpha_l f^l(x, 0)
    over the sample points, solved by SVD-based least squares, and the
    input directions b_l = D_u f^l(0, 0) for l = 1 ... k+1.
    :param sys: DiscreteSystem
    :param samples: SampleSet
    :param k: degree
    :param rank_tol: relative singular value cutoff
    :param h: finite-difference step for b_l
    :return: PolyflowFit
    """
    if int(k) != k or k < 0:
        raise InputError('polyflow degree must be a non-negative integer')
    k = int(k)
    n = sys.n
    points = samples.points
    columns = n * (k + 1)
    if points.shape[0] < columns:
        raise InputError('need at least {} samples for k={}, got {}'.format(
            columns, k, points.shape[0]
        ))

    sequence = iterate_batch(sys, points, None, k + 1)
    regressor = sequence[:, :k + 1, :].reshape(points.shape[0], columns)
    target = sequence[:, k + 1, :]
    coefficients, _, rank, _ = scipy.linalg.lstsq(
        regressor, target, cond=rank_tol, lapack_driver='gelsd'
    )
    _warn_rank(rank, columns, 'polyflow')

    alphas = tuple(
        coefficients[ell * n:(ell + 1) * n, :].T.copy()
        for ell in range(k + 1)
    )
    b_vecs = tuple(input_jacobians(sys, k + 1, h=h))
    return PolyflowFit(
        k=k,
        alphas=alphas,
        b_vecs=b_vecs,
        residual=residual_stats(target - regressor.dot(coefficients)),
        rank=int(rank),
    )


def assemble_polyflow_model(sys, fit):
    """
    Block-companion model of a polyflow fit: identity blocks on the
    super-diagonal, alpha_0 ... alpha_k on the last block row, B stacking
    b_1 ... b_{k+1} and C = [I 0].
    :param sys: DiscreteSystem
    :param fit: PolyflowFit
    :return: LiftedModel
    """
    n = sys.n
    k = fit.k
    if len(fit.alphas) != k + 1 or len(fit.b_vecs) != k + 1:
        raise InputError('fit must carry k+1 alphas and input directions')
    dim = n * (k + 1)
    A = np.zeros((dim, dim))
    for block in range(k):
        A[block * n:(block + 1) * n, (block + 1) * n:(block + 2) * n] = \
            np.eye(n)
    for ell, alpha in enumerate(fit.alphas):
        A[k * n:, ell * n:(ell + 1) * n] = alpha
    B = np.vstack(fit.b_vecs)
    basis = PolyflowBasis(sys, k)
    return LiftedModel(
        A,
        B,
        basis.state_selector(),
        basis,
        residual=fit.residual,
        metadata={'family': 'polyflow', 'k': k, 'rank': fit.rank},
    )


@instrument(FitEventFactory)
def fit_edmd(basis, sys, snapshots, rank_tol=DEFAULT_RANK_TOL):
    """
    min_{A,B} sum_i ||T(x_i+) - A T(x_i) - B u_i||^2.

    The reported residual is the one-step state prediction error
    ||x_i+ - C (A T(x_i) + B u_i)||; the lifted regression residual is kept
    in the metadata. Bases without the raw state get C by least squares.
    :param basis: Basis
    :param sys: DiscreteSystem that generated the snapshots
    :param snapshots: SampleSet with inputs and successors
    :param rank_tol: relative singular value cutoff
    :return: LiftedModel
    """
    if not snapshots.has_snapshots:
        raise InputError('EDMD needs snapshot inputs and successors')
    if basis.n != sys.n or snapshots.inputs.shape[1] != sys.m:
        raise InputError(
            'basis, system and snapshots disagree on dimensions'
        )
    values = basis.evaluate(snapshots.points)
    successors = basis.evaluate(snapshots.successors)
    dim = basis.dim
    if snapshots.count < dim + sys.m:
        raise InputError('need at least {} snapshots, got {}'.format(
            dim + sys.m, snapshots.count
        ))

    regressor = np.hstack([values, snapshots.inputs])
    coefficients, _, rank, _ = scipy.linalg.lstsq(
        regressor, successors, cond=rank_tol, lapack_driver='gelsd'
    )
    _warn_rank(rank, regressor.shape[1], 'edmd')
    A = coefficients[:dim].T
    B = coefficients[dim:].T

    C = basis.state_selector()
    if C is None:
        C = scipy.linalg.lstsq(values, snapshots.points,
                               lapack_driver='gelsd')[0].T

    predicted = regressor.dot(coefficients)
    return LiftedModel(
        A,
        B,
        C,
        basis,
        residual=residual_stats(snapshots.successors - predicted.dot(C.T)),
        metadata={
            'family': 'edmd',
            'basis': basis.FAMILY,
            'rank': int(rank),
            'seed': snapshots.seed,
            'lift_residual_rms': residual_stats(
                successors - predicted
            ).rms,
        },
    )


@instrument(FitEventFactory)
def remove_redundancy(basis_values, tol=DEFAULT_RANK_TOL, state_dim=None):
    """
    Projection V onto the numerically independent directions of a basis.

    Singular values below tol * sigma_max are dropped. With state_dim = n
    the first n functions (the raw state) are kept verbatim: the remaining
    functions are orthogonalized against the state on the data and reduced
    by SVD, giving V = [[I, 0], [-W' G', W']].
    :param basis_values: array (M, p), one row per sample
    :param tol: relative tolerance
    :param state_dim: length of the leading raw-state block
    :return: (V, dim)
    """
    if tol <= 0:
        raise InputError('rank tolerance must be positive')
    values = np.atleast_2d(np.asarray(basis_values, dtype=float))
    columns = values.shape[1]
    singular_values = np.linalg.svd(values, compute_uv=False)
    if not singular_values.size or singular_values[0] == 0:
        raise RedundancyError('basis values are identically zero')
    cutoff = tol * singular_values[0]
    rank = int(np.sum(singular_values > cutoff))
    if rank == columns:
        return np.eye(columns), columns

    if not state_dim:
        _, _, right = np.linalg.svd(values, full_matrices=False)
        return right[:rank], rank

    state_values = values[:, :state_dim]
    state_singular = np.linalg.svd(state_values, compute_uv=False)
    if int(np.sum(state_singular > cutoff)) < state_dim:
        raise RedundancyError(
            'the raw state block is degenerate, C cannot be built'
        )
    rest = values[:, state_dim:]
    G = scipy.linalg.lstsq(state_values, rest, lapack_driver='gelsd')[0]
    orthogonal = rest - state_values.dot(G)
    _, rest_singular, right = np.linalg.svd(orthogonal, full_matrices=False)
    kept = int(np.sum(rest_singular > cutoff))
    W = right[:kept].T

    dim = state_dim + kept
    V = np.zeros((dim, columns))
    V[:state_dim, :state_dim] = np.eye(state_dim)
    V[state_dim:, :state_dim] = -W.T.dot(G.T)
    V[state_dim:, state_dim:] = W.T
    return V, dim


def reconstruction(basis_values, V):
    """
    L with basis_values ~ (basis_values V') L', exact on the data span.
    """
    reduced = basis_values.dot(V.T)
    return scipy.linalg.lstsq(reduced, basis_values,
                              lapack_driver='gelsd')[0].T


@instrument(FitEventFactory)
def reduce_model(model, basis_values, tol=DEFAULT_RANK_TOL):
    """
    Removes redundant lifted directions: A <- V A L, B <- V B, C = [I 0].
    :param model: LiftedModel whose lift produced basis_values
    :param basis_values: lifted sample values, array (M, dim)
    :param tol: relative rank tolerance
    :return: LiftedModel, the input model itself when nothing is redundant
    """
    if not model.basis.contains_state:
        raise InputError('redundancy removal needs the raw state in the basis')
    V, dim = remove_redundancy(basis_values, tol, state_dim=model.n)
    if dim == model.dim:
        return model
    L = reconstruction(basis_values, V)
    projection = V if model.projection is None else V.dot(model.projection)
    C = np.zeros((model.n, dim))
    C[:, :model.n] = np.eye(model.n)
    metadata = dict(model.metadata)
    metadata.update({'reduced_from': model.dim})
    return LiftedModel(
        V.dot(model.A).dot(L),
        V.dot(model.B),
        C,
        model.basis,
        projection=projection,
        residual=model.residual,
        metadata=metadata,
    )


def nilpotency_residual(sys, fit, test_points):
    """
    Out-of-sample defects of a polyflow fit: the nilpotency relation at
    u = 0 and, when the sample set carries inputs, the input-affineness
    defect ||f^l(x, u) - f^l(x, 0) - b_l u|| over l = 1 ... k+1.
    :param sys: DiscreteSystem
    :param fit: PolyflowFit
    :param test_points: SampleSet, disjoint from the training samples
    :return: NilpotencyReport
    """
    points = test_points.points
    k = fit.k
    free = iterate_batch(sys, points, None, k + 1)
    combination = sum(
        free[:, ell, :].dot(alpha.T) for ell, alpha in enumerate(fit.alphas)
    )
    relation = residual_stats(free[:, k + 1, :] - combination)

    affine = ResidualStats(0.0, 0.0)
    if test_points.inputs is not None:
        forced = iterate_batch(sys, points, test_points.inputs, k + 1)
        errors = np.concatenate([
            forced[:, ell, :] - free[:, ell, :] -
            test_points.inputs.dot(fit.b_vecs[ell - 1].T)
            for ell in range(1, k + 2)
        ], axis=1)
        affine = residual_stats(errors)
    return NilpotencyReport(relation.rms, relation.max, affine.rms,
                            affine.max)


def linearized_model(sys, x0=None, u0=None, h=DEFAULT_FD_STEP):
    """
    Jacobian linearization as a lifted model with the identity lifting.
    """
    x0 = np.zeros(sys.n) if x0 is None else x0
    u0 = np.zeros(sys.m) if u0 is None else u0
    A, B = jacobian_linearization(sys, x0, u0, h)
    basis = StateBasis(sys.n)
    return LiftedModel(A, B, np.eye(sys.n), basis,
                       metadata={'family': 'jacobian', 'tag': 'jacobian'})


def predict(model, x0, inputs):
    """
    Open-loop prediction C z_t with z_0 = T(x0).
    :return: array (T+1, n)
    """
    lifted = model.predict_lifted(model.lift(as_vector(x0, model.n, 'x0')),
                                  inputs)
    return lifted.dot(model.C.T)


def model_to_dict(model):
    residual = model.residual
    return {
        'schema_version': SCHEMA_VERSION,
        'A': model.A.tolist(),
        'B': model.B.tolist(),
        'C': model.C.tolist(),
        'projection': None if model.projection is None
        else model.projection.tolist(),
        'basis': model.basis.to_dict(),
        'residual': {'rms': residual.rms, 'max': residual.max},
        'metadata': model.metadata,
    }


def load_model(model_data):
    """
    Rebuilds a LiftedModel from model_to_dict output.
    """
    version = model_data.get('schema_version')
    if version != SCHEMA_VERSION:
        raise InputError('unsupported model schema version {!r}'.format(
            version
        ))
    residual = model_data.get('residual') or {'rms': 0.0, 'max': 0.0}
    projection = model_data.get('projection')
    return LiftedModel(
        model_data['A'],
        model_data['B'],
        model_data['C'],
        basis_from_dict(model_data['basis']),
        projection=None if projection is None else np.asarray(projection),
        residual=ResidualStats(residual['rms'], residual['max']),
        metadata=model_data.get('metadata'),
    )
