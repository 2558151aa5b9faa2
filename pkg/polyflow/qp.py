"""
Dense convex QP solver by operator splitting (ADMM).

Problems are given as

    minimize    1/2 z' Hq z + g' z
    subject to  G z <= bound,  E z = e

and solved internally in the form l <= A z <= u with A = [G; E].
"""

from __future__ import absolute_import
from collections import namedtuple
import numpy as np
import scipy.linalg
import scipy.optimize
from .common import InputError
from .constants import (
    QP_EPS_PRIMAL,
    QP_EPS_DUAL,
    QP_EPS_INFEASIBLE,
    QP_RHO,
    QP_SIGMA,
    QP_ALPHA,
    QP_MAX_ITER,
    QP_ADAPT_INTERVAL,
    QP_SCALING_ITER,
)
from .events.qp import QpEventFactory
from .instrumentation import instrument
from .utils import as_matrix

RHO_MIN = 1e-6
RHO_MAX = 1e6
RHO_EQUALITY_FACTOR = 1e3
RHO_ADAPT_TOLERANCE = 5.0
POLISH_DELTA = 1e-6
POLISH_REFINE_ITER = 3
SCALING_MIN = 1e-4
SCALING_MAX = 1e4


class QpStatus(object):
    """
    Solver status enum
    """
    OPTIMAL = 'Optimal'
    INFEASIBLE = 'Infeasible'
    UNBOUNDED = 'Unbounded'
    MAX_ITER = 'MaxIter'


QpSettings = namedtuple('QpSettings', [
    'eps_primal',
    'eps_dual',
    'eps_infeasible',
    'rho',
    'sigma',
    'alpha',
    'max_iter',
    'adapt_interval',
    'scaling_iter',
    'polish',
    'feasibility_only',
    'record_history',
])
QpSettings.__new__.__defaults__ = (
    QP_EPS_PRIMAL,
    QP_EPS_DUAL,
    QP_EPS_INFEASIBLE,
    QP_RHO,
    QP_SIGMA,
    QP_ALPHA,
    QP_MAX_ITER,
    QP_ADAPT_INTERVAL,
    QP_SCALING_ITER,
    True,
    False,
    False,
)

QpSolution = namedtuple('QpSolution', [
    'z',
    'status',
    'objective',
    'primal_residual',
    'dual_residual',
    'iterations',
    'y',
    'history',
])

KktReport = namedtuple('KktReport', [
    'passed',
    'stationarity',
    'primal_violation',
    'complementarity',
    'multipliers',
])


def _no_nan(array, name):
    if np.any(np.isnan(array)):
        raise InputError('{} contains NaN values'.format(name))
    return array


class QpProblem(object):
    """
    Dense convex QP. Hq is symmetrized on construction; `constant` is
    added to every reported objective value.
    """

    def __init__(self, Hq, g, G=None, bound=None, E=None, e=None,
                 constant=0.0):
        self.g = _no_nan(np.atleast_1d(np.asarray(g, dtype=float)), 'g')
        if self.g.ndim != 1:
            raise InputError('g must be a vector, got shape {}'.format(
                self.g.shape
            ))
        size = self.g.shape[0]
        Hq = _no_nan(as_matrix(Hq, size, size, 'Hq'), 'Hq')
        self.Hq = 0.5 * (Hq + Hq.T)
        self.G, self.bound = self._block(G, bound, size, 'G', 'bound')
        self.E, self.e = self._block(E, e, size, 'E', 'e')
        self.constant = float(constant)
        if np.any(np.isinf(self.e)) or np.any(self.bound == -np.inf):
            raise InputError('constraint right-hand sides must be finite')
        if not np.all(np.isfinite(self.Hq)) or not np.all(
                np.isfinite(self.g)):
            raise InputError('cost contains infinite values')

    @staticmethod
    def _block(matrix, rhs, size, matrix_name, rhs_name):
        if matrix is None:
            if rhs is not None and np.size(rhs):
                raise InputError('{} given without {}'.format(
                    rhs_name, matrix_name
                ))
            return np.zeros((0, size)), np.zeros(0)
        matrix = np.asarray(matrix, dtype=float).reshape(-1, size)
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        if rhs.shape != (matrix.shape[0],):
            raise InputError('{} must have shape ({},), got {}'.format(
                rhs_name, matrix.shape[0], rhs.shape
            ))
        _no_nan(matrix, matrix_name)
        _no_nan(rhs, rhs_name)
        if not np.all(np.isfinite(matrix)):
            raise InputError('{} contains infinite values'.format(
                matrix_name
            ))
        return matrix, rhs

    @property
    def size(self):
        return self.g.shape[0]

    @property
    def inequality_count(self):
        return self.G.shape[0]

    @property
    def constraint_count(self):
        return self.G.shape[0] + self.E.shape[0]

    def objective(self, z):
        z = np.asarray(z, dtype=float)
        return 0.5 * z.dot(self.Hq).dot(z) + self.g.dot(z) + self.constant

    def stacked(self):
        """
        Two-sided form l <= A z <= u.
        :return: (A, l, u)
        """
        A = np.vstack([self.G, self.E])
        lower = np.concatenate([
            np.full(self.inequality_count, -np.inf), self.e
        ])
        upper = np.concatenate([self.bound, self.e])
        return A, lower, upper


def _limit_scaling(values):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    values = np.where(values < SCALING_MIN, 1.0, values)
    return np.minimum(values, SCALING_MAX)


def ruiz_scaling(P, q, A, iterations):
    """
    Symmetric equilibration of the KKT matrix followed by cost scaling.
    :return: (P, q, A, D, E, cost_scale) with P = c D P D, A = E A D, q = c D q
    """
    size = P.shape[0]
    rows = A.shape[0]
    D = np.ones(size)
    E = np.ones(rows)
    P = P.copy()
    q = q.copy()
    A = A.copy()
    for _ in range(iterations):
        column_norms = np.max(np.abs(P), axis=0)
        if rows:
            column_norms = np.maximum(
                column_norms, np.max(np.abs(A), axis=0)
            )
            delta_y = 1.0 / np.sqrt(_limit_scaling(
                np.max(np.abs(A), axis=1)
            ))
        else:
            delta_y = E
        delta_x = 1.0 / np.sqrt(_limit_scaling(column_norms))
        P = delta_x[:, np.newaxis] * P * delta_x[np.newaxis, :]
        A = delta_y[:, np.newaxis] * A * delta_x[np.newaxis, :]
        q = delta_x * q
        D = D * delta_x
        if rows:
            E = E * delta_y

    cost_norm = np.mean(np.max(np.abs(P), axis=0))
    if q.size:
        cost_norm = max(cost_norm, np.max(np.abs(q)))
    cost_scale = 1.0 / _limit_scaling(cost_norm)[0]
    return P * cost_scale, q * cost_scale, A, D, E, cost_scale


def _box_projection(values, lower, upper):
    return np.minimum(np.maximum(values, lower), upper)


class _Admm(object):
    """
    ADMM iteration state over the scaled problem.
    """

    def __init__(self, P, q, A, lower, upper, settings):
        self.P = P
        self.q = q
        self.A = A
        self.lower = lower
        self.upper = upper
        self.settings = settings
        self.finite_lower = np.isfinite(lower)
        self.finite_upper = np.isfinite(upper)
        self.equality = self.finite_lower & self.finite_upper & (
            lower == upper
        )
        (
            self.P_s,
            self.q_s,
            self.A_s,
            self.D,
            self.E,
            self.cost_scale,
        ) = ruiz_scaling(P, q, A, settings.scaling_iter)
        self.lower_s = self.E * lower
        self.upper_s = self.E * upper
        self.rho = settings.rho
        self.rho_vector = None
        self.factor = None
        self.update_rho(settings.rho)

    def update_rho(self, rho):
        self.rho = float(np.clip(rho, RHO_MIN, RHO_MAX))
        rho_vector = np.full(self.A.shape[0], self.rho)
        rho_vector[self.equality] = self.rho * RHO_EQUALITY_FACTOR
        rho_vector[~self.finite_lower & ~self.finite_upper] = RHO_MIN
        self.rho_vector = rho_vector
        size = self.P.shape[0]
        kkt = self.P_s + self.settings.sigma * np.eye(size) + self.A_s.T.dot(
            rho_vector[:, np.newaxis] * self.A_s
        )
        try:
            self.factor = scipy.linalg.cho_factor(kkt)
        except np.linalg.LinAlgError:
            raise InputError('Hq must be positive semidefinite')

    def unscale(self, x_s, z_s, y_s):
        return (
            self.D * x_s,
            z_s / self.E if z_s.size else z_s,
            self.E * y_s / self.cost_scale,
        )

    def scale(self, x, y):
        x_s = x / self.D
        y_s = self.cost_scale * y / self.E if y.size else y
        return x_s, y_s

    def residuals(self, x, z, y):
        primal = np.max(np.abs(self.A.dot(x) - z)) if z.size else 0.0
        dual = np.max(np.abs(self.P.dot(x) + self.q + self.A.T.dot(y))) \
            if x.size else 0.0
        return primal, dual

    def adapted_rho(self, x_s, z_s, y_s):
        """
        Penalty balancing the scaled primal and dual residuals.
        """
        Ax = self.A_s.dot(x_s)
        Px = self.P_s.dot(x_s)
        Aty = self.A_s.T.dot(y_s)
        primal = np.max(np.abs(Ax - z_s))
        dual = np.max(np.abs(Px + self.q_s + Aty))
        primal_norm = max(np.max(np.abs(Ax)), np.max(np.abs(z_s)), 1e-30)
        dual_norm = max(
            np.max(np.abs(Px)),
            np.max(np.abs(Aty)),
            np.max(np.abs(self.q_s)) if self.q_s.size else 0.0,
            1e-30,
        )
        ratio = (primal / primal_norm) / max(dual / dual_norm, 1e-30)
        return self.rho * np.sqrt(ratio)

    def primal_infeasible(self, delta_y):
        eps = self.settings.eps_infeasible
        norm = np.max(np.abs(delta_y)) if delta_y.size else 0.0
        if norm <= 1e-30:
            return False
        direction = delta_y / norm
        positive = np.maximum(direction, 0.0)
        negative = np.minimum(direction, 0.0)
        if np.any(positive[~self.finite_upper] > eps) or np.any(
                negative[~self.finite_lower] < -eps):
            return False
        support = (
            self.upper[self.finite_upper].dot(positive[self.finite_upper]) +
            self.lower[self.finite_lower].dot(negative[self.finite_lower])
        )
        return (
            np.max(np.abs(self.A.T.dot(direction))) <= eps and support < -eps
        )

    def dual_infeasible(self, delta_x):
        eps = self.settings.eps_infeasible
        norm = np.max(np.abs(delta_x)) if delta_x.size else 0.0
        if norm <= 1e-30:
            return False
        direction = delta_x / norm
        if self.q.dot(direction) >= -eps:
            return False
        if np.max(np.abs(self.P.dot(direction))) > eps:
            return False
        Ad = self.A.dot(direction)
        upper_ok = np.all(Ad[self.finite_upper] <= eps)
        lower_ok = np.all(Ad[self.finite_lower] >= -eps)
        return bool(upper_ok and lower_ok)

    def nnls_multipliers(self, x, lower_active, upper_active):
        """
        Sign-constrained multipliers of an active set: the non-negative
        least squares fit of P x + q + A'y = 0 with y >= 0 on upper rows,
        y <= 0 on lower rows and free y on equalities.
        """
        upper_only = upper_active & ~self.equality
        basis = np.hstack([
            self.A[upper_only].T,
            -self.A[lower_active].T,
            self.A[self.equality].T,
            -self.A[self.equality].T,
        ])
        y = np.zeros(self.A.shape[0])
        if not basis.shape[1]:
            return y
        try:
            coefficients, _ = scipy.optimize.nnls(
                basis, -(self.P.dot(x) + self.q)
            )
        except RuntimeError:
            return None
        counts = np.cumsum([
            np.count_nonzero(upper_only),
            np.count_nonzero(lower_active),
            np.count_nonzero(self.equality),
        ])
        y[upper_only] = coefficients[:counts[0]]
        y[lower_active] = -coefficients[counts[0]:counts[1]]
        y[self.equality] = (
            coefficients[counts[1]:counts[2]] - coefficients[counts[2]:]
        )
        return y

    def polish(self, x, z, y):
        """
        Solves the equality-constrained problem of the guessed active set
        with a regularized KKT system and iterative refinement.
        :return: (accepted, x, z, y, primal, dual)
        """
        settings = self.settings
        lower_active = self.finite_lower & (z - self.lower < -y)
        upper_active = self.finite_upper & (self.upper - z < y)
        lower_active &= ~self.equality
        upper_active |= self.equality
        lower_active &= ~upper_active
        active = lower_active | upper_active
        A_active = self.A[active]
        rhs_bound = np.where(lower_active, self.lower, self.upper)[active]
        size = self.P.shape[0]
        count = A_active.shape[0]

        kkt = np.block([
            [self.P, A_active.T],
            [A_active, np.zeros((count, count))],
        ])
        regularization = np.concatenate([
            np.full(size, POLISH_DELTA), np.full(count, -POLISH_DELTA)
        ])
        rhs = np.concatenate([-self.q, rhs_bound])
        try:
            factor = scipy.linalg.lu_factor(kkt + np.diag(regularization))
        except (ValueError, np.linalg.LinAlgError):
            return False, x, z, y, np.inf, np.inf
        solution = scipy.linalg.lu_solve(factor, rhs)
        for _ in range(POLISH_REFINE_ITER):
            solution = solution + scipy.linalg.lu_solve(
                factor, rhs - kkt.dot(solution)
            )
        if not np.all(np.isfinite(solution)):
            return False, x, z, y, np.inf, np.inf

        x_polished = solution[:size]
        y_polished = np.zeros_like(y)
        y_polished[active] = solution[size:]
        z_polished = _box_projection(
            self.A.dot(x_polished), self.lower, self.upper
        )
        primal, dual = self.residuals(x_polished, z_polished, y_polished)
        signs_ok = (
            np.all(y_polished[lower_active] <= settings.eps_dual) and
            np.all(y_polished[upper_active & ~self.equality] >=
                   -settings.eps_dual)
        )
        if not signs_ok or dual > settings.eps_dual:
            # degenerate active sets leave the KKT multipliers non-unique
            y_fitted = self.nnls_multipliers(
                x_polished, lower_active, upper_active
            )
            if y_fitted is not None:
                y_polished = y_fitted
                primal, dual = self.residuals(
                    x_polished, z_polished, y_polished
                )
                signs_ok = True
        accepted = bool(
            signs_ok and
            primal <= settings.eps_primal and
            dual <= settings.eps_dual
        )
        return accepted, x_polished, z_polished, y_polished, primal, dual


def _solution(problem, x, status, primal, dual, iterations, y, history):
    if status == QpStatus.INFEASIBLE:
        objective = np.inf
    elif status == QpStatus.UNBOUNDED:
        objective = -np.inf
    else:
        objective = float(problem.objective(x))
    return QpSolution(
        z=x,
        status=status,
        objective=objective,
        primal_residual=float(primal),
        dual_residual=float(dual),
        iterations=iterations,
        y=y,
        history=history,
    )


@instrument(QpEventFactory)
def solve_qp(prob, settings=None, warm_start=None):
    """
    Solves a QpProblem by ADMM.

    The z-update solves (P + sigma I + A' R A) z = sigma z - q + A'(R s - y)
    with a Cholesky factor cached until the penalty changes; the slack
    update is a projection on [l, u]. Infeasibility and unboundedness are
    certified from the successive differences of the dual and primal
    iterates.

    :param prob: QpProblem
    :param settings: QpSettings
    :param warm_start: optional z, or (z, y) with y ordered as prob.stacked()
    :return: QpSolution
    """
    settings = settings or QpSettings()
    A, lower, upper = prob.stacked()
    if settings.feasibility_only:
        P = np.zeros_like(prob.Hq)
        q = np.zeros_like(prob.g)
    else:
        P = prob.Hq
        q = prob.g
    admm = _Admm(P, q, A, lower, upper, settings)

    size = prob.size
    rows = A.shape[0]
    x = np.zeros(size)
    y = np.zeros(rows)
    if warm_start is not None:
        if isinstance(warm_start, tuple):
            x = np.asarray(warm_start[0], dtype=float).reshape(size)
            if warm_start[1] is not None:
                y = np.asarray(warm_start[1], dtype=float).reshape(rows)
        else:
            x = np.asarray(warm_start, dtype=float).reshape(size)
    x_s, y_s = admm.scale(x, y)
    z_s = _box_projection(admm.A_s.dot(x_s), admm.lower_s, admm.upper_s)

    history = [] if settings.record_history else None
    alpha = settings.alpha
    sigma = settings.sigma
    primal = dual = np.inf
    iteration = 0
    for iteration in range(1, settings.max_iter + 1):
        x_previous = x
        y_previous = y

        rhs = sigma * x_s - admm.q_s + admm.A_s.T.dot(
            admm.rho_vector * z_s - y_s
        )
        x_tilde = scipy.linalg.cho_solve(admm.factor, rhs)
        z_tilde = admm.A_s.dot(x_tilde)
        x_s = alpha * x_tilde + (1.0 - alpha) * x_s
        z_relaxed = alpha * z_tilde + (1.0 - alpha) * z_s
        z_next = _box_projection(
            z_relaxed + y_s / admm.rho_vector, admm.lower_s, admm.upper_s
        )
        y_s = y_s + admm.rho_vector * (z_relaxed - z_next)
        z_s = z_next

        x, z, y = admm.unscale(x_s, z_s, y_s)
        if not np.all(np.isfinite(x)):
            return _solution(prob, x_previous, QpStatus.MAX_ITER, primal,
                             dual, iteration, y_previous, history)
        primal, dual = admm.residuals(x, z, y)
        if history is not None:
            history.append(float(prob.objective(x)))

        if settings.feasibility_only:
            if primal <= settings.eps_primal:
                return _solution(prob, x, QpStatus.OPTIMAL, primal, dual,
                                 iteration, y, history)
        elif primal <= settings.eps_primal and dual <= settings.eps_dual:
            if settings.polish:
                accepted, x_p, _, y_p, primal_p, dual_p = admm.polish(x, z, y)
                if accepted:
                    x, y, primal, dual = x_p, y_p, primal_p, dual_p
            return _solution(prob, x, QpStatus.OPTIMAL, primal, dual,
                             iteration, y, history)

        if admm.primal_infeasible(y - y_previous):
            return _solution(prob, x, QpStatus.INFEASIBLE, primal, dual,
                             iteration, y - y_previous, history)
        if not settings.feasibility_only and admm.dual_infeasible(
                x - x_previous):
            return _solution(prob, x - x_previous, QpStatus.UNBOUNDED,
                             primal, dual, iteration, y, history)

        if iteration % settings.adapt_interval == 0:
            if settings.polish and not settings.feasibility_only:
                accepted, x_p, _, y_p, primal_p, dual_p = admm.polish(x, z, y)
                if accepted:
                    return _solution(prob, x_p, QpStatus.OPTIMAL, primal_p,
                                     dual_p, iteration, y_p, history)
            if rows:
                rho = admm.adapted_rho(x_s, z_s, y_s)
                if (rho > admm.rho * RHO_ADAPT_TOLERANCE or
                        rho < admm.rho / RHO_ADAPT_TOLERANCE):
                    admm.update_rho(rho)

    return _solution(prob, x, QpStatus.MAX_ITER, primal, dual, iteration, y,
                     history)


def kkt_check(prob, sol, tol=1e-6):
    """
    Verifies the first-order optimality of a solution.
    Multipliers of the active inequalities (slack <= tol) are reconstructed
    by non-negative least squares on the stationarity condition, equality
    multipliers are free.
    :param prob: QpProblem
    :param sol: QpSolution
    :param tol: tolerance of every check
    :return: KktReport
    """
    if sol.status != QpStatus.OPTIMAL or sol.z is None:
        return KktReport(False, np.inf, np.inf, np.inf, None)
    z = np.asarray(sol.z, dtype=float)
    gradient = prob.Hq.dot(z) + prob.g

    slack = prob.bound - prob.G.dot(z)
    equality_defect = prob.E.dot(z) - prob.e
    primal_violation = max(
        float(np.max(-slack)) if slack.size else 0.0,
        float(np.max(np.abs(equality_defect))) if equality_defect.size
        else 0.0,
        0.0,
    )

    active = slack <= tol
    columns = [prob.G[active].T, prob.E.T, -prob.E.T]
    basis = np.hstack(columns)
    if basis.shape[1]:
        coefficients, _ = scipy.optimize.nnls(basis, -gradient)
    else:
        coefficients = np.zeros(0)
    active_count = int(np.count_nonzero(active))
    equality_count = prob.E.shape[0]
    multipliers = np.zeros(prob.inequality_count)
    multipliers[active] = coefficients[:active_count]
    equality_multipliers = (
        coefficients[active_count:active_count + equality_count] -
        coefficients[active_count + equality_count:]
    )

    stationarity = float(np.max(np.abs(
        gradient + prob.G.T.dot(multipliers) +
        prob.E.T.dot(equality_multipliers)
    ))) if z.size else 0.0
    complementarity = float(np.max(np.abs(multipliers * slack))) \
        if slack.size else 0.0
    passed = (
        stationarity <= tol and
        primal_violation <= tol and
        complementarity <= tol
    )
    return KktReport(
        passed=bool(passed),
        stationarity=stationarity,
        primal_violation=primal_violation,
        complementarity=complementarity,
        multipliers=np.concatenate([multipliers, equality_multipliers]),
    )
