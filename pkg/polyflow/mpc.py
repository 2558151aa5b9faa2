"""
Lifted MPC in condensed form, closed-loop runs on the nonlinear plant and
feasible-domain scans.
"""

from __future__ import absolute_import
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
import numpy as np
import scipy.linalg
from .common import InputError, NumericalError
from .constants import DEFAULT_JOBS, DEFAULT_GRID_RESOLUTION
from .events.mpc import MpcEventFactory
from .instrumentation import instrument
from .lincontrol import design_lqr, max_invariant_set
from .qp import QpProblem, QpSettings, QpStatus, solve_qp
from .utils import as_matrix, as_vector

COMPLETED = 'Completed'
LOST_FEASIBILITY = 'LostFeasibility'

MpcSolution = namedtuple('MpcSolution', [
    'u_seq',
    'predicted_lifted_states',
    'cost',
    'status',
    'qp',
])

ClosedLoopRun = namedtuple('ClosedLoopRun', [
    'states',
    'inputs',
    'statuses',
    'lq_cost',
    'terminated',
    'lost_feasibility_at',
    'terminal_input',
])

FeasibleDomainScan = namedtuple('FeasibleDomainScan', [
    'grid',
    'mask',
    'model_tag',
])


class GridSpec(namedtuple('GridSpec', ['axes'])):
    """
    Per-dimension (min, max, count).
    """

    @classmethod
    def from_polytope(cls, polytope, resolution=DEFAULT_GRID_RESOLUTION):
        lower, upper = polytope.bounding_box()
        return cls(tuple(
            (float(low), float(high), int(resolution))
            for low, high in zip(lower, upper)
        ))

    def coordinates(self, axis):
        low, high, count = self.axes[axis]
        return np.linspace(low, high, int(count))

    @property
    def shape(self):
        return tuple(int(count) for _, _, count in self.axes)

    def points(self):
        """
        Grid points in row-major order of the mask.
        :return: array (cells, d)
        """
        mesh = np.meshgrid(
            *[self.coordinates(axis) for axis in range(len(self.axes))],
            indexing='ij'
        )
        return np.stack([values.ravel() for values in mesh], axis=-1)


def prediction_matrices(A, B, horizon):
    """
    Stacked z_i = A^i z_0 + sum_{j<i} A^{i-1-j} B u_j for i = 0 ... N.
    :return: (Sx, Su) of shapes ((N+1) d, d) and ((N+1) d, N m)
    """
    dim, inputs = B.shape
    Sx = np.zeros(((horizon + 1) * dim, dim))
    Su = np.zeros(((horizon + 1) * dim, horizon * inputs))
    Sx[:dim] = np.eye(dim)
    for step in range(1, horizon + 1):
        rows = slice(step * dim, (step + 1) * dim)
        previous = slice((step - 1) * dim, step * dim)
        Sx[rows] = A.dot(Sx[previous])
        Su[rows] = A.dot(Su[previous])
        Su[rows, (step - 1) * inputs:step * inputs] += B
    return Sx, Su


class MpcSpec(object):
    """
    Lifted MPC problem data. The condensed cost and constraint matrices
    are assembled once; only the linear term and the constraint bound
    depend on the current state.
    """

    def __init__(self, model, horizon, Q, R, P, terminal_set, constraints):
        if int(horizon) != horizon or horizon < 1:
            raise InputError('horizon must be a positive integer')
        self.model = model
        self.horizon = int(horizon)
        n, m, dim = model.n, model.m, model.dim
        self.Q = as_matrix(Q, n, n, 'Q')
        self.R = as_matrix(R, m, m, 'R')
        self.P = as_matrix(P, dim, dim, 'P')
        if constraints.n != n or constraints.m != m:
            raise InputError('constraint dimensions do not match the model')
        if terminal_set is not None and terminal_set.polytope.d != dim:
            raise InputError('terminal set must live in the lifted space')
        self.terminal_set = terminal_set
        self.constraints = constraints
        self._assemble()

    def _assemble(self):
        model = self.model
        N = self.horizon
        dim = model.dim
        Sx, Su = prediction_matrices(model.A, model.B, N)
        self.Sx = Sx
        self.Su = Su

        state_weight = model.C.T.dot(self.Q).dot(model.C)
        Q_bar = scipy.linalg.block_diag(*([state_weight] * N + [self.P]))
        R_bar = scipy.linalg.block_diag(*([self.R] * N))
        self.Hq = 2.0 * (Su.T.dot(Q_bar).dot(Su) + R_bar)
        self.linear_term = 2.0 * Su.T.dot(Q_bar).dot(Sx)
        self.constant_term = Sx.T.dot(Q_bar).dot(Sx)

        X = self.constraints.state_set
        U = self.constraints.input_set
        output_H = X.H.dot(model.C)
        G_blocks = []
        b_blocks = []
        W_blocks = []
        for step in range(N):
            rows = slice(step * dim, (step + 1) * dim)
            G_blocks.append(output_H.dot(Su[rows]))
            b_blocks.append(X.h)
            W_blocks.append(-output_H.dot(Sx[rows]))
        G_blocks.append(np.kron(np.eye(N), U.H))
        b_blocks.append(np.tile(U.h, N))
        W_blocks.append(np.zeros((N * U.size, dim)))
        if self.terminal_set is not None:
            terminal = self.terminal_set.polytope
            rows = slice(N * dim, (N + 1) * dim)
            G_blocks.append(terminal.H.dot(Su[rows]))
            b_blocks.append(terminal.h)
            W_blocks.append(-terminal.H.dot(Sx[rows]))
        self.G = np.vstack(G_blocks)
        self.b0 = np.concatenate(b_blocks)
        self.W = np.vstack(W_blocks)

    def cost_of(self, lifted_state, u_seq):
        """
        Stage and terminal cost summed along the lifted prediction.
        """
        model = self.model
        u_seq = np.asarray(u_seq, dtype=float).reshape(self.horizon, model.m)
        states = model.predict_lifted(lifted_state, u_seq)
        outputs = states[:-1].dot(model.C.T)
        return float(
            np.einsum('ij,jk,ik->', outputs, self.Q, outputs) +
            np.einsum('ij,jk,ik->', u_seq, self.R, u_seq) +
            states[-1].dot(self.P).dot(states[-1])
        )


def design_mpc(model, constraints, horizon, Q, R, terminal=True, **kwargs):
    """
    LQR terminal ingredients and the MPC spec of a lifted model.
    :param model: LiftedModel
    :param constraints: ConstraintSpec
    :param horizon: N
    :param Q: state weight
    :param R: input weight
    :param terminal: impose the maximal invariant set as terminal constraint
    :param kwargs: k_max and slack of the invariant set computation
    :return: (MpcSpec, DareSolution)
    """
    dare = design_lqr(model, Q, R)
    terminal_set = None
    if terminal:
        terminal_set = max_invariant_set(
            model.A, model.B, dare.K, model.C,
            constraints.state_set, constraints.input_set, **kwargs
        )
    spec = MpcSpec(model, horizon, Q, R, dare.P, terminal_set, constraints)
    return spec, dare


def build_condensed_qp(spec, x):
    """
    Condensed MPC problem in the input sequence z = (u_0, ..., u_{N-1}).
    State constraints are imposed for i = 0 ... N-1, so a state outside X
    makes the problem infeasible.
    :param spec: MpcSpec
    :param x: plant state
    :return: QpProblem whose objective equals the MPC cost
    """
    x = as_vector(x, spec.model.n, 'state')
    lifted = spec.model.lift(x)
    return QpProblem(
        spec.Hq,
        spec.linear_term.dot(lifted),
        spec.G,
        spec.b0 + spec.W.dot(lifted),
        constant=lifted.dot(spec.constant_term).dot(lifted),
    )


def shift_warm_start(u_seq):
    """
    Drops the applied input and repeats the last one.
    """
    u_seq = np.atleast_2d(u_seq)
    return np.vstack([u_seq[1:], u_seq[-1:]]).ravel()


def mpc_step(spec, x, warm_start=None, settings=None):
    """
    Solves the MPC problem at state x.
    :return: MpcSolution, u_seq is None unless the status is Optimal
    """
    model = spec.model
    problem = build_condensed_qp(spec, x)
    solution = solve_qp(problem, settings=settings, warm_start=warm_start)
    if solution.status != QpStatus.OPTIMAL:
        return MpcSolution(None, None, np.inf, solution.status, solution)
    u_seq = solution.z.reshape(spec.horizon, model.m)
    predicted = model.predict_lifted(model.lift(np.asarray(x, float)), u_seq)
    return MpcSolution(
        u_seq=u_seq,
        predicted_lifted_states=predicted,
        cost=float(solution.objective),
        status=solution.status,
        qp=solution,
    )


def stage_cost(x, u, Q, R):
    return float(x.dot(Q).dot(x) + u.dot(R).dot(u))


@instrument(MpcEventFactory)
def run_closed_loop(plant, spec, x0, steps, settings=None):
    """
    Receding-horizon control of the true plant. Stops at the first step
    whose MPC problem is not solved to optimality.

    The LQ cost sums ||x(t)||_Q^2 + ||u(t)||_R^2 over t = 0 ... T, the
    input u(T) coming from one more MPC solve at the final state.
    :param plant: DiscreteSystem
    :param spec: MpcSpec
    :param x0: initial state
    :param steps: T
    :return: ClosedLoopRun
    """
    if int(steps) != steps or steps < 1:
        raise InputError('run length must be a positive integer')
    state = as_vector(x0, plant.n, 'x0')
    states = [state]
    inputs = []
    statuses = []
    cost = 0.0
    warm_start = None
    lost_at = None
    for step in range(int(steps)):
        solution = mpc_step(spec, state, warm_start, settings)
        statuses.append(solution.status)
        if solution.status != QpStatus.OPTIMAL:
            lost_at = step
            break
        u = solution.u_seq[0]
        cost += stage_cost(state, u, spec.Q, spec.R)
        state = plant.step(state, u)
        if not np.all(np.isfinite(state)):
            raise NumericalError('plant state is not finite at step {}'
                                 .format(step + 1))
        states.append(state)
        inputs.append(u)
        warm_start = shift_warm_start(solution.u_seq)

    terminal_input = None
    if lost_at is None:
        solution = mpc_step(spec, state, warm_start, settings)
        if solution.status == QpStatus.OPTIMAL:
            terminal_input = solution.u_seq[0]
            cost += stage_cost(state, terminal_input, spec.Q, spec.R)
        else:
            cost += stage_cost(state, np.zeros(plant.m), spec.Q, spec.R)

    return ClosedLoopRun(
        states=np.array(states),
        inputs=np.array(inputs).reshape(len(inputs), plant.m),
        statuses=tuple(statuses),
        lq_cost=cost,
        terminated=COMPLETED if lost_at is None else LOST_FEASIBILITY,
        lost_feasibility_at=lost_at,
        terminal_input=terminal_input,
    )


@instrument(MpcEventFactory)
def scan_feasible_domain(spec, grid, jobs=DEFAULT_JOBS, settings=None):
    """
    Feasibility of the MPC problem on a 2-D grid of initial states.
    Cells are solved in a thread pool in feasibility-only mode; the mask is
    assembled in grid order.
    :param spec: MpcSpec
    :param grid: GridSpec
    :param jobs: worker threads
    :return: FeasibleDomainScan
    """
    if spec.model.n != 2 or len(grid.axes) != 2:
        raise InputError('feasible-domain scans need a two-dimensional state')
    settings = (settings or QpSettings())._replace(feasibility_only=True)
    points = grid.points()

    def _feasible(point):
        problem = build_condensed_qp(spec, point)
        return solve_qp(problem, settings=settings).status == \
            QpStatus.OPTIMAL

    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as executor:
        flags = list(executor.map(_feasible, points))
    return FeasibleDomainScan(
        grid=grid,
        mask=np.array(flags, dtype=bool).reshape(grid.shape),
        model_tag=spec.model.tag,
    )


def lqr_controller(model, dare):
    """
    x -> K T(x).
    """
    gain = np.asarray(dare.K)

    def _controller(x):
        return gain.dot(model.lift(as_vector(x, model.n, 'state')))

    return _controller


def simulate_feedback(plant, controller, x0, steps):
    """
    Closed loop x+ = f(x, controller(x)).
    :return: (states (T+1, n), inputs (T, m))
    """
    states = np.empty((int(steps) + 1, plant.n))
    inputs = np.empty((int(steps), plant.m))
    states[0] = as_vector(x0, plant.n, 'x0')
    for step in range(int(steps)):
        inputs[step] = controller(states[step])
        states[step + 1] = plant.step(states[step], inputs[step])
    return states, inputs
