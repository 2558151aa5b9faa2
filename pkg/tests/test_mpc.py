import numpy as np
import pytest
from polyflow.common import InputError
from polyflow.dynamics import ConstraintSpec
from polyflow.experiment import fit_model
from polyflow.lifting import linearized_model
from polyflow.mpc import (
    COMPLETED,
    LOST_FEASIBILITY,
    GridSpec,
    MpcSpec,
    build_condensed_qp,
    design_mpc,
    lqr_controller,
    mpc_step,
    prediction_matrices,
    run_closed_loop,
    scan_feasible_domain,
    shift_warm_start,
    simulate_feedback,
    stage_cost,
)
from polyflow.qp import QpStatus
from .conftest import immersible_config

HORIZON = 5
Q = np.eye(2)
R = np.array([[0.1]])


@pytest.fixture
def spec(double_integrator, unit_constraints):
    model = linearized_model(double_integrator)
    return design_mpc(model, unit_constraints, HORIZON, Q, R)[0]


def test_prediction_matrices_match_rollout(rng):
    A = rng.standard_normal((3, 3)) * 0.5
    B = rng.standard_normal((3, 2))
    z0 = rng.standard_normal(3)
    inputs = rng.standard_normal((4, 2))
    Sx, Su = prediction_matrices(A, B, 4)
    assert Sx.shape == (15, 3)
    assert Su.shape == (15, 8)

    expected = [z0]
    for u in inputs:
        expected.append(A.dot(expected[-1]) + B.dot(u))
    stacked = Sx.dot(z0) + Su.dot(inputs.ravel())
    assert np.allclose(stacked, np.concatenate(expected))


def test_qp_objective_equals_mpc_cost(spec, rng):
    for _ in range(5):
        x = rng.uniform(-0.5, 0.5, size=2)
        u_seq = rng.uniform(-1.0, 1.0, size=HORIZON)
        problem = build_condensed_qp(spec, x)
        expected = spec.cost_of(spec.model.lift(x), u_seq)
        assert abs(problem.objective(u_seq) - expected) <= 1e-9 * max(
            1.0, expected)


def test_origin_is_free(spec):
    solution = mpc_step(spec, [0.0, 0.0])
    assert solution.status == QpStatus.OPTIMAL
    assert np.max(np.abs(solution.u_seq)) <= 1e-7
    assert abs(solution.cost) <= 1e-10


def test_mpc_step_respects_constraints(spec):
    solution = mpc_step(spec, [0.4, 0.0])
    assert solution.status == QpStatus.OPTIMAL
    assert solution.u_seq.shape == (HORIZON, 1)
    assert np.all(np.abs(solution.u_seq) <= 1.0 + 1e-6)
    predicted = solution.predicted_lifted_states
    assert np.all(np.abs(predicted[:-1]) <= 1.0 + 1e-6)
    assert spec.terminal_set.polytope.contains(predicted[-1], tol=1e-6)


def test_start_outside_state_set_loses_feasibility(double_integrator, spec):
    run = run_closed_loop(double_integrator, spec, [1.5, 0.0], 10)
    assert run.terminated == LOST_FEASIBILITY
    assert run.lost_feasibility_at == 0
    assert len(run.statuses) == 1
    assert run.statuses[0] != QpStatus.OPTIMAL
    assert run.states.shape == (1, 2)
    assert run.inputs.shape == (0, 1)
    assert run.lq_cost == 0.0
    assert run.terminal_input is None


def test_closed_loop_on_linear_plant(double_integrator, spec):
    run = run_closed_loop(double_integrator, spec, [0.5, -0.2], 15)
    assert run.terminated == COMPLETED
    assert run.lost_feasibility_at is None
    assert run.states.shape == (16, 2)
    assert run.inputs.shape == (15, 1)
    assert all(status == QpStatus.OPTIMAL for status in run.statuses)
    assert np.all(np.abs(run.inputs) <= 1.0 + 1e-6)
    assert np.linalg.norm(run.states[-1]) < np.linalg.norm(run.states[0])

    expected = sum(
        stage_cost(x, u, Q, R) for x, u in zip(run.states, run.inputs)
    ) + stage_cost(run.states[-1], run.terminal_input, Q, R)
    assert abs(run.lq_cost - expected) <= 1e-9


def test_closed_loop_is_deterministic(double_integrator, spec):
    first = run_closed_loop(double_integrator, spec, [0.3, -0.1], 8)
    second = run_closed_loop(double_integrator, spec, [0.3, -0.1], 8)
    assert np.array_equal(first.states, second.states)
    assert first.lq_cost == second.lq_cost


def test_closed_loop_on_immersible_plant():
    config = immersible_config()
    model, _ = fit_model(config, 'polyflow')
    assert model.dim == 3
    spec, _ = design_mpc(model, config.constraints(), config.horizon,
                         config.weights()[0], config.weights()[1])
    run = run_closed_loop(config.build_system(), spec, [0.6, 0.7], 40)
    assert run.terminated == COMPLETED
    assert np.linalg.norm(run.states[-1]) < 1e-2


def test_run_length_validation(double_integrator, spec):
    with pytest.raises(InputError):
        run_closed_loop(double_integrator, spec, [0.0, 0.0], 0)


def test_spec_validation(double_integrator, unit_constraints):
    model = linearized_model(double_integrator)
    with pytest.raises(InputError):
        MpcSpec(model, 0, Q, R, np.eye(2), None, unit_constraints)
    with pytest.raises(InputError):
        MpcSpec(model, 3, Q, R, np.eye(2), None,
                ConstraintSpec.box([-1.0], [1.0], [-1.0], [1.0]))
    with pytest.raises(InputError):
        MpcSpec(model, 3, Q, R, np.eye(3), None, unit_constraints)


def test_design_without_terminal_set(double_integrator, unit_constraints):
    model = linearized_model(double_integrator)
    spec, dare = design_mpc(model, unit_constraints, HORIZON, Q, R,
                            terminal=False)
    assert spec.terminal_set is None
    assert spec.G.shape == (HORIZON * 4 + HORIZON * 2, HORIZON)
    assert np.array_equal(spec.P, dare.P)


def test_grid_from_polytope(unit_constraints):
    grid = GridSpec.from_polytope(unit_constraints.state_set, 3)
    assert grid.shape == (3, 3)
    points = grid.points()
    assert points.shape == (9, 2)
    assert np.allclose(points[0], [-1.0, -1.0], atol=1e-5)
    assert np.allclose(points[1], [-1.0, 0.0], atol=1e-5)
    assert np.allclose(points[-1], [1.0, 1.0], atol=1e-5)


def test_scan_feasible_domain(spec):
    grid = GridSpec(((-1.0, 1.0, 5), (-1.0, 1.0, 5)))
    scan = scan_feasible_domain(spec, grid, jobs=1)
    assert scan.mask.shape == (5, 5)
    assert scan.model_tag == 'jacobian'
    assert scan.mask[2, 2]
    assert not scan.mask[4, 4]
    assert not scan.mask[0, 0]


def test_scan_does_not_depend_on_jobs(spec):
    grid = GridSpec(((-1.0, 1.0, 4), (-1.0, 1.0, 4)))
    serial = scan_feasible_domain(spec, grid, jobs=1)
    threaded = scan_feasible_domain(spec, grid, jobs=3)
    assert np.array_equal(serial.mask, threaded.mask)


def test_scan_needs_planar_state(scalar_system):
    model = linearized_model(scalar_system)
    constraints = ConstraintSpec.box([-1.0], [1.0], [-1.0], [1.0])
    spec = MpcSpec(model, 2, [[1.0]], [[1.0]], [[1.0]], None, constraints)
    with pytest.raises(InputError):
        scan_feasible_domain(spec, GridSpec(((-1.0, 1.0, 3),)))


def test_shift_warm_start():
    assert np.array_equal(shift_warm_start([[1.0], [2.0], [3.0]]),
                          [2.0, 3.0, 3.0])


def test_lqr_feedback_stabilizes(double_integrator):
    model = linearized_model(double_integrator)
    spec, dare = design_mpc(model, ConstraintSpec.box(
        [-1.0, -1.0], [1.0, 1.0], [-1.0], [1.0]), HORIZON, Q, R,
        terminal=False)
    controller = lqr_controller(spec.model, dare)
    assert np.allclose(controller([0.2, 0.1]), dare.K.dot([0.2, 0.1]))
    states, inputs = simulate_feedback(double_integrator, controller,
                                       [0.5, 0.0], 200)
    assert states.shape == (201, 2)
    assert inputs.shape == (200, 1)
    assert np.linalg.norm(states[-1]) < 1e-3


@pytest.fixture(scope='module')
def immersible_design():
    config = immersible_config()
    model, _ = fit_model(config, 'polyflow')
    Q_weight, R_weight = config.weights()
    spec, dare = design_mpc(model, config.constraints(), 2, Q_weight,
                            R_weight)
    return config, spec, dare


def test_one_step_horizon_is_lqr(scalar_system):
    model = linearized_model(scalar_system)
    constraints = ConstraintSpec.box([-100.0], [100.0], [-100.0], [100.0])
    spec, dare = design_mpc(model, constraints, 1, [[1.0]], [[1.0]],
                            terminal=False)
    x = np.array([0.7])
    lifted = model.lift(x)
    BtP = model.B.T.dot(dare.P)
    expected = -np.linalg.solve(spec.R + BtP.dot(model.B),
                                BtP.dot(model.A).dot(lifted))
    solution = mpc_step(spec, x)
    assert solution.status == QpStatus.OPTIMAL
    assert np.allclose(solution.u_seq[0], expected, atol=1e-6)
    assert np.allclose(solution.u_seq[0], dare.K.dot(lifted), atol=1e-6)


def test_condensed_cost_matches_plant_grid_search(immersible_design):
    config, spec, _ = immersible_design
    plant = config.build_system()
    Q_weight, R_weight = config.weights()
    free = MpcSpec(spec.model, 2, Q_weight, R_weight, spec.P, None,
                   spec.constraints)
    x0 = np.array([0.3, 0.4])
    solution = mpc_step(free, x0)
    assert solution.status == QpStatus.OPTIMAL

    spacing = 0.01
    values = np.linspace(-1.0, 1.0, 201)
    first, second = np.meshgrid(values, values, indexing='ij')
    u0 = first.reshape(-1, 1)
    u1 = second.reshape(-1, 1)
    x_start = np.tile(x0, (u0.shape[0], 1))
    x1 = plant.step_batch(x_start, u0)
    x2 = plant.step_batch(x1, u1)
    terminal = free.model.lift(x2)
    cost = (
        np.einsum('ij,jk,ik->i', x_start, Q_weight, x_start) +
        np.einsum('ij,jk,ik->i', x1, Q_weight, x1) +
        np.einsum('ij,jk,ik->i', u0, R_weight, u0) +
        np.einsum('ij,jk,ik->i', u1, R_weight, u1) +
        np.einsum('ij,jk,ik->i', terminal, free.P, terminal)
    )
    feasible = free.constraints.state_set.contains(x1)
    best = np.min(cost[feasible])

    problem = build_condensed_qp(free, x0)
    curvature = np.max(np.linalg.eigvalsh(problem.Hq))
    resolution = 0.5 * curvature * 2 * (spacing / 2.0) ** 2
    assert solution.cost <= best + 1e-7
    assert best - solution.cost <= resolution + 1e-7


def test_warm_start_does_not_change_cost(spec, immersible_design):
    _, immersible_spec, _ = immersible_design
    for mpc_spec, x in ((spec, [0.4, 0.0]), (immersible_spec, [0.3, 0.4])):
        cold = mpc_step(mpc_spec, x)
        assert cold.status == QpStatus.OPTIMAL
        warm = mpc_step(mpc_spec, x,
                        warm_start=shift_warm_start(cold.u_seq) + 0.05)
        assert warm.status == QpStatus.OPTIMAL
        assert abs(warm.cost - cold.cost) <= 1e-6


def test_cost_does_not_grow_with_horizon(immersible_design):
    config, spec, _ = immersible_design
    Q_weight, R_weight = config.weights()
    x0 = np.array([0.1, 0.1])
    costs = []
    for horizon in range(1, 7):
        longer = MpcSpec(spec.model, horizon, Q_weight, R_weight, spec.P,
                         spec.terminal_set, spec.constraints)
        solution = mpc_step(longer, x0)
        assert solution.status == QpStatus.OPTIMAL
        costs.append(solution.cost)
    for shorter, longer in zip(costs, costs[1:]):
        assert longer <= shorter + 1e-7
