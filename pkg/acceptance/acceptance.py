"""
Full-size benchmarks on the pest model and the immersible system.
Run with scripts/run_acceptance_tests.sh, takes minutes.
"""
import itertools
import time
import numpy as np
import pytest
from polyflow.config import ExperimentConfig
from polyflow.dynamics import build_system, iterate_map
from polyflow.experiment import (
    compare_methods,
    design_controller,
    fit_model,
    fit_pipeline,
)
from polyflow.lifting import predict
from polyflow.lincontrol import dare_defect, solve_dare
from polyflow.mpc import (
    COMPLETED,
    LOST_FEASIBILITY,
    GridSpec,
    mpc_step,
    run_closed_loop,
    scan_feasible_domain,
)
from polyflow.qp import QpProblem, QpStatus, kkt_check, solve_qp

BENCHMARK_STATE = [0.1488, -0.1319]

IMMERSIBLE = {
    'system': 'immersible',
    'system_parameters': {
        'A1': [[0.5]],
        'A2': [[0.8]],
        'B1': [[1.0]],
        'phi': [[[2], [1.0]]],
    },
    'degree': 1,
    'samples': 2000,
    'state_lower': [-1.0, -1.0],
    'state_upper': [1.0, 1.0],
    'input_lower': [-1.0],
    'input_upper': [1.0],
    'steps': 100,
}

REGISTERED = {
    'pest': {},
    'linear': {'A': [[1.0, 0.1], [0.0, 1.0]], 'B': [[0.005], [0.1]]},
    'immersible': IMMERSIBLE['system_parameters'],
}


@pytest.fixture(scope='module')
def pest_config():
    return ExperimentConfig()


@pytest.fixture(scope='module')
def pest_polyflow(pest_config):
    return fit_pipeline(pest_config, 'polyflow')


@pytest.fixture(scope='module')
def immersible_config():
    return ExperimentConfig(**IMMERSIBLE)


class TestLiftedDimensions:
    def test_polyflow(self, pest_config):
        start = time.time()
        model, _ = fit_model(pest_config, 'polyflow')
        assert time.time() - start < 60
        assert model.dim == 12

    @pytest.mark.parametrize('method', ['monomial', 'rbf'])
    def test_edmd(self, pest_config, method):
        start = time.time()
        model, _ = fit_model(pest_config, method)
        assert time.time() - start < 60
        assert model.dim == 27


class TestImmersibleSystem:
    def test_open_loop_prediction(self, immersible_config):
        model, _ = fit_model(immersible_config, 'polyflow')
        system = immersible_config.build_system()
        rng = np.random.default_rng(3)
        for _ in range(10):
            x0 = rng.uniform(-1.0, 1.0, 2)
            inputs = rng.uniform(-1.0, 1.0, (20, 1))
            states = [x0]
            for u in inputs:
                states.append(system.step(states[-1], u))
            error = np.max(np.abs(predict(model, x0, inputs) -
                                  np.array(states)))
            assert error <= 1e-8

    def test_closed_loop_converges(self, immersible_config):
        model, _ = fit_model(immersible_config, 'polyflow')
        spec, _, invariant_set, _ = design_controller(immersible_config,
                                                      model)
        assert invariant_set is not None
        system = immersible_config.build_system()
        rng = np.random.default_rng(5)
        runs = 0
        while runs < 10:
            x0 = rng.uniform(-1.0, 1.0, 2)
            if mpc_step(spec, x0).status != QpStatus.OPTIMAL:
                continue
            run = run_closed_loop(system, spec, x0, 100)
            assert run.terminated == COMPLETED
            assert np.linalg.norm(run.states[-1]) <= 1e-6
            runs += 1


class TestFeasibleDomain:
    def test_polyflow_dominates_jacobian(self, pest_config, pest_polyflow):
        grid = GridSpec.from_polytope(pest_config.constraints().state_set,
                                      101)
        jacobian, _ = fit_model(pest_config, 'jacobian')
        jacobian_spec = design_controller(pest_config, jacobian)[0]

        polyflow_mask = scan_feasible_domain(
            pest_polyflow.spec, grid, jobs=pest_config.jobs
        ).mask
        jacobian_mask = scan_feasible_domain(
            jacobian_spec, grid, jobs=pest_config.jobs
        ).mask
        assert polyflow_mask.sum() >= jacobian_mask.sum()
        outside = np.count_nonzero(jacobian_mask & ~polyflow_mask)
        assert outside <= 0.01 * polyflow_mask.size


class TestBenchmarkTrajectory:
    def test_polyflow_run(self, pest_config, pest_polyflow):
        run = run_closed_loop(pest_config.build_system(), pest_polyflow.spec,
                              BENCHMARK_STATE, 100)
        constraints = pest_config.constraints()
        assert run.terminated == COMPLETED
        assert all(status == QpStatus.OPTIMAL for status in run.statuses)
        assert constraints.state_set.contains(run.states, tol=1e-6).all()
        assert constraints.input_set.contains(run.inputs, tol=1e-6).all()
        assert np.linalg.norm(run.states[-1]) <= 1e-3

    def test_method_ranking(self, pest_config):
        config = pest_config.with_overrides(initial_states=[BENCHMARK_STATE])
        rows = {row.method: row for row in compare_methods(
            config, jobs=config.jobs
        )}
        assert rows['polyflow'].terminated == COMPLETED
        assert rows['edmd_polyflow'].terminated == COMPLETED
        assert rows['monomial'].terminated == LOST_FEASIBILITY
        assert rows['monomial'].lost_feasibility_at is not None
        if rows['rbf'].terminated == COMPLETED:
            assert rows['polyflow'].lq_cost <= rows['rbf'].lq_cost
            assert rows['edmd_polyflow'].lq_cost <= rows['rbf'].lq_cost


class TestRiccati:
    def test_scalar(self):
        solution = solve_dare([[1.0]], [[1.0]], [[1.0]], [[1.0]])
        assert abs(solution.P[0, 0] - (1.0 + np.sqrt(5.0)) / 2.0) <= 1e-9

    def test_pest_lift(self, pest_config, pest_polyflow):
        model = pest_polyflow.model
        Q, R = pest_config.weights()
        defect = dare_defect(model.A, model.B, model.C.T.dot(Q).dot(model.C),
                             R, pest_polyflow.dare.P, relative=True)
        assert defect <= 1e-7
        assert pest_polyflow.dare.residual <= 1e-7


def _random_problem(rng):
    size = int(rng.integers(1, 5))
    rows = int(rng.integers(1, 6))
    factor = rng.standard_normal((size, size))
    G = rng.standard_normal((rows, size))
    bound = G.dot(rng.standard_normal(size)) + rng.uniform(0.0, 1.0, rows)
    return QpProblem(factor.dot(factor.T) + 0.1 * np.eye(size),
                     rng.standard_normal(size), G, bound)


def _enumerated_optimum(problem):
    best = None
    for count in range(problem.inequality_count + 1):
        for active in itertools.combinations(
                range(problem.inequality_count), count):
            G = problem.G[list(active)]
            kkt = np.block([[problem.Hq, G.T],
                            [G, np.zeros((count, count))]])
            rhs = np.concatenate([-problem.g, problem.bound[list(active)]])
            try:
                solution = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            z = solution[:problem.size]
            if np.any(solution[problem.size:] < -1e-9) or np.any(
                    problem.G.dot(z) > problem.bound + 1e-9):
                continue
            if best is None or problem.objective(z) < problem.objective(best):
                best = z
    return best


class TestQpOracle:
    def test_random_problems(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            problem = _random_problem(rng)
            solution = solve_qp(problem)
            assert solution.status == QpStatus.OPTIMAL
            assert np.max(np.abs(solution.z - _enumerated_optimum(problem))) \
                <= 1e-5
            assert kkt_check(problem, solution, tol=1e-6).passed


class TestInvariantSet:
    def test_invariance_and_maximality(self, pest_config, pest_polyflow):
        invariant_set = pest_polyflow.invariant_set
        assert invariant_set is not None
        model = pest_polyflow.model
        gain = np.asarray(pest_polyflow.dare.K)
        closed_loop = model.A + model.B.dot(gain)
        constraints = pest_config.constraints()
        polytope = invariant_set.polytope

        def _admissible(points):
            return (constraints.state_set.contains(points.dot(model.C.T),
                                                   tol=1e-7) &
                    constraints.input_set.contains(points.dot(gain.T),
                                                   tol=1e-7))

        inside = polytope.sample(10000, seed=1)
        assert _admissible(inside).all()
        assert polytope.contains(inside.dot(closed_loop.T), tol=1e-7).all()

        directions = polytope.sample(1000, seed=2)
        with np.errstate(divide='ignore'):
            reach = polytope.h[np.newaxis] / directions.dot(polytope.H.T)
        reach[reach <= 0] = np.inf
        probes = 1.05 * np.min(reach, axis=1)[:, np.newaxis] * directions
        violated = np.zeros(len(probes), dtype=bool)
        points = probes
        for _ in range(invariant_set.determinedness + 2):
            violated |= ~_admissible(points)
            points = points.dot(closed_loop.T)
        assert violated.mean() >= 0.95


class TestSemigroup:
    @pytest.mark.parametrize('name', sorted(REGISTERED))
    def test_iterate_composition(self, name):
        system = build_system(name, REGISTERED[name])
        rng = np.random.default_rng(9)
        for _ in range(1000):
            x = rng.uniform(-0.5, 0.5, system.n)
            u = rng.uniform(-0.2, 0.2, system.m)
            ell = int(rng.integers(0, 7))
            j = int(rng.integers(1, 7))
            combined = iterate_map(system, x, u, ell + j)
            split = iterate_map(system, iterate_map(system, x, u, j),
                                np.zeros(system.m), ell)
            scale = max(1.0, float(np.max(np.abs(combined))))
            assert np.max(np.abs(combined - split)) <= 1e-12 * scale
