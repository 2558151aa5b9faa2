import warnings
import mock
import numpy as np
import pytest
from polyflow.common import (
    InfeasibleError,
    InputError,
    InvariantSetError,
    NonConvergenceError,
    PolyflowWarning,
    UnboundedError,
)
from polyflow.constants import DARE_MAX_ITER
from polyflow.lifting import LiftedModel, StateBasis, linearized_model
from polyflow.lincontrol import (
    Polytope,
    dare_defect,
    design_lqr,
    is_observable,
    lp_max,
    max_invariant_set,
    solve_dare,
    spectral_radius,
)

GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0


def test_box_polytope():
    box = Polytope.box([-1.0, -2.0], [1.0, 2.0])
    assert box.d == 2
    assert box.size == 4
    assert box.contains([0.5, -1.5])
    assert not box.contains([1.5, 0.0])
    assert list(box.contains(np.array([[0.0, 0.0], [0.0, 3.0]]))) == \
        [True, False]


def test_polytope_validation():
    with pytest.raises(InputError):
        Polytope(np.eye(2), [1.0])
    with pytest.raises(InputError):
        Polytope([[np.nan, 0.0]], [1.0])
    with pytest.raises(InputError):
        Polytope.box([1.0], [0.0])
    with pytest.raises(InputError):
        Polytope.box([0.0], [1.0]).contains([0.0, 0.0])


def test_normalized_drops_zero_rows():
    polytope = Polytope([[2.0, 0.0], [0.0, 0.0], [0.0, -4.0]], [2.0, 1.0, 4.0])
    normalized = polytope.normalized()
    assert normalized.size == 2
    assert np.allclose(normalized.h, [1.0, 1.0])
    with pytest.raises(InfeasibleError):
        Polytope([[0.0, 0.0]], [-1.0]).normalized()


def test_is_bounded():
    assert Polytope.box([-1.0, -1.0], [1.0, 1.0]).is_bounded()
    assert not Polytope([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0]).is_bounded()
    assert not Polytope(np.zeros((0, 2)), np.zeros(0)).is_bounded()
    simplex = Polytope([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]],
                       [0.0, 0.0, 1.0])
    assert simplex.is_bounded()


def test_lp_max_on_box():
    box = Polytope.box([-1.0, -2.0], [1.0, 2.0])
    value, argmax = lp_max([1.0, 1.0], box)
    assert abs(value - 3.0) <= 1e-6
    assert np.allclose(argmax, [1.0, 2.0], atol=1e-5)


def test_lp_max_errors():
    with pytest.raises(InfeasibleError):
        lp_max([1.0], Polytope([[1.0], [-1.0]], [-1.0, -1.0]))
    with pytest.raises(UnboundedError):
        lp_max([1.0, 0.0], Polytope([[0.0, 1.0], [0.0, -1.0]], [1.0, 1.0]))


def test_lp_max_degenerate_vertex():
    # x + y <= 2 and 2x <= 2 are both tight at the optimal corner
    polytope = Polytope.box([-1.0, -1.0], [1.0, 1.0]).intersect(
        Polytope([[1.0, 1.0], [2.0, 0.0]], [2.0, 2.0])
    )
    value, argmax = lp_max([1.0, 1.0], polytope)
    assert abs(value - 2.0) <= 1e-6
    assert np.allclose(argmax, [1.0, 1.0], atol=1e-5)


def test_interior_point_and_bounding_box():
    box = Polytope.box([-1.0, 0.0], [3.0, 1.0])
    center, radius = box.interior_point()
    assert abs(radius - 0.5) <= 1e-5
    assert abs(center[1] - 0.5) <= 1e-5
    lower, upper = box.bounding_box()
    assert np.allclose(lower, [-1.0, 0.0], atol=1e-5)
    assert np.allclose(upper, [3.0, 1.0], atol=1e-5)


def test_remove_redundant():
    box = Polytope.box([-1.0, -1.0], [1.0, 1.0])
    extra = box.intersect(Polytope([[1.0, 1.0], [1.0, 0.0]], [5.0, 0.5]))
    pruned = extra.remove_redundant()
    assert pruned.size == 4
    assert not pruned.contains([0.75, 0.0])
    assert pruned.contains([0.25, 0.9])


def test_intersect_dimension_mismatch():
    with pytest.raises(InputError):
        Polytope.box([-1.0], [1.0]).intersect(
            Polytope.box([-1.0, -1.0], [1.0, 1.0])
        )


def test_sample_stays_inside():
    triangle = Polytope([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]],
                        [0.0, 0.0, 1.0])
    points = triangle.sample(200, seed=5)
    assert points.shape == (200, 2)
    assert triangle.contains(points, tol=1e-9).all()
    assert np.array_equal(points, triangle.sample(200, seed=5))


def test_polytope_round_trip():
    box = Polytope.box([-1.0], [2.0])
    rebuilt = Polytope.load_from_dict(box.to_dict())
    assert np.array_equal(rebuilt.H, box.H)
    assert np.array_equal(rebuilt.h, box.h)


def test_scalar_dare_golden_ratio():
    solution = solve_dare([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert abs(solution.P[0, 0] - GOLDEN_RATIO) <= 1e-9
    assert abs(solution.K[0, 0] + GOLDEN_RATIO / (1.0 + GOLDEN_RATIO)) <= 1e-9
    assert solution.residual <= 1e-9


def test_dare_on_double_integrator():
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.005], [0.1]])
    solution = solve_dare(A, B, np.eye(2), [[0.1]])
    assert dare_defect(A, B, np.eye(2), np.array([[0.1]]), solution.P) <= 1e-8
    assert np.allclose(solution.P, solution.P.T)
    assert np.all(np.linalg.eigvalsh(solution.P) > 0)
    assert spectral_radius(A + B.dot(solution.K)) < 1.0 - 1e-8


def test_dare_stops_at_working_precision():
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.005], [0.1]])
    solution = solve_dare(A, B, np.eye(2), [[0.1]], tol=0.0)
    assert solution.iterations < DARE_MAX_ITER
    assert solution.residual <= 1e-12


def test_dare_tolerance_is_relative():
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.005], [0.1]])
    scale = 1e9
    reference = solve_dare(A, B, np.eye(2), [[0.1]])
    scaled = solve_dare(A, B, scale * np.eye(2), [[0.1 * scale]])
    assert np.allclose(scaled.P / scale, reference.P, rtol=1e-8)
    assert np.allclose(scaled.K, reference.K, atol=1e-8)
    assert scaled.residual <= 1e-9
    assert dare_defect(A, B, scale * np.eye(2), np.array([[0.1 * scale]]),
                       scaled.P, relative=True) <= 1e-9


def test_dare_zero_dynamics():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    solution = solve_dare(np.zeros((2, 2)), np.ones((2, 1)), Q, [[1.0]])
    assert np.allclose(solution.P, Q)
    assert np.allclose(solution.K, 0.0)


def test_dare_without_input_is_lyapunov_sum():
    A = np.array([[0.5, 0.2], [0.0, 0.3]])
    Q = np.eye(2)
    expected = np.zeros((2, 2))
    power = np.eye(2)
    for _ in range(200):
        expected += power.T.dot(Q).dot(power)
        power = power.dot(A)
    solution = solve_dare(A, np.zeros((2, 1)), Q, [[1.0]])
    assert np.allclose(solution.P, expected, atol=1e-9)
    assert np.allclose(solution.K, 0.0)


def test_dare_input_validation():
    with pytest.raises(InputError):
        solve_dare([[1.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(InputError):
        solve_dare([[1.0]], [[1.0]], [[-1.0]], [[1.0]])
    with pytest.raises(InputError):
        solve_dare([[1.0]], [[1.0]], np.eye(2), [[1.0]])


def test_dare_unstabilizable():
    with pytest.raises(NonConvergenceError) as error:
        solve_dare([[2.0]], [[0.0]], [[1.0]], [[1.0]], max_iter=50)
    assert error.value.iterations is not None


def test_observability():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert is_observable(A, [[1.0, 0.0]])
    assert not is_observable(A, [[0.0, 1.0]])


def test_design_lqr_warns_when_unobservable():
    A = np.diag([0.5, 0.5, 0.9])
    model = LiftedModel(A, [[1.0], [0.0], [1.0]], [[1.0, 0.0, 0.0],
                                                   [0.0, 1.0, 0.0]],
                        StateBasis(2), projection=np.eye(3, 2))
    with pytest.warns(PolyflowWarning):
        design_lqr(model, np.eye(2), [[1.0]])


def test_design_lqr_on_linear_model(double_integrator):
    model = linearized_model(double_integrator)
    with warnings.catch_warnings():
        warnings.simplefilter('error', PolyflowWarning)
        solution = design_lqr(model, np.eye(2), [[0.1]])
    assert solution.residual <= 1e-8


def test_invariant_set_scalar():
    box = Polytope.box([-1.0], [1.0])
    invariant = max_invariant_set([[0.5]], [[1.0]], [[-0.25]], [[1.0]], box,
                                  Polytope.box([-0.1], [0.1]))
    # |K x| <= 0.1 binds at |x| <= 0.4
    assert invariant.polytope.contains([0.4])
    assert not invariant.polytope.contains([0.41])


def test_invariant_set_is_invariant_and_admissible(double_integrator):
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.005], [0.1]])
    X = Polytope.box([-1.0, -1.0], [1.0, 1.0])
    U = Polytope.box([-1.0], [1.0])
    dare = solve_dare(A, B, np.eye(2), [[0.1]])
    invariant = max_invariant_set(A, B, dare.K, np.eye(2), X, U)
    assert invariant.determinedness >= 0

    closed_loop = A + B.dot(dare.K)
    points = invariant.polytope.sample(500, seed=2)
    assert X.contains(points, tol=1e-7).all()
    assert U.contains(points.dot(dare.K.T), tol=1e-7).all()
    assert invariant.polytope.contains(points.dot(closed_loop.T),
                                       tol=1e-7).all()


def test_invariant_set_unstable_loop():
    box = Polytope.box([-1.0], [1.0])
    with pytest.raises(InvariantSetError):
        max_invariant_set([[2.0]], [[1.0]], [[0.0]], [[1.0]], box, box)


def test_invariant_set_unobservable():
    A = np.diag([0.5, 0.5])
    X = Polytope.box([-1.0], [1.0])
    with pytest.raises(InvariantSetError):
        max_invariant_set(A, [[1.0], [0.0]], [[0.0, 0.0]], [[1.0, 0.0]], X,
                          X)


def test_invariant_set_step_limit():
    box = Polytope.box([-1.0, -1.0], [1.0, 1.0])
    rotation = 0.99 * np.array([[np.cos(0.1), -np.sin(0.1)],
                                [np.sin(0.1), np.cos(0.1)]])
    with pytest.raises(InvariantSetError):
        max_invariant_set(rotation, np.zeros((2, 1)), np.zeros((1, 2)),
                          np.eye(2), box, k_max=1)


def test_invariant_set_requires_origin_inside():
    with pytest.raises(InputError):
        max_invariant_set([[0.5]], [[1.0]], [[0.0]], [[1.0]],
                          Polytope.box([0.0], [1.0]))


def test_invariant_set_rejects_marginal_loop():
    box = Polytope.box([-1.0], [1.0])
    with pytest.raises(InvariantSetError):
        max_invariant_set([[1.0 - 1e-9]], [[1.0]], [[0.0]], [[1.0]], box, box)


def test_invariant_set_reports_lp_failure():
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.005], [0.1]])
    X = Polytope.box([-1.0, -1.0], [1.0, 1.0])
    dare = solve_dare(A, B, np.eye(2), [[0.1]])
    failure = NonConvergenceError('LP oracle did not converge',
                                  iterations=20000, residual=1e-3)
    with mock.patch('polyflow.lincontrol.lp_max', side_effect=failure):
        with pytest.raises(InvariantSetError) as error:
            max_invariant_set(A, B, dare.K, np.eye(2), X,
                              Polytope.box([-1.0], [1.0]))
    assert 'did not converge' in str(error.value)
