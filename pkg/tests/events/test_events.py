import numpy as np
import pytest
from polyflow.common import ErrorCode, NonConvergenceError
from polyflow.lifting import (
    fit_polyflow,
    generate_samples,
    remove_redundancy,
)
from polyflow.lincontrol import Polytope, max_invariant_set, solve_dare
from polyflow.qp import QpProblem, QpSettings, solve_qp


def _events(trace, resource_type):
    return [event for event in trace.events
            if event.resource['type'] == resource_type]


def test_fit_event(active_trace, pest, pest_constraints):
    samples = generate_samples(pest, pest_constraints, 200, seed=3)
    fit_polyflow(pest, samples, 2)

    event = _events(active_trace, 'fit')[0]
    metadata = event.resource['metadata']
    assert event.origin == 'lifting'
    assert event.resource['name'] == 'fit_polyflow'
    assert metadata['system'] == 'pest'
    assert metadata['k'] == 2
    assert metadata['rank'] == 6
    assert metadata['residual_rms'] >= 0
    assert event.error_code == ErrorCode.OK


def test_redundancy_event(active_trace, rng):
    values = rng.standard_normal((50, 2))
    remove_redundancy(np.hstack([values, values.sum(axis=1)[:, None]]))

    metadata = _events(active_trace, 'fit')[0].resource['metadata']
    assert metadata['dim'] == 2
    assert metadata['projection']['shape'] == [2, 3]


def test_fit_event_exception(active_trace, pest, pest_constraints):
    samples = generate_samples(pest, pest_constraints, 3, seed=3)
    with pytest.raises(ValueError):
        fit_polyflow(pest, samples, 2)

    event = _events(active_trace, 'fit')[0]
    assert event.error_code == ErrorCode.EXCEPTION
    assert event.exception['type'] == 'InputError'


def test_dare_event(active_trace):
    solve_dare(np.eye(1), np.eye(1), np.eye(1), np.eye(1))

    event = _events(active_trace, 'control')[0]
    metadata = event.resource['metadata']
    assert event.resource['name'] == 'solve_dare'
    assert metadata['dim'] == 1
    assert metadata['residual'] <= 1e-9
    assert metadata['P']['shape'] == [1, 1]


def test_dare_event_nonconvergence(active_trace):
    with pytest.raises(NonConvergenceError):
        solve_dare(np.eye(1) * 2.0, np.eye(1), np.eye(1), np.eye(1),
                   max_iter=2)

    metadata = _events(active_trace, 'control')[0].resource['metadata']
    assert metadata['iterations'] == 2


def test_invariant_set_event(active_trace):
    box = Polytope.box([-1.0], [1.0])
    max_invariant_set([[0.5]], [[1.0]], [[0.0]], [[1.0]], box, box)

    metadata = _events(active_trace, 'control')[0].resource['metadata']
    assert metadata['determinedness'] >= 0
    assert metadata['constraints'] == 2


def test_qp_event(active_trace):
    problem = QpProblem(np.eye(2), [1.0, 1.0], np.eye(2), [1.0, 1.0])
    solve_qp(problem)

    event = _events(active_trace, 'qp')[0]
    metadata = event.resource['metadata']
    assert event.resource['name'] == 'admm'
    assert metadata['variables'] == 2
    assert metadata['constraints'] == 2
    assert metadata['status'] == 'Optimal'
    assert event.error_code == ErrorCode.OK


def test_qp_event_not_optimal(active_trace):
    problem = QpProblem(np.eye(1), [0.0], [[1.0], [-1.0]], [-1.0, -1.0])
    solve_qp(problem)

    event = _events(active_trace, 'qp')[0]
    assert event.resource['metadata']['status'] == 'Infeasible'
    assert event.error_code == ErrorCode.ERROR


def test_qp_event_max_iter(active_trace):
    problem = QpProblem(np.eye(2), [1.0, -1.0], np.eye(2), [0.1, 0.1])
    solve_qp(problem, settings=QpSettings(max_iter=1, polish=False))

    metadata = _events(active_trace, 'qp')[0].resource['metadata']
    assert metadata['status'] == 'MaxIter'
    assert metadata['iterations'] == 1
