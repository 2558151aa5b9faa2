import mock
import numpy as np
import pytest
import polyflow.experiment
from polyflow.common import InvariantSetError, NonConvergenceError
from polyflow.config import ExperimentConfig
from polyflow.experiment import (
    ERROR,
    compare_methods,
    design_controller,
    fit_model,
    fit_pipeline,
)
from polyflow.mpc import COMPLETED, run_closed_loop
from .conftest import immersible_config, linear_config

EXPECTED_DIMENSIONS = {
    'polyflow': 2,
    'edmd_polyflow': 2,
    'monomial': 5,
    'rbf': 6,
    'jacobian': 2,
}


@pytest.mark.parametrize('method', sorted(EXPECTED_DIMENSIONS))
def test_fit_model_on_linear_system(method):
    config = linear_config()
    model, fit = fit_model(config, method)
    assert model.dim == EXPECTED_DIMENSIONS[method]
    assert model.tag == method
    assert model.metadata['seed'] == config.seed
    assert model.residual.rms <= 1e-8
    assert (fit is not None) == (method == 'polyflow')


def test_rbf_centers_follow_the_seed():
    config = linear_config()
    first, _ = fit_model(config, 'rbf', seed=1)
    second, _ = fit_model(config, 'rbf', seed=2)
    assert first.metadata['seed'] == 1
    assert not np.allclose(first.A, second.A)


def test_fit_model_reduces_immersible_polyflow():
    model, fit = fit_model(immersible_config(), 'polyflow')
    assert fit.rank == 3
    assert model.dim == 3
    assert model.metadata['reduced_from'] == 4


def test_design_controller():
    config = linear_config()
    model, _ = fit_model(config, 'jacobian')
    spec, dare, invariant_set, error = design_controller(config, model)
    assert error is None
    assert invariant_set is not None
    assert spec.terminal_set is invariant_set
    assert spec.horizon == config.horizon
    assert np.array_equal(spec.P, dare.P)


def test_design_controller_reports_invariant_set_failure():
    config = linear_config()
    model, _ = fit_model(config, 'jacobian')
    with mock.patch('polyflow.experiment.max_invariant_set',
                    side_effect=InvariantSetError('not determined')):
        spec, _, invariant_set, error = design_controller(config, model)
    assert invariant_set is None
    assert spec.terminal_set is None
    assert error == 'not determined'


def test_fit_pipeline_diagnostics():
    outcome = fit_pipeline(linear_config())
    diagnostics = outcome.diagnostics
    assert outcome.model.tag == 'polyflow'
    assert diagnostics['dim'] == 2
    assert diagnostics['k'] == 0
    assert diagnostics['rank'] == 2
    assert diagnostics['nilpotency_rms'] <= 1e-10
    assert diagnostics['affine_rms'] <= 1e-8
    assert diagnostics['spectral_radius'] < 1.0
    assert diagnostics['determinedness'] >= 0
    assert diagnostics['terminal_constraints'] == \
        outcome.invariant_set.polytope.size
    assert outcome.terminal_set_error is None


def test_fit_pipeline_on_pest():
    config = ExperimentConfig(samples=2000, test_samples=500,
                              grid_resolution=11)
    outcome = fit_pipeline(config)
    assert outcome.model.dim == 12
    assert outcome.diagnostics['k'] == 5
    assert outcome.terminal_set_error is None
    assert isinstance(outcome.diagnostics['determinedness'], int)
    assert outcome.diagnostics['determinedness'] >= 0
    assert outcome.diagnostics['dare_residual'] <= 1e-7

    run = run_closed_loop(config.build_system(), outcome.spec,
                          config.initial_states[0], config.steps)
    assert run.terminated == COMPLETED
    assert run.states.shape == (config.steps + 1, 2)
    assert config.constraints().state_set.contains(run.states,
                                                   tol=1e-6).all()


def test_fit_pipeline_records_lp_failure():
    failure = NonConvergenceError('LP oracle did not converge')
    with mock.patch('polyflow.lincontrol.lp_max', side_effect=failure):
        outcome = fit_pipeline(linear_config())
    assert outcome.invariant_set is None
    assert outcome.spec.terminal_set is None
    assert 'did not converge' in outcome.terminal_set_error


def test_fit_pipeline_without_polyflow_fit():
    outcome = fit_pipeline(linear_config(), method='monomial')
    assert outcome.fit is None
    assert 'nilpotency_rms' not in outcome.diagnostics
    assert outcome.diagnostics['method'] == 'monomial'


def test_compare_methods_keeps_order():
    config = linear_config(initial_states=[[0.5, -0.2], [0.1, 0.1]])
    rows = compare_methods(config, jobs=2)
    assert [(row.method, row.x0_index) for row in rows] == [
        ('polyflow', 0), ('polyflow', 1), ('jacobian', 0), ('jacobian', 1),
    ]
    assert all(row.terminated == COMPLETED for row in rows)
    assert all(row.error is None for row in rows)
    assert rows[0].lq_cost > rows[1].lq_cost


def test_compare_methods_reports_failures():
    config = linear_config(compare_methods=['rbf'])
    with mock.patch('polyflow.experiment.design_controller',
                    return_value=(None, None, None, 'no set')):
        rows = compare_methods(config)
    assert len(rows) == 1
    assert rows[0].terminated == ERROR
    assert rows[0].seed == config.seed
    assert rows[0].error == 'no set'
    assert rows[0].lq_cost is None


def test_compare_methods_retries_rbf_seeds():
    config = linear_config(compare_methods=['rbf'])
    design = polyflow.experiment.design_controller

    def _first_seed_fails(config_, model):
        if model.metadata['seed'] == config.seed:
            return None, None, None, 'no set'
        return design(config_, model)

    with mock.patch('polyflow.experiment.design_controller',
                    side_effect=_first_seed_fails):
        rows = compare_methods(config)
    assert rows[0].terminated == COMPLETED
    assert rows[0].seed == config.seed + 1
