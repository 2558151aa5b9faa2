import numpy as np
from polyflow.lifting import linearized_model
from polyflow.mpc import GridSpec, design_mpc, run_closed_loop, \
    scan_feasible_domain


def _spec(system, constraints):
    model = linearized_model(system)
    spec, _ = design_mpc(model, constraints, 5, np.eye(2), [[0.1]])
    return spec


def test_closed_loop_event(active_trace, double_integrator, unit_constraints):
    spec = _spec(double_integrator, unit_constraints)
    run_closed_loop(double_integrator, spec, [0.3, 0.0], 5)

    event = [event for event in active_trace.events
             if event.resource['type'] == 'mpc'][0]
    metadata = event.resource['metadata']
    assert event.resource['name'] == 'run_closed_loop'
    assert metadata['steps'] == 5
    assert metadata['terminated'] == 'Completed'
    assert metadata['lost_feasibility_at'] is None
    assert metadata['lq_cost'] > 0


def test_scan_event(active_trace, double_integrator, unit_constraints):
    spec = _spec(double_integrator, unit_constraints)
    grid = GridSpec(((-0.5, 0.5, 3), (-0.5, 0.5, 3)))
    scan_feasible_domain(spec, grid, jobs=2)

    event = [event for event in active_trace.events
             if event.resource['name'] == 'scan_feasible_domain'][0]
    metadata = event.resource['metadata']
    assert metadata['model'] == 'jacobian'
    assert metadata['cells'] == 9
    assert 0 <= metadata['feasible_cells'] <= 9
