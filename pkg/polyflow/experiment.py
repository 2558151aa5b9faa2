"""
Offline pipeline of an experiment: sampling, fit of a lifted model, LQR
terminal ingredients, invariant set and the method comparison.
"""

from __future__ import absolute_import
import logging
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
import numpy as np
from .common import InvariantSetError, PolyflowError
from .lifting import (
    MonomialBasis,
    PolyflowBasis,
    ThinPlateRbfBasis,
    assemble_polyflow_model,
    fit_edmd,
    fit_polyflow,
    generate_samples,
    linearized_model,
    nilpotency_residual,
    random_centers,
    reduce_model,
)
from .lincontrol import design_lqr, max_invariant_set, spectral_radius
from .mpc import COMPLETED, MpcSpec, run_closed_loop
from .utils import print_debug
from .wrappers import measure

LOGGER = logging.getLogger('polyflow')

ERROR = 'Error'

FitOutcome = namedtuple('FitOutcome', [
    'model',
    'fit',
    'spec',
    'dare',
    'invariant_set',
    'terminal_set_error',
    'diagnostics',
])

ComparisonRow = namedtuple('ComparisonRow', [
    'method',
    'x0_index',
    'dim',
    'terminated',
    'lost_feasibility_at',
    'lq_cost',
    'seed',
    'error',
])


def _tagged(model, method, seed):
    model.metadata.update({'tag': method, 'seed': seed})
    return model


def _reduce_if_deficient(model, samples, tol):
    if model.metadata.get('rank', model.dim) >= model.dim + (
            0 if model.metadata.get('family') == 'polyflow' else model.m):
        return model
    LOGGER.info('reducing rank-deficient %s model of dimension %d',
                model.tag, model.dim)
    return reduce_model(model, model.lift(samples.points), tol)


def fit_model(config, method, snapshots=None, seed=None):
    """
    Fits the lifted model of one method.
    :param config: ExperimentConfig
    :param method: one of config.METHODS
    :param snapshots: shared SampleSet with inputs, drawn when None
    :param seed: overrides config.seed (RBF center draws)
    :return: (LiftedModel, PolyflowFit or None)
    """
    system = config.build_system()
    constraints = config.constraints()
    seed = config.seed if seed is None else seed
    if method == 'jacobian':
        return _tagged(linearized_model(system, h=config.fd_step), method,
                       seed), None

    if snapshots is None:
        snapshots = generate_samples(system, constraints, config.samples,
                                     config.seed,
                                     with_inputs=method != 'polyflow')

    if method == 'polyflow':
        fit = fit_polyflow(system, snapshots, config.degree,
                           rank_tol=config.rank_tol, h=config.fd_step)
        model = assemble_polyflow_model(system, fit)
        model = _reduce_if_deficient(model, snapshots, config.rank_tol)
        return _tagged(model, method, seed), fit

    if method == 'edmd_polyflow':
        basis = PolyflowBasis(system, config.degree)
    elif method == 'monomial':
        basis = MonomialBasis(system.n, config.monomial_degree)
    else:
        basis = ThinPlateRbfBasis(
            random_centers(constraints.state_set, config.rbf_count, seed),
            include_state=config.rbf_include_state,
        )
    model = fit_edmd(basis, system, snapshots, rank_tol=config.rank_tol)
    if basis.contains_state:
        model = _reduce_if_deficient(model, snapshots, config.rank_tol)
    return _tagged(model, method, seed), None


def design_controller(config, model):
    """
    DARE, LQR gain and maximal invariant set of a lifted model. A failing
    invariant set leaves the MPC without terminal constraint and is
    reported instead of raised.
    :return: (MpcSpec, DareSolution, InvariantSet or None, error message)
    """
    constraints = config.constraints()
    Q, R = config.weights()
    dare = design_lqr(model, Q, R)
    invariant_set = None
    error = None
    try:
        invariant_set = max_invariant_set(
            model.A, model.B, dare.K, model.C,
            constraints.state_set, constraints.input_set,
            k_max=config.invariant_set_max_steps,
        )
    except InvariantSetError as exception:
        error = str(exception)
        LOGGER.warning('invariant set of the %s model failed: %s',
                       model.tag, error)
    spec = MpcSpec(model, config.horizon, Q, R, dare.P, invariant_set,
                   constraints)
    return spec, dare, invariant_set, error


def diagnostics_of(config, model, fit, dare, invariant_set):
    """
    Summary numbers printed by the fit command and stored in the artifact.
    """
    closed_loop = model.A + model.B.dot(np.asarray(dare.K))
    diagnostics = {
        'method': model.tag,
        'dim': model.dim,
        'rank': model.metadata.get('rank'),
        'residual_rms': model.residual.rms,
        'residual_max': model.residual.max,
        'spectral_radius': spectral_radius(closed_loop),
        'dare_iterations': dare.iterations,
        'dare_residual': dare.residual,
        'determinedness': None if invariant_set is None
        else invariant_set.determinedness,
        'terminal_constraints': None if invariant_set is None
        else invariant_set.polytope.size,
    }
    if fit is not None:
        test_points = generate_samples(
            config.build_system(), config.constraints(),
            config.test_samples, config.seed + 1, with_inputs=True,
        )
        report = nilpotency_residual(config.build_system(), fit, test_points)
        diagnostics.update({
            'k': fit.k,
            'nilpotency_rms': report.rms,
            'nilpotency_max': report.max,
            'affine_rms': report.affine_rms,
            'affine_max': report.affine_max,
        })
    return diagnostics


@measure
def fit_pipeline(config, method=None):
    """
    Sampling, fit, DARE and invariant set of the configured method.
    :return: FitOutcome
    """
    method = method or config.method
    model, fit = fit_model(config, method)
    spec, dare, invariant_set, error = design_controller(config, model)
    diagnostics = diagnostics_of(config, model, fit, dare, invariant_set)
    print_debug('fit diagnostics: {}'.format(diagnostics))
    return FitOutcome(model, fit, spec, dare, invariant_set, error,
                      diagnostics)


def _runs(config, spec):
    plant = config.build_system()
    return [
        run_closed_loop(plant, spec, np.asarray(x0, dtype=float),
                        config.steps)
        for x0 in config.initial_states
    ]


def _rows(method, model, runs, seed):
    return [
        ComparisonRow(
            method=method,
            x0_index=index,
            dim=model.dim,
            terminated=run.terminated,
            lost_feasibility_at=run.lost_feasibility_at,
            lq_cost=run.lq_cost,
            seed=seed,
            error=None,
        )
        for index, run in enumerate(runs)
    ]


def _failed_rows(config, method, seed, exception):
    LOGGER.warning('%s failed: %s', method, exception)
    return [
        ComparisonRow(method, index, None, ERROR, None, None, seed,
                      str(exception))
        for index in range(len(config.initial_states))
    ]


def _compare_one(config, method, snapshots):
    seeds = [config.seed]
    if method == 'rbf':
        seeds = [config.seed + attempt
                 for attempt in range(config.rbf_attempts)]
    first = None
    for seed in seeds:
        try:
            model, _ = fit_model(config, method, snapshots, seed=seed)
            spec, _, _, error = design_controller(config, model)
            if error is not None:
                raise InvariantSetError(error)
            rows = _rows(method, model, _runs(config, spec), seed)
        except PolyflowError as exception:
            rows = _failed_rows(config, method, seed, exception)
        if all(row.terminated == COMPLETED for row in rows):
            return rows
        if first is None:
            first = rows
    return first


@measure
def compare_methods(config, jobs=1):
    """
    Closed-loop comparison of the configured methods from shared snapshots
    and identical initial states. Methods run in a thread pool; the rows
    keep the configured order. RBF centers are redrawn with seed + attempt
    until a run completes, the first attempt being reported otherwise.
    :param config: ExperimentConfig
    :param jobs: worker threads
    :return: list of ComparisonRow
    """
    snapshots = generate_samples(config.build_system(), config.constraints(),
                                 config.samples, config.seed,
                                 with_inputs=True)
    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as executor:
        results = list(executor.map(
            lambda method: _compare_one(config, method, snapshots),
            config.compare_methods,
        ))
    return [row for rows in results for row in rows]
