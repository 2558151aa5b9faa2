"""
Command line: polyflow {fit,run,domain,compare}.
"""

from __future__ import absolute_import, print_function
import os
import sys
import logging
import argparse
import numpy as np
from .artifacts import (
    load_model_artifact,
    write_comparison_csv,
    write_domain_svg,
    write_mask_csv,
    write_model_artifact,
    write_run_csv,
    write_sidecar,
)
from .common import (
    ConfigError,
    ExitCode,
    InputError,
    InvariantSetError,
    PolyflowError,
)
from .config import ExperimentConfig
from .constants import __version__
from .experiment import compare_methods, fit_pipeline
from .mpc import FeasibleDomainScan, GridSpec, MpcSpec, run_closed_loop, \
    scan_feasible_domain
from .utils import format_number, init
from .wrappers import command_wrapper

LOGGER = logging.getLogger('polyflow')


class ArgumentParser(argparse.ArgumentParser):
    """
    Usage errors exit with ExitCode.USAGE.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ExitCode.USAGE, '{}: error: {}\n'.format(self.prog,
                                                            message))


def _number(value):
    return format_number(value, 6)


def _state(text):
    try:
        return [float(value) for value in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(
            'expected comma separated numbers, got {!r}'.format(text)
        )


def _default_model_path(config):
    return os.path.join(config.output_dir,
                        'model-{}.json'.format(config.method))


def _spec_of(config, artifact):
    Q, R = config.weights()
    return MpcSpec(artifact.model, config.horizon, Q, R, artifact.dare.P,
                   artifact.invariant_set, config.constraints())


def _load_artifact(config, path):
    artifact = load_model_artifact(path)
    if artifact.config_hash != config.hash:
        LOGGER.warning('%s was fitted with another configuration', path)
    return artifact


@command_wrapper(name='fit')
def cmd_fit(arguments, config):
    """
    Fits the configured method and writes the model artifact.
    """
    outcome = fit_pipeline(config)
    path = arguments.model or _default_model_path(config)
    write_model_artifact(
        path,
        outcome.model,
        outcome.dare,
        outcome.invariant_set,
        config.hash,
        config.seed,
        diagnostics=outcome.diagnostics,
        terminal_set_error=outcome.terminal_set_error,
    )
    diagnostics = outcome.diagnostics
    print('model: {} written to {}'.format(outcome.model.tag, path))
    print('lifted dimension: {}'.format(outcome.model.dim))
    print('residual rms: {} max: {}'.format(
        _number(diagnostics['residual_rms']),
        _number(diagnostics['residual_max']),
    ))
    if 'nilpotency_rms' in diagnostics:
        print('nilpotency residual rms: {} max: {}'.format(
            _number(diagnostics['nilpotency_rms']),
            _number(diagnostics['nilpotency_max']),
        ))
    print('spectral radius of A+BK: {}'.format(
        _number(diagnostics['spectral_radius'])
    ))
    if outcome.terminal_set_error is not None:
        print('invariant set failed: {}'.format(outcome.terminal_set_error),
              file=sys.stderr)
        return ExitCode.NUMERICAL
    print('determinedness index: {}'.format(diagnostics['determinedness']))
    return ExitCode.OK


@command_wrapper(name='run')
def cmd_run(arguments, config):
    """
    Closed-loop runs of a fitted model from the configured initial states.
    """
    path = (arguments.model or [_default_model_path(config)])[0]
    artifact = _load_artifact(config, path)
    if artifact.invariant_set is None:
        raise InvariantSetError('{} has no terminal set: {}'.format(
            path, artifact.terminal_set_error
        ))
    spec = _spec_of(config, artifact)
    plant = config.build_system()
    initial_states = [arguments.x0] if arguments.x0 else \
        config.initial_states
    tag = artifact.model.tag
    for index, x0 in enumerate(initial_states):
        run = run_closed_loop(plant, spec, np.asarray(x0, dtype=float),
                              config.steps)
        csv_path = os.path.join(config.output_dir,
                                'run-{}-{}.csv'.format(tag, index))
        write_run_csv(csv_path, run)
        write_sidecar(csv_path, config.hash, config.seed, tag, extra={
            'x0': list(x0),
            'terminated': run.terminated,
            'lost_feasibility_at': run.lost_feasibility_at,
            'lq_cost': run.lq_cost,
        })
        summary = 'run {}: {} lq_cost={} steps={}'.format(
            index, run.terminated, _number(run.lq_cost), len(run.inputs)
        )
        if run.lost_feasibility_at is not None:
            summary += ' lost_feasibility_at={}'.format(
                run.lost_feasibility_at
            )
        print(summary)
    return ExitCode.OK


def _unique_tags(artifacts):
    tags = []
    for artifact in artifacts:
        tag = artifact.model.tag
        if tag in tags:
            tag = '{}-{}'.format(tag, len(tags))
        tags.append(tag)
    return tags


@command_wrapper(name='domain')
def cmd_domain(arguments, config):
    """
    Feasible-domain masks of one or more fitted models on the state grid.
    """
    if config.build_system().n != 2:
        raise InputError('domain scans need a two-dimensional system')
    paths = arguments.model or [_default_model_path(config)]
    artifacts = [_load_artifact(config, path) for path in paths]
    grid = GridSpec.from_polytope(config.constraints().state_set,
                                  config.grid_resolution)
    scans = []
    for artifact, tag in zip(artifacts, _unique_tags(artifacts)):
        if artifact.invariant_set is None:
            scan = FeasibleDomainScan(grid, np.zeros(grid.shape, dtype=bool),
                                      tag)
        else:
            scan = scan_feasible_domain(_spec_of(config, artifact), grid,
                                        jobs=config.jobs)
            scan = scan._replace(model_tag=tag)
        csv_path = os.path.join(config.output_dir,
                                'domain-{}.csv'.format(tag))
        write_mask_csv(csv_path, scan)
        write_sidecar(csv_path, config.hash, config.seed, tag, extra={
            'feasible_cells': int(np.sum(scan.mask)),
        })
        print('{}: {} feasible cells of {}'.format(
            tag, int(np.sum(scan.mask)), scan.mask.size
        ))
        scans.append(scan)
    svg_path = os.path.join(config.output_dir, 'domain.svg')
    write_domain_svg(svg_path, scans)
    print('overlay written to {}'.format(svg_path))
    return ExitCode.OK


@command_wrapper(name='compare')
def cmd_compare(_, config):
    """
    Closed-loop comparison of the configured methods.
    """
    rows = compare_methods(config, jobs=config.jobs)
    csv_path = os.path.join(config.output_dir, 'comparison.csv')
    write_comparison_csv(csv_path, rows)
    write_sidecar(csv_path, config.hash, config.seed)
    print('{:<15} {:>3} {:>4} {:<16} {:>14}'.format(
        'method', 'x0', 'dim', 'terminated', 'lq_cost'
    ))
    for row in rows:
        terminated = row.terminated
        if row.lost_feasibility_at is not None:
            terminated = '{}({})'.format(terminated, row.lost_feasibility_at)
        print('{:<15} {:>3} {:>4} {:<16} {:>14}'.format(
            row.method,
            row.x0_index,
            '-' if row.dim is None else row.dim,
            terminated,
            '-' if row.lq_cost is None else _number(row.lq_cost),
        ))
        if row.error:
            print('    {}'.format(row.error))
    return ExitCode.OK


def build_parser():
    parser = ArgumentParser(
        prog='polyflow',
        description='Lifted linear MPC of nonlinear systems.',
    )
    parser.add_argument('--version', action='version',
                        version='%(prog)s {}'.format(__version__))
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='experiment configuration (JSON)')
    common.add_argument('--out', help='output directory')
    common.add_argument('--seed', type=int, help='sampling seed')
    common.add_argument('--jobs', type=int, help='worker threads')
    common.add_argument('--debug', action='store_true',
                        help='print debug messages')

    verbs = parser.add_subparsers(dest='verb', metavar='verb')
    verbs.required = True

    fit = verbs.add_parser('fit', parents=[common],
                           help='fit a lifted model and its terminal set')
    fit.add_argument('--model', help='artifact to write')
    fit.set_defaults(command=cmd_fit)

    run = verbs.add_parser('run', parents=[common],
                           help='closed-loop runs of a fitted model')
    run.add_argument('--model', action='append', help='model artifact')
    run.add_argument('--x0', type=_state,
                     help='initial state, e.g. --x0=0.1488,-0.1319')
    run.add_argument('--steps', type=int, help='run length')
    run.set_defaults(command=cmd_run)

    domain = verbs.add_parser('domain', parents=[common],
                              help='feasible-domain masks and overlay')
    domain.add_argument('--model', action='append',
                        help='model artifact, repeatable')
    domain.set_defaults(command=cmd_domain)

    compare = verbs.add_parser('compare', parents=[common],
                               help='compare lifting methods in closed loop')
    compare.set_defaults(command=cmd_compare)
    return parser


def _config_of(arguments):
    config = ExperimentConfig.load(arguments.config) if arguments.config \
        else ExperimentConfig()
    return config.with_overrides(
        seed=arguments.seed,
        output_dir=arguments.out,
        jobs=arguments.jobs,
        steps=getattr(arguments, 'steps', None),
    )


def main(argv=None):
    arguments = build_parser().parse_args(argv)
    try:
        config = _config_of(arguments)
        x0 = getattr(arguments, 'x0', None)
        if x0 is not None and len(x0) != config.build_system().n:
            raise InputError('--x0 must have {} entries'.format(
                config.build_system().n
            ))
        init(output_dir=config.output_dir, debug=arguments.debug)
        return arguments.command(arguments, config)
    except (ConfigError, InputError) as exception:
        print('polyflow: error: {}'.format(exception), file=sys.stderr)
        return ExitCode.USAGE
    except PolyflowError as exception:
        print('polyflow: {}: {}'.format(type(exception).__name__, exception),
              file=sys.stderr)
        return ExitCode.NUMERICAL


if __name__ == '__main__':
    sys.exit(main())
