"""
polyflow's init.
"""

from __future__ import absolute_import
import os
from .utils import init, print_debug
from .constants import __version__
from .trace import trace_factory
from .wrappers import command_wrapper, measure
from .dynamics import (
    ConstraintSpec,
    DiscreteSystem,
    ImmersibleBlockSystem,
    LinearSystem,
    PestModel,
    build_system,
)
from .lifting import (
    LiftedModel,
    assemble_polyflow_model,
    fit_edmd,
    fit_polyflow,
    generate_samples,
    reduce_model,
    remove_redundancy,
)
from .lincontrol import Polytope, max_invariant_set, solve_dare
from .qp import QpProblem, QpSettings, solve_qp
from .mpc import design_mpc, mpc_step, run_closed_loop, scan_feasible_domain


# pylint: disable=C0103
label = trace_factory.add_label
error = trace_factory.set_error
disable = trace_factory.disable
enable = trace_factory.enable


__all__ = [
    'init',
    'measure',
    'command_wrapper',
    'label',
    'error',
    'disable',
    'enable',
    'ConstraintSpec',
    'DiscreteSystem',
    'ImmersibleBlockSystem',
    'LinearSystem',
    'PestModel',
    'build_system',
    'LiftedModel',
    'assemble_polyflow_model',
    'fit_edmd',
    'fit_polyflow',
    'generate_samples',
    'reduce_model',
    'remove_redundancy',
    'Polytope',
    'max_invariant_set',
    'solve_dare',
    'QpProblem',
    'QpSettings',
    'solve_qp',
    'design_mpc',
    'mpc_step',
    'run_closed_loop',
    'scan_feasible_domain',
]


if (os.getenv('POLYFLOW_DISABLE_TRACE') or '').upper() == 'TRUE':
    print_debug('run record disabled by POLYFLOW_DISABLE_TRACE')
    trace_factory.disable()
