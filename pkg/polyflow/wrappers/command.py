"""
Wrapper for a command line verb
"""

from __future__ import absolute_import
import time
import traceback
import functools
from ..trace import trace_factory
from ..runners.command import CommandRunner


def _arguments_of(args):
    """
    Plain dict of an argparse namespace, when the first argument is one.
    """
    if args and hasattr(args[0], '__dict__'):
        return {
            key: value for key, value in vars(args[0]).items()
            if not callable(value)
        }
    return {}


def wrap_command(func, args, kwargs, name=None):
    """
    Runs a command under a runner event and sends the trace at the end.
    :param func: the command function.
    :param args: positional arguments, the first one an argparse namespace.
    :param kwargs: keyword arguments.
    :param name: resource name for the runner.
    :return: the command's result (an exit code).
    """
    try:
        runner = CommandRunner(
            time.time(),
            func,
            _arguments_of(args),
            name=name
        )
        trace_factory.set_runner(runner)
    # pylint: disable=W0703
    except Exception:
        return func(*args, **kwargs)

    result = None
    try:
        result = func(*args, **kwargs)
        return result
    # pylint: disable=W0703
    except Exception as exception:
        runner.set_exception(exception, traceback.format_exc(), handled=False)
        raise
    finally:
        try:
            if isinstance(result, int):
                runner.set_exit_code(result)
        # pylint: disable=W0703
        except Exception as exception:
            trace_factory.add_exception(exception, traceback.format_exc())
        try:
            trace_factory.send_traces()
        # pylint: disable=W0703
        except Exception:
            pass


def command_wrapper(*args, **kwargs):
    """
    Records a run record for every call of a command.

    Options for using:
    -   @command_wrapper(name='fit')
        def cmd_fit(arguments):
            ...

    -   @command_wrapper
        def cmd_fit(arguments):
            ...
    """
    name = kwargs.get('name')

    def _inner_wrapper(func):

        @functools.wraps(func)
        def _command_wrapper(*args, **kwargs):
            trace_factory.get_or_create_trace().prepare()
            return wrap_command(func, args, kwargs, name=name)

        return _command_wrapper

    if len(args) == 1 and callable(args[0]):
        return _inner_wrapper(args[0])

    return _inner_wrapper
