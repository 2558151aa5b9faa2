"""
A helper wrapper labelling the duration of internal functions
"""

from __future__ import absolute_import
import time
import functools
from ..trace import trace_factory


def measure(func):
    """A decorator adding a `<function>_duration` label in seconds."""

    @functools.wraps(func)
    def _measure(*args, **kwargs):
        start_time = time.time()
        try:
            return func(*args, **kwargs)
        finally:
            trace_factory.add_label(
                '{}_duration'.format(func.__name__),
                float('{:.3f}'.format(time.time() - start_time))
            )
    return _measure
