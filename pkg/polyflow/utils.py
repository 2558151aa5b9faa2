"""
Utilities for polyflow module.
"""

from __future__ import absolute_import, print_function
import os
import sys
import json
import hashlib
import traceback
import numpy as np
from .common import InputError
from .constants import DEBUG_MODE


def print_debug(log):
    if DEBUG_MODE:
        print('[POLYFLOW_DEBUG]: {}'.format(log))


def create_transport(output_dir=None):
    """
    Transport selected by the environment: log transport if
    POLYFLOW_LOG_TRANSPORT is TRUE, file transport when an output directory
    is given, otherwise traces are dropped.
    :param output_dir: directory for trace files
    :return: transport
    """
    # pylint: disable=import-outside-toplevel
    from .trace_transports import NoneTransport, LogTransport, FileTransport
    if (os.getenv('POLYFLOW_LOG_TRANSPORT') or '').upper() == 'TRUE':
        return LogTransport()
    if output_dir:
        return FileTransport(output_dir)
    return NoneTransport()


def init(
    app_name='polyflow',
    output_dir=None,
    transport=None,
    debug=False,
):
    """
    Initializes the run record.
    :param app_name: application name
    :param output_dir: directory receiving trace files
    :param transport: explicit transport, overrides output_dir
    :param debug: debug mode flag
    :return: None
    """
    # pylint: disable=import-outside-toplevel
    from .trace import trace_factory

    if transport is None:
        transport = create_transport(
            os.getenv('POLYFLOW_OUTPUT_DIR') or output_dir
        )

    trace_factory.initialize(
        app_name=os.getenv('POLYFLOW_APP_NAME') or app_name,
        transport=transport,
        debug=((os.getenv('POLYFLOW_DEBUG') or '')
               .upper() == 'TRUE') | debug,
    )
    if (os.getenv('POLYFLOW_DISABLE_TRACE') or '').upper() == 'TRUE':
        trace_factory.disable()


def as_vector(value, size, name='vector'):
    """
    Converts to a 1-D float array of the given length.
    :param value: array-like or scalar
    :param size: expected length
    :param name: argument name used in the error message
    :return: numpy array
    """
    vector = np.atleast_1d(np.asarray(value, dtype=float))
    if vector.ndim != 1 or vector.shape[0] != size:
        raise InputError('{} must have shape ({},), got {}'.format(
            name, size, vector.shape
        ))
    return vector


def as_matrix(value, rows, cols, name='matrix'):
    """
    Converts to a 2-D float array with the given shape.
    Scalars are accepted for 1x1 matrices.
    :param value: array-like
    :param rows: expected rows
    :param cols: expected columns
    :param name: argument name used in the error message
    :return: numpy array
    """
    matrix = np.asarray(value, dtype=float)
    if matrix.ndim == 0 and rows == 1 and cols == 1:
        matrix = matrix.reshape(1, 1)
    if matrix.shape != (rows, cols):
        raise InputError('{} must have shape ({}, {}), got {}'.format(
            name, rows, cols, matrix.shape
        ))
    return matrix


def check_finite(array, name='array'):
    """
    Raises InputError on NaN or infinite entries.
    :param array: numpy array
    :param name: argument name used in the error message
    :return: the array
    """
    if not np.all(np.isfinite(array)):
        raise InputError('{} contains NaN or infinite values'.format(name))
    return array


def frozen(array):
    """
    Read-only float copy of an array.
    :param array: array-like
    :return: numpy array with the write flag off
    """
    copy = np.array(array, dtype=float)
    copy.setflags(write=False)
    return copy


def config_hash(document):
    """
    Stable hash of a JSON-serializable document.
    :param document: dict
    :return: hex digest
    """
    canonical = json.dumps(document, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def format_number(value, precision):
    """
    Formats a number with a fixed count of significant digits.
    :param value: number
    :param precision: significant digits
    :return: string
    """
    return '{:.{}g}'.format(float(value), precision)


def get_traceback_data_from_exception(exception):
    """
    Get traceback data from exception
    :param exception: the Exception
    :return: traceback data
    """
    if sys.version_info.major == 3:
        return ''.join(traceback.format_exception(
            type(exception),
            exception,
            exception.__traceback__,
        ))
    return ''
