"""
Wrappers module.
"""
from __future__ import absolute_import

from .command import command_wrapper
from .custom import measure

__all__ = [
    'command_wrapper',
    'measure',
]
