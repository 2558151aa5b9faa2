"""
Experiment configuration: a flat JSON document with defaults.
"""

from __future__ import absolute_import
import copy
import json
import numpy as np
from .common import ConfigError, InputError
from .constants import (
    DEFAULT_GRID_RESOLUTION,
    DEFAULT_JOBS,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_RANK_TOL,
    DEFAULT_FD_STEP,
    DEFAULT_RUN_STEPS,
    INVARIANT_SET_MAX_STEPS,
    SCHEMA_VERSION,
)
from .dynamics import ConstraintSpec, SYSTEMS, build_system
from .utils import config_hash

METHODS = ('polyflow', 'edmd_polyflow', 'monomial', 'rbf', 'jacobian')

DEFAULTS = {
    'schema_version': SCHEMA_VERSION,
    'system': 'pest',
    'system_parameters': {},
    'method': 'polyflow',
    'degree': 5,
    'monomial_degree': 6,
    'rbf_count': 25,
    'rbf_include_state': True,
    'rbf_attempts': 20,
    'samples': 100000,
    'test_samples': 10000,
    'seed': 7,
    'rank_tol': DEFAULT_RANK_TOL,
    'fd_step': DEFAULT_FD_STEP,
    'horizon': 10,
    'Q': [[1.0, 0.0], [0.0, 1.0]],
    'R': [[0.1]],
    'state_lower': [-0.5, -0.2],
    'state_upper': [0.5, 0.8],
    'input_lower': [-0.2],
    'input_upper': [0.2],
    'invariant_set_max_steps': INVARIANT_SET_MAX_STEPS,
    'grid_resolution': DEFAULT_GRID_RESOLUTION,
    'steps': DEFAULT_RUN_STEPS,
    'initial_states': [[0.1488, -0.1319]],
    'compare_methods': ['polyflow', 'edmd_polyflow', 'monomial', 'rbf'],
    'output_dir': DEFAULT_OUTPUT_DIR,
    'jobs': DEFAULT_JOBS,
}

RUNTIME_KEYS = ('output_dir', 'jobs')

POSITIVE_INTEGERS = (
    'monomial_degree',
    'rbf_count',
    'rbf_attempts',
    'samples',
    'test_samples',
    'horizon',
    'invariant_set_max_steps',
    'grid_resolution',
    'steps',
    'jobs',
)


class ExperimentConfig(object):
    """
    Fully determines a run together with its seed.
    Unknown keys are rejected.
    """

    def __init__(self, **fields):
        unknown = sorted(set(fields) - set(DEFAULTS))
        if unknown:
            raise ConfigError('unknown configuration keys: {}'.format(
                ', '.join(unknown)
            ))
        document = copy.deepcopy(DEFAULTS)
        document.update(copy.deepcopy(fields))
        self._document = document
        self.validate()

    def __getattr__(self, name):
        document = self.__dict__.get('_document')
        if document is not None and name in document:
            return document[name]
        raise AttributeError(name)

    def validate(self):
        document = self._document
        if document['schema_version'] != SCHEMA_VERSION:
            raise ConfigError('unsupported schema version {!r}'.format(
                document['schema_version']
            ))
        if document['system'] not in SYSTEMS:
            raise ConfigError('unknown system {!r}'.format(document['system']))
        for method in [document['method']] + list(
                document['compare_methods']):
            if method not in METHODS:
                raise ConfigError('unknown method {!r}, expected one of {}'
                                  .format(method, ', '.join(METHODS)))
        for name in POSITIVE_INTEGERS:
            value = document[name]
            if isinstance(value, bool) or not isinstance(value, int) or \
                    value < 1:
                raise ConfigError('{} must be a positive integer'.format(name))
        if isinstance(document['degree'], bool) or not isinstance(
                document['degree'], int) or document['degree'] < 0:
            raise ConfigError('degree must be a non-negative integer')
        if not isinstance(document['seed'], int) or isinstance(
                document['seed'], bool):
            raise ConfigError('seed must be an integer')
        for name in ('rank_tol', 'fd_step'):
            if not float(document[name]) > 0:
                raise ConfigError('{} must be positive'.format(name))
        try:
            system = self.build_system()
            constraints = self.constraints()
        except InputError as exception:
            raise ConfigError(str(exception))
        if constraints.n != system.n or constraints.m != system.m:
            raise ConfigError('constraint boxes do not match the system '
                              'dimensions')
        for name, size in (('Q', system.n), ('R', system.m)):
            matrix = np.asarray(document[name], dtype=float)
            if matrix.shape != (size, size):
                raise ConfigError('{} must be {}x{}'.format(name, size, size))
        for state in document['initial_states']:
            if len(state) != system.n:
                raise ConfigError('initial states must have {} entries'
                                  .format(system.n))

    def build_system(self):
        return build_system(self.system, self.system_parameters)

    def constraints(self):
        return ConstraintSpec.box(
            self.state_lower, self.state_upper,
            self.input_lower, self.input_upper,
        )

    def weights(self):
        return (np.asarray(self.Q, dtype=float),
                np.asarray(self.R, dtype=float))

    def with_overrides(self, **overrides):
        """
        Copy with the non-None overrides applied.
        """
        document = self.to_dict()
        document.update({
            key: value for key, value in overrides.items() if value is not None
        })
        return ExperimentConfig.load_from_dict(document)

    def to_dict(self):
        return copy.deepcopy(self._document)

    @staticmethod
    def load_from_dict(config_data):
        if not isinstance(config_data, dict):
            raise ConfigError('configuration must be a JSON object')
        return ExperimentConfig(**config_data)

    @staticmethod
    def load(path):
        try:
            with open(path) as config_file:
                config_data = json.load(config_file)
        except (IOError, OSError) as exception:
            raise ConfigError('cannot read {}: {}'.format(path, exception))
        except ValueError as exception:
            raise ConfigError('{} is not valid JSON: {}'.format(
                path, exception
            ))
        return ExperimentConfig.load_from_dict(config_data)

    def dump(self, path):
        with open(path, 'w') as config_file:
            json.dump(self._document, config_file, indent=2, sort_keys=True)

    @property
    def hash(self):
        """
        Hash of the settings that affect results.
        """
        return config_hash({
            key: value for key, value in self._document.items()
            if key not in RUNTIME_KEYS
        })

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and \
            self._document == other._document

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'ExperimentConfig(system={!r}, method={!r}, seed={})'.format(
            self.system, self.method, self.seed
        )
