"""
Common and builtin fixtures
"""
import numpy as np
import pytest
from mock import MagicMock

import polyflow
from polyflow.config import ExperimentConfig
from polyflow.dynamics import (
    ConstraintSpec,
    ImmersibleBlockSystem,
    LinearSystem,
    PestModel,
)

TEST_APP = 'test_app'

IMMERSIBLE_PARAMETERS = {
    'A1': [[0.5]],
    'A2': [[0.8]],
    'B1': [[1.0]],
    'phi': [[[2], [1.0]]],
}

DOUBLE_INTEGRATOR = {
    'A': [[1.0, 0.1], [0.0, 1.0]],
    'B': [[0.005], [0.1]],
}


class TestTransport(MagicMock):
    """
    Mock trace transport for tests
    """
    @property
    def last_trace(self):
        """
        :return: The last Trace object that was sent (None if no trace was sent)
        """
        return self.send.call_args[0][0] if self.send.call_args else None

    @property
    def sent_traces(self):
        """
        :return: List of all the Trace objects that were sent
        """
        return [
            call_args[0][0] for call_args in self.send.call_args_list
        ]


@pytest.fixture(scope='function', autouse=False)
def trace_transport(clean_traces):
    """
    Fixture for overriding the trace transport with a `TestTransport` instance
    :return: New `TestTransport` object
    """
    polyflow.trace_factory.transport = TestTransport()
    return polyflow.trace_factory.transport


def init_polyflow(**kwargs):
    """
    Call `polyflow.init` with default test args
    :param kwargs: Optional args to pass
    """
    default_kwargs = {
        'app_name': TEST_APP,
    }
    default_kwargs.update(kwargs)

    polyflow.init(**default_kwargs)


@pytest.fixture(scope='module', autouse=True)
def call_init_polyflow():
    """
    Init polyflow with default test values
    """
    init_polyflow()
    return polyflow


@pytest.fixture(scope='function', autouse=True)
def clean_traces():
    """
    Remove the trace of a previous test (so that it will not affect the
    current test)
    """
    polyflow.trace_factory.singleton_trace = None
    polyflow.trace_factory.disabled = False


@pytest.fixture
def active_trace():
    """
    An active trace, so that instrumented operations record events.
    """
    return polyflow.trace_factory.get_or_create_trace()


@pytest.fixture
def pest():
    return PestModel()


@pytest.fixture
def pest_constraints():
    return ConstraintSpec.box([-0.5, -0.2], [0.5, 0.8], [-0.2], [0.2])


@pytest.fixture
def immersible():
    return ImmersibleBlockSystem(
        IMMERSIBLE_PARAMETERS['A1'],
        IMMERSIBLE_PARAMETERS['A2'],
        IMMERSIBLE_PARAMETERS['B1'],
        [(term[0], term[1]) for term in IMMERSIBLE_PARAMETERS['phi']],
    )


@pytest.fixture
def unit_constraints():
    return ConstraintSpec.box([-1.0, -1.0], [1.0, 1.0], [-1.0], [1.0])


@pytest.fixture
def double_integrator():
    return LinearSystem(DOUBLE_INTEGRATOR['A'], DOUBLE_INTEGRATOR['B'])


@pytest.fixture
def scalar_system():
    return LinearSystem([[1.0]], [[1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def linear_config(**overrides):
    """
    Small and fast experiment on the double integrator.
    """
    fields = {
        'system': 'linear',
        'system_parameters': DOUBLE_INTEGRATOR,
        'degree': 0,
        'monomial_degree': 2,
        'rbf_count': 4,
        'rbf_attempts': 2,
        'samples': 400,
        'test_samples': 100,
        'horizon': 5,
        'R': [[0.1]],
        'state_lower': [-1.0, -1.0],
        'state_upper': [1.0, 1.0],
        'input_lower': [-1.0],
        'input_upper': [1.0],
        'grid_resolution': 5,
        'steps': 15,
        'initial_states': [[0.5, -0.2]],
        'compare_methods': ['polyflow', 'jacobian'],
    }
    fields.update(overrides)
    return ExperimentConfig(**fields)


@pytest.fixture
def small_config(tmpdir):
    return linear_config(output_dir=str(tmpdir))


def immersible_config(**overrides):
    fields = {
        'system': 'immersible',
        'system_parameters': IMMERSIBLE_PARAMETERS,
        'degree': 1,
        'samples': 500,
        'test_samples': 100,
        'horizon': 10,
        'R': [[0.1]],
        'state_lower': [-1.0, -1.0],
        'state_upper': [1.0, 1.0],
        'input_lower': [-1.0],
        'input_upper': [1.0],
        'steps': 40,
        'initial_states': [[0.6, 0.7]],
        'compare_methods': ['polyflow'],
    }
    fields.update(overrides)
    return ExperimentConfig(**fields)
