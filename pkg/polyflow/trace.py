"""
Trace object holds the events of one experiment run and its metadata
"""

from __future__ import absolute_import
import sys
import time
import traceback
import threading
import json

from polyflow.event import BaseEvent
from polyflow.common import ErrorCode
from polyflow.trace_encoder import to_json
from polyflow.trace_transports import NoneTransport
from polyflow.utils import print_debug, get_traceback_data_from_exception
from .constants import __version__

MAX_EVENTS_PER_TYPE = 20
MAX_LABEL_SIZE = 10 * 1024


class TraceFactory(object):
    """
    A trace factory.
    Holds a single trace per process; worker threads of a scan or a
    comparison add their events to the same trace.
    """

    LOCK = threading.Lock()

    def __init__(self):
        """
        Initialize.
        """
        self.app_name = ''
        self.debug = False
        self.singleton_trace = None
        self.transport = NoneTransport()
        self.disabled = False

    def initialize(self, app_name, transport, debug):
        """
        Initializes the factory with user's data.
        :param app_name: application name
        :param transport: where traces are sent
        :param debug: debug flag.
        :return: None
        """
        self.app_name = app_name
        self.transport = transport
        self.debug = debug
        if self.singleton_trace:
            self.singleton_trace.app_name = app_name
            self.singleton_trace.debug = debug

    def get_or_create_trace(self):
        """
        Gets or create a trace - thread-safe
        :return: trace
        """
        with TraceFactory.LOCK:
            if self.singleton_trace is None:
                self.singleton_trace = Trace(
                    app_name=self.app_name,
                    debug=self.debug,
                )
            return self.singleton_trace

    def get_trace(self):
        """
        Get the active trace.
        :return: The trace, None if trace does not exist
        """
        return self.singleton_trace

    def pop_trace(self):
        """
        Detaches the active trace.
        :return: the trace
        """
        with TraceFactory.LOCK:
            trace = self.singleton_trace
            self.singleton_trace = None
            return trace

    def add_event(self, event):
        """
        Add event to the active trace.
        :param event: The event to add.
        :return: None
        """
        trace = self.get_trace()
        if trace and not self.disabled:
            trace.add_event(event)

    def set_runner(self, event):
        """
        Add a runner event to the active trace.
        :param event: The event to add.
        :return: None
        """
        trace = self.get_trace()
        if trace:
            trace.set_runner(event)

    def add_exception(self, exception, stack_trace, additional_data=''):
        """
        add an exception to the active trace.
        :param exception: the exception to add
        :param stack_trace: the traceback at the moment of the event
        :param additional_data: a json serializable object that contains
            additional data regarding the exception
        :return: None
        """
        if self.debug:
            print('[POLYFLOW_DEBUG] polyflow exception: {}\n{}-----'.format(
                exception,
                stack_trace
            ))
        trace = self.get_trace()
        if trace:
            trace.add_exception(exception, stack_trace, additional_data)

    def add_label(self, key, value):
        """
        Add label to the active trace.
        :param key: label key
        :param value: label value
        """
        trace = self.get_trace()
        if trace:
            trace.add_label(key, value)

    def set_error(self, exception, traceback_data=None):
        """
        Set an error for the active trace.
        :param exception: The exception
        :param traceback_data: The traceback data.
        """
        trace = self.get_trace()
        if trace:
            trace.set_error(exception, traceback_data)

    def send_traces(self):
        """
        Send the active trace and detach it.
        :return: None
        """
        if self.disabled:
            print_debug('Trace not sent (disabled).')
            self.pop_trace()
            return

        trace = self.pop_trace()
        if trace:
            try:
                trace.send_traces(self.transport)
            except Exception as exception:  # pylint: disable=W0703
                print('Failed to send trace: {}'.format(exception))

    def prepare(self):
        """
        Prepare the active trace.
        :return: None
        """
        trace = self.get_trace()
        if trace:
            trace.prepare()

    def enable(self):
        """
        Enables tracing
        :return: None
        """
        self.disabled = False

    def disable(self):
        """
        Disables tracing
        :return: None
        """
        self.disabled = True


class Trace(object):
    """
    Represents the run record of one command
    """

    def __init__(self, app_name='', debug=False):
        """
        initialize.
        """
        self.app_name = app_name
        self.debug = debug
        self.events = []
        self.exceptions = []
        self.custom_labels = {}
        self.custom_labels_size = 0
        self.dropped_events = {}
        self.version = __version__
        self.platform = 'Python {}.{}'.format(
            sys.version_info.major,
            sys.version_info.minor
        )
        self.runner = None
        self.trace_sent = False
        self._lock = threading.Lock()

    def prepare(self):
        """
        Prepares new trace, empty events list.
        :return: None
        """
        with self._lock:
            self.events = []
            self.exceptions = []
            self.custom_labels = {}
            self.custom_labels_size = 0
            self.dropped_events = {}
            self.runner = None
            self.trace_sent = False

    @staticmethod
    def load_from_dict(trace_data):
        """
        Load new trace object from dict.
        :param trace_data: dict data of trace
        :return: Trace
        """
        trace = Trace()
        trace.app_name = trace_data['app_name']
        trace.version = trace_data['version']
        trace.platform = trace_data['platform']
        trace.exceptions = trace_data.get('exceptions', [])
        trace.custom_labels = trace_data.get('labels', {})
        for event in trace_data['events']:
            trace.add_event(BaseEvent.load_from_dict(event))
        return trace

    def set_runner(self, runner):
        """
        Sets the runner of the current tracer
        :param runner: Runner to set
        """
        self.add_event(runner, should_terminate=False)
        self.runner = runner

    def add_event(self, event, should_terminate=True):
        """
        Add event to events list.
        Keeps at most MAX_EVENTS_PER_TYPE events of every resource type.
        :param event: BaseEvent
        :param should_terminate: If True, `event.terminate()` is called
        :return: None
        """
        if should_terminate:
            event.terminate()
        resource_type = event.resource.get('type', '')
        with self._lock:
            same_type = sum(
                1 for other in self.events
                if other.resource.get('type', '') == resource_type
            )
            if event.origin != 'runner' and same_type >= MAX_EVENTS_PER_TYPE:
                self.dropped_events[resource_type] = (
                    self.dropped_events.get(resource_type, 0) + 1
                )
                return
            self.events.append(event)

    def add_exception(self, exception, stack_trace, additional_data=''):
        """
        add an exception to the trace
        :param exception: the exception to add
        :param stack_trace: the traceback at the moment of the event
        :param additional_data: a json serializable object that contains
            additional data regarding the exception
        :return: None
        """
        try:
            exception_dict = {
                'type': str(type(exception)),
                'message': str(exception),
                'traceback': stack_trace,
                'time': time.time(),
                'additional_data': additional_data
            }
            with self._lock:
                self.exceptions.append(exception_dict)
        # Making sure that tracing inner exception won't crash
        # pylint: disable=W0703
        except Exception:
            pass

    def verify_custom_label(self, key, value):
        """
        Verifies custom label is valid, both in size and type.
        :param key: Key for the label data (string)
        :param value: Value for the label data
        :return: True/False
        """
        if not isinstance(key, str):
            print_debug('label key support only string type, got {}'.format(
                type(key)
            ))
            return False
        if not isinstance(value, (int, float, str, bool)):
            print_debug(
                'label value support only string, int, float, bool types, '
                'got {}={}'.format(key, type(value))
            )
            return False

        if (
                len(key) +
                len(str(value)) +
                self.custom_labels_size > MAX_LABEL_SIZE
        ):
            return False

        self.custom_labels_size += len(key) + len(str(value))

        return True

    def add_label(self, key, value):
        """
        Adds a custom label to the runner of the current trace
        :param key: Key for the label data (string)
        :param value: Value for the label data (string, bool, int, float)
        """
        if isinstance(value, dict):
            for dict_key, dict_value in value.items():
                self.add_label('{}.{}'.format(key, dict_key), dict_value)
            return

        if hasattr(value, 'item') and not isinstance(value, str):
            value = value.item()

        with self._lock:
            if not self.verify_custom_label(key, value):
                return
            self.custom_labels[key] = value

    def set_error(self, exception, traceback_data=None):
        """
        Sets the error value of the runner
        :param exception: Exception object or String to set.
        :param traceback_data: traceback string
        """
        if not self.runner:
            return

        if not traceback_data:
            if getattr(exception, '__traceback__', None):
                traceback_data = get_traceback_data_from_exception(exception)
            else:
                traceback_data = ''.join(
                    traceback.format_list(traceback.extract_stack())
                )
        if isinstance(exception, str):
            exception = Exception(exception)

        self.runner.set_exception(exception, traceback_data)

    def update_runner_metadata(self):
        """
        Adds the custom labels and the dropped event counts to the runner
        """
        if not self.runner:
            return
        metadata = self.runner.resource['metadata']
        if self.custom_labels:
            metadata['labels'] = json.dumps(self.custom_labels, sort_keys=True)
        if self.dropped_events:
            metadata['dropped_events'] = dict(self.dropped_events)

    def to_dict(self):
        """
        Convert trace to dict.
        :return: Trace dict
        """
        try:
            self.update_runner_metadata()
        # pylint: disable=W0703
        except Exception as exception:
            self.add_exception(exception, traceback.format_exc())

        return {
            'app_name': self.app_name,
            'events': [event.to_dict() for event in self.events],
            'exceptions': self.exceptions,
            'labels': dict(self.custom_labels),
            'version': self.version,
            'platform': self.platform,
        }

    @property
    def length(self):
        return len(to_json(self.to_dict()))

    @property
    def has_error(self):
        return bool(self.runner and self.runner.error_code != ErrorCode.OK)

    def send_traces(self, transport):
        """
        Send trace through the given transport, once.
        Should ONLY be called by TraceFactory.
        :param transport: transport object with a `send(trace)` method
        :return: None
        """
        if self.trace_sent:
            return

        if self.runner:
            self.runner.terminate()

        transport.send(self)
        self.trace_sent = True

        if self.debug:
            print('Trace sent (size: {})'.format(self.length))


# pylint: disable=C0103
trace_factory = TraceFactory()
