"""
Runner for a command line verb
"""

from __future__ import absolute_import
import uuid
import json
from ..event import BaseEvent
from ..trace_encoder import TraceEncoder


class CommandRunner(BaseEvent):
    """
    Represents one invocation of a polyflow command.
    """

    ORIGIN = 'runner'
    RESOURCE_TYPE = 'cli_command'
    OPERATION = 'execute'

    def __init__(self, start_time, wrapped_function, arguments, name=None):
        """
        Initialize.
        :param start_time: event's start time (epoch).
        :param wrapped_function: the command function this runner wraps.
        :param arguments: parsed command line arguments (dict).
        :param name: resource name, defaults to the function name.
        """

        super(CommandRunner, self).__init__(start_time)

        self.event_id = str(uuid.uuid4())
        self.resource['name'] = name if name else wrapped_function.__name__
        self.resource['operation'] = self.OPERATION

        self.resource['metadata'].update({
            'python.module': wrapped_function.__module__,
            'python.function.name': wrapped_function.__name__,
        })

        if arguments:
            self.add_json_field('command.arguments', arguments)

    def add_json_field(self, name, data):
        """
        Add a field to metadata with value `data` and name `name`,
            only if it is JSON serializable
        """
        try:
            json.dumps(data, cls=TraceEncoder, ensure_ascii=True)
            self.resource['metadata'][name] = data
        except TypeError:
            pass

    def set_exit_code(self, exit_code):
        """
        Records the process exit code; non-zero codes mark the run as failed.
        :param exit_code: integer
        """
        self.resource['metadata']['exit_code'] = exit_code
        if exit_code:
            self.set_error()
