"""trace transport layers"""

import os
import logging
from polyflow.trace_encoder import to_json

LOGGER = logging.getLogger('polyflow')


class NoneTransport(object):
    """ drops traces """

    @classmethod
    def send(cls, _):
        LOGGER.debug('trace dropped by NoneTransport, configure a transport')


class LogTransport(object):
    """ send traces by logging them """

    @staticmethod
    def send(trace):
        LOGGER.info('POLYFLOW_TRACE: %s', to_json(trace.to_dict()))


class FileTransport(object):
    """ writes every trace as a JSON document into a directory """

    def __init__(self, directory):
        self.directory = directory

    def path_for(self, trace):
        """
        File name of a trace, after its runner name.
        :param trace: Trace
        :return: path
        """
        name = 'run'
        if trace.runner and trace.runner.resource.get('name'):
            name = trace.runner.resource['name']
        return os.path.join(self.directory, '{}-trace.json'.format(name))

    def send(self, trace):
        if not os.path.isdir(self.directory):
            os.makedirs(self.directory)
        with open(self.path_for(trace), 'w') as trace_file:
            trace_file.write(to_json(trace.to_dict(), indent=2))
