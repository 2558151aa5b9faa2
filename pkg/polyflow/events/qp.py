"""
QP solver events.
"""

from __future__ import absolute_import
import traceback
from uuid import uuid4
from ..trace import trace_factory
from ..event import BaseEvent


class QpEvent(BaseEvent):
    """
    Represents one QP solve.
    """

    ORIGIN = 'qp'
    RESOURCE_TYPE = 'qp'

    # pylint: disable=W0613
    def __init__(self, wrapped, instance, args, kwargs, start_time, response,
                 exception):
        """
        Initialize.
        :param wrapped: wrapt's wrapped
        :param instance: wrapt's instance
        :param args: wrapt's args
        :param kwargs: wrapt's kwargs
        :param start_time: Start timestamp (epoch)
        :param response: QpSolution
        :param exception: Exception (if happened)
        """
        super(QpEvent, self).__init__(start_time)

        self.event_id = 'qp-{}'.format(str(uuid4()))
        self.resource['name'] = 'admm'
        self.resource['operation'] = wrapped.__name__

        problem = kwargs.get('prob', args[0] if args else None)
        if hasattr(problem, 'size'):
            self.add_metadata(
                variables=int(problem.size),
                constraints=int(problem.constraint_count),
            )

        if response is not None:
            self.add_metadata(
                status=response.status,
                iterations=int(response.iterations),
                primal_residual=float(response.primal_residual),
                dual_residual=float(response.dual_residual),
            )
            if response.status != 'Optimal':
                self.set_error()

        if exception is not None:
            self.set_exception(exception, traceback.format_exc())


class QpEventFactory(object):
    """
    Factory class, generates a QP event.
    """

    @staticmethod
    def create_event(wrapped, instance, args, kwargs, start_time, response,
                     exception):
        event = QpEvent(
            wrapped,
            instance,
            args,
            kwargs,
            start_time,
            response,
            exception
        )
        trace_factory.add_event(event)
