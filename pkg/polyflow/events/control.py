"""
Events of the linear-control backbone.
"""

from __future__ import absolute_import
import traceback
from uuid import uuid4
from ..trace import trace_factory
from ..event import BaseEvent


class ControlEvent(BaseEvent):
    """
    Represents a Riccati solve or an invariant-set computation.
    """

    ORIGIN = 'lincontrol'
    RESOURCE_TYPE = 'control'

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
        :param response: DareSolution or InvariantSet
        :param exception: Exception (if happened)
        """
        super(ControlEvent, self).__init__(start_time)

        self.event_id = 'control-{}'.format(str(uuid4()))
        self.resource['name'] = wrapped.__name__
        self.resource['operation'] = wrapped.__name__

        matrix = kwargs.get('A', args[0] if args else None)
        if getattr(matrix, 'shape', None):
            self.add_metadata(dim=int(matrix.shape[0]))

        if response is not None:
            self.update_response(response)

        if exception is not None:
            self.set_exception(exception, traceback.format_exc())
            for field in ('iterations', 'residual'):
                value = getattr(exception, field, None)
                if value is not None:
                    self.add_metadata(**{field: value})

    def update_response(self, response):
        """
        Adds the solver diagnostics to the event.
        :param response: DareSolution or InvariantSet
        :return: None
        """
        if hasattr(response, 'P'):
            self.add_metadata(
                iterations=int(response.iterations),
                residual=float(response.residual),
            )
            self.add_array_summary('P', response.P)
            self.add_array_summary('K', response.K)
        elif hasattr(response, 'polytope'):
            self.add_metadata(
                determinedness=int(response.determinedness),
                constraints=int(response.polytope.H.shape[0]),
            )


class ControlEventFactory(object):
    """
    Factory class, generates a control event.
    """

    @staticmethod
    def create_event(wrapped, instance, args, kwargs, start_time, response,
                     exception):
        event = ControlEvent(
            wrapped,
            instance,
            args,
            kwargs,
            start_time,
            response,
            exception
        )
        trace_factory.add_event(event)
