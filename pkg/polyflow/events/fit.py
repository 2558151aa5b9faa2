"""
Events of the embedding fits.
"""

from __future__ import absolute_import
import traceback
from uuid import uuid4
from ..trace import trace_factory
from ..event import BaseEvent


class FitEvent(BaseEvent):
    """
    Represents a least-squares fit of a lifted model.
    """

    ORIGIN = 'lifting'
    RESOURCE_TYPE = 'fit'

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
        :param response: the fit result
        :param exception: Exception (if happened)
        """
        super(FitEvent, self).__init__(start_time)

        self.event_id = 'fit-{}'.format(str(uuid4()))
        self.resource['name'] = wrapped.__name__
        self.resource['operation'] = wrapped.__name__

        system = kwargs.get('sys', args[0] if args else None)
        if hasattr(system, 'name'):
            self.resource['metadata']['system'] = system.name

        if response is not None:
            self.update_response(response)

        if exception is not None:
            self.set_exception(exception, traceback.format_exc())

    def update_response(self, response):
        """
        Adds the fit statistics to the event.
        :param response: PolyflowFit, LiftedModel or (V, dim)
        :return: None
        """
        if isinstance(response, tuple) and len(response) == 2:
            projection, dim = response
            self.add_metadata(dim=int(dim))
            self.add_array_summary('projection', projection)
            return

        residual = getattr(response, 'residual', None)
        if residual is not None:
            self.add_metadata(
                residual_rms=float(residual.rms),
                residual_max=float(residual.max),
            )
        for field in ('k', 'rank', 'dim'):
            value = getattr(response, field, None)
            if value is not None:
                self.add_metadata(**{field: int(value)})
        if getattr(response, 'A', None) is not None:
            self.add_array_summary('A', response.A)
            self.add_array_summary('B', response.B)


class FitEventFactory(object):
    """
    Factory class, generates a fit event.
    """

    @staticmethod
    def create_event(wrapped, instance, args, kwargs, start_time, response,
                     exception):
        event = FitEvent(
            wrapped,
            instance,
            args,
            kwargs,
            start_time,
            response,
            exception
        )
        trace_factory.add_event(event)
