"""
MPC events: closed-loop runs and feasible-domain scans.
"""

from __future__ import absolute_import
import traceback
from uuid import uuid4
import numpy as np
from ..trace import trace_factory
from ..event import BaseEvent


class MpcEvent(BaseEvent):
    """
    Represents a closed-loop run or a feasible-domain scan.
    """

    ORIGIN = 'mpc'
    RESOURCE_TYPE = 'mpc'

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
        :param response: ClosedLoopRun or FeasibleDomainScan
        :param exception: Exception (if happened)
        """
        super(MpcEvent, self).__init__(start_time)

        self.event_id = 'mpc-{}'.format(str(uuid4()))
        self.resource['name'] = wrapped.__name__
        self.resource['operation'] = wrapped.__name__

        if response is not None:
            self.update_response(response)

        if exception is not None:
            self.set_exception(exception, traceback.format_exc())

    def update_response(self, response):
        """
        Adds the outcome to the event.
        :param response: ClosedLoopRun or FeasibleDomainScan
        :return: None
        """
        if hasattr(response, 'lq_cost'):
            self.add_metadata(
                steps=int(len(response.inputs)),
                terminated=response.terminated,
                lost_feasibility_at=response.lost_feasibility_at,
                lq_cost=float(response.lq_cost),
            )
        elif hasattr(response, 'mask'):
            self.add_metadata(
                model=response.model_tag,
                cells=int(np.size(response.mask)),
                feasible_cells=int(np.count_nonzero(response.mask)),
            )


class MpcEventFactory(object):
    """
    Factory class, generates an MPC event.
    """

    @staticmethod
    def create_event(wrapped, instance, args, kwargs, start_time, response,
                     exception):
        event = MpcEvent(
            wrapped,
            instance,
            args,
            kwargs,
            start_time,
            response,
            exception
        )
        trace_factory.add_event(event)
