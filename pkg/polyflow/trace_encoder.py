""" JSONEncoder for trace objects and artifacts """

from datetime import datetime, date
import json
import numpy as np


class TraceEncoder(json.JSONEncoder):
    """
    An encoder for the trace json
    """

    def default(self, o):  # pylint: disable=method-hidden
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, set):
            return sorted(o)
        if isinstance(o, (datetime, date)):
            return o.isoformat()
        if isinstance(o, bytes):
            return o.decode('utf-8', errors='ignore')

        output = repr(o)
        try:
            output = json.JSONEncoder.default(self, o)
        except TypeError:
            pass
        return output


def to_json(obj, **kwargs):
    """
    Serialize with the trace encoder.
    :param obj: object to serialize
    :return: JSON string
    """
    return json.dumps(obj, cls=TraceEncoder, ensure_ascii=True, **kwargs)
