import functools
import json
import os

import numpy as np
import scipy.linalg

from schmidtbench.exceptions import ComputationError

WORKERS_ENV = "SCHMIDT_BENCH_WORKERS"

# Pulses drawn from one counter-based stream. The block layout is fixed, so
# the samples do not depend on how blocks are spread over workers.
PULSE_BLOCK = 4096

# Upper bound on the number of modes drawn at once inside a pulse block
# (keeps a block's scratch matrix around 32 MB).
MODE_CHUNK = 1024


def wrap_exceptions(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise ComputationError(
                f"{func.__name__}: decomposition failed ({exc})"
            ) from exc
        except FloatingPointError as exc:
            raise ComputationError(
                f"{func.__name__}: floating point failure ({exc})"
            ) from exc

    return wrapper


def resolve_workers(workers=None):
    if workers is None:
        workers = os.environ.get(WORKERS_ENV) or 1

    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    return workers


def format_float(value):
    # repr() is the shortest string that parses back to the same double.
    return repr(float(value))


def dump_json_line(payload):
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), default=_to_json
    )


def _to_json(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"{type(obj).__name__!r} is not JSON serializable")
