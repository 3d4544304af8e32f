# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np

PATCHFLOW_CACHE_GLOBAL_DISABLE = bool(os.environ.get("PATCHFLOW_CACHE_DISABLE"))


def disable():
    global PATCHFLOW_CACHE_GLOBAL_DISABLE
    PATCHFLOW_CACHE_GLOBAL_DISABLE = True


def enable():
    global PATCHFLOW_CACHE_GLOBAL_DISABLE
    PATCHFLOW_CACHE_GLOBAL_DISABLE = False


class PatchFlowError(Exception):
    pass


class ConfigError(PatchFlowError):
    pass


class SymbolError(PatchFlowError):
    pass


class OrderError(SymbolError):
    pass


class HankelConvergenceError(PatchFlowError):
    def __init__(self, message, bracket=math.inf):
        super().__init__(message)
        self.bracket = bracket


class KernelRangeError(PatchFlowError):
    def __init__(self, message, supported=None):
        super().__init__(message)
        self.supported = supported


class OsgoodRangeError(PatchFlowError):
    def __init__(self, message, limit=math.inf):
        super().__init__(message)
        self.limit = limit


class ContactError(PatchFlowError):
    pass


class SelfIntersectionError(PatchFlowError):
    pass


class DegenerateCurveError(PatchFlowError):
    pass


class SolverHalt(PatchFlowError):
    """Raised by the stepping loop; `state` is the last valid state, `cause` the triggering error"""

    def __init__(self, message, state=None, cause=None):
        super().__init__(message)
        self.state = state
        self.cause = cause


def thread_count():
    """worker cap from PATCHFLOW_THREADS, 1 when unset or invalid"""
    raw = os.environ.get("PATCHFLOW_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def map_chunks(fn, n_items, min_chunk=64):
    """Apply `fn(lo, hi)` over contiguous index chunks and concatenate the results in index order.

    Each item is computed entirely inside one chunk, so results do not depend on the
    number of workers.
    """
    workers = thread_count()
    if workers == 1 or n_items <= min_chunk:
        return fn(0, n_items)
    bounds = np.linspace(0, n_items, min(workers, max(1, n_items // min_chunk)) + 1).astype(int)
    spans = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda span: fn(*span), spans))
    return np.concatenate(parts, axis=0)


@lru_cache(64)
def gauss_legendre(order):
    """nodes/weights on [-1, 1]"""
    return np.polynomial.legendre.leggauss(order)


def _atomic_write(path, data, mode):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({"newline": ""} if "b" not in mode else {})) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    """write through a temp file in the same directory, then rename"""
    _atomic_write(path, text, "w")


def atomic_write_bytes(path, data):
    _atomic_write(path, data, "wb")


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "items"):
        return dict(obj.items())
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def finite_or_tag(value):
    """JSON-safe float: infinities become the strings '+inf'/'-inf'"""
    value = float(value)
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return value
