# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Memoization of expensive, deterministic builders (kernel tables).

`persistent_lru_cache` keeps results in an in-process LRU and, when given a filename,
mirrors them to a pickle file that is reloaded on the next run. `table_cache` wires a
builder to both, honouring the PATCHFLOW_CACHE_DISABLE / PATCHFLOW_TABLE_CACHE switches.
"""

import atexit
import inspect
import logging
import os
import pickle
from collections import OrderedDict, namedtuple
from functools import update_wrapper
from threading import RLock

from frozendict import frozendict

from . import utils

logger = logging.getLogger(__name__)

__all__ = ("CacheInfo", "persistent_lru_cache", "table_cache")

CacheInfo = namedtuple("CacheInfo", ["hits", "misses", "maxsize", "currsize"])


def _freeze(value):
    if isinstance(value, dict):
        return frozendict({k: _freeze(v) for k, v in value.items()})
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


def _make_key(signature, args, kwargs):
    """Canonical key: arguments bound by name with defaults applied"""
    bound = signature.bind(*args, **kwargs)
    bound.apply_defaults()
    return tuple((name, _freeze(value)) for name, value in bound.arguments.items())


def persistent_lru_cache(filename=None, save_every=1, maxsize=32):
    """Least-recently-used cache decorator with optional pickle persistence.

    If *filename* is set, the cache is loaded from it when the function is decorated and
    written back every *save_every* misses (None: only at exit or on `cache_save()`).
    *maxsize* None disables eviction.
    """

    def decorating_function(user_function):
        lock = RLock()
        signature = inspect.signature(user_function)
        cache = OrderedDict()
        if filename:
            try:
                with open(filename, "rb") as f:
                    cache.update(pickle.load(f))
                logger.debug("loaded %d cached entries from %s", len(cache), filename)
            except (EOFError, OSError, pickle.PickleError, AttributeError, TypeError) as e:
                logger.debug("no usable cache at %s (%s)", filename, e)

        stats = {"hits": 0, "misses": 0}

        def cache_save():
            if not filename:
                return
            with lock:
                snapshot = dict(cache)
            try:
                utils.atomic_write_bytes(filename, pickle.dumps(snapshot))
            except OSError as e:
                logger.warning("could not save cache to %s: %s", filename, e)

        if filename:
            atexit.register(cache_save)

        def wrapper(*args, **kwargs):
            key = _make_key(signature, args, kwargs)
            with lock:
                if key in cache:
                    cache.move_to_end(key)
                    stats["hits"] += 1
                    return cache[key]
            result = user_function(*args, **kwargs)
            with lock:
                cache[key] = result
                cache.move_to_end(key)
                if maxsize is not None:
                    while len(cache) > maxsize:
                        cache.popitem(last=False)
                stats["misses"] += 1
                misses = stats["misses"]
            if save_every and not misses % save_every:
                cache_save()
            return result

        def cache_info():
            with lock:
                return CacheInfo(stats["hits"], stats["misses"], maxsize, len(cache))

        def cache_clear():
            with lock:
                cache.clear()
                stats["hits"] = stats["misses"] = 0

        wrapper.cache_info = cache_info
        wrapper.cache_clear = cache_clear
        wrapper.cache_save = cache_save
        wrapper.cache_filename = filename
        return update_wrapper(wrapper, user_function)

    return decorating_function


def table_cache(builder):
    """Memoize a table builder unless caching is globally disabled.

    The persistent file comes from PATCHFLOW_TABLE_CACHE, read on first use.
    """
    state = {}
    lock = RLock()

    def _cached():
        with lock:
            if "fn" not in state:
                state["fn"] = persistent_lru_cache(os.environ.get("PATCHFLOW_TABLE_CACHE") or None, save_every=1)(builder)
            return state["fn"]

    def wrapper(*args, **kwargs):
        if utils.PATCHFLOW_CACHE_GLOBAL_DISABLE:
            return builder(*args, **kwargs)
        return _cached()(*args, **kwargs)

    def cache_info():
        return _cached().cache_info()

    def cache_clear():
        with lock:
            if "fn" in state:
                state["fn"].cache_clear()
                state.pop("fn")

    wrapper.cache_info = cache_info
    wrapper.cache_clear = cache_clear
    return update_wrapper(wrapper, builder)
