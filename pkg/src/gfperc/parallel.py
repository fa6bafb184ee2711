"""Deterministic process-pool map.

Results come back in task order whatever the worker count, so every
reduction downstream is scheduler independent.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_threads():
    try:
        return max(1, int(os.environ.get("GFPERC_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(func, tasks, threads=None, chunksize=None):
    """``[func(t) for t in tasks]``, optionally over ``threads`` processes."""
    tasks = list(tasks)
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    if chunksize is None:
        chunksize = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, tasks, chunksize=chunksize))


def chunked(n, size):
    """Contiguous ``(start, stop)`` blocks covering ``range(n)``."""
    return [(i, min(i + size, n)) for i in range(0, n, size)]
