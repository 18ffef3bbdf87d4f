"""Order-preserving fan-out over independent work items."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List


def parallel_map(fn: Callable, items: Iterable, workers: int = 1) -> List:
    """``[fn(x) for x in items]``, optionally across processes.

    Results come back in input order, so aggregation never depends on which
    worker finished first.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
