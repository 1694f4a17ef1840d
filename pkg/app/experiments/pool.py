"""
Ordered Realization Dispatch

Realizations are independent work items. They run inline for a single worker
and in a process pool otherwise; results always come back in submission order,
so the worker count never changes what gets aggregated.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar


logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(func: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """
    Apply func to every item, returning results in item order.

    Args:
        func: Picklable (module-level or functools.partial) callable
        items: Work items
        workers: Process count; 1 runs inline

    Returns:
        List of results, results[k] = func(items[k])
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    workers = min(workers, len(items))
    chunksize = max(1, len(items) // (4 * workers))
    logger.info("Dispatching %d realizations to %d workers", len(items), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=chunksize))
