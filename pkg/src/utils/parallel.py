"""Ordered fan-out of independent worker calls."""

import concurrent.futures
import logging
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def map_ordered(func: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> List[R]:
    """Apply ``func`` to every item, results in submission order.

    Args:
        func: Picklable top-level callable
        items: Work items
        jobs: Worker processes; 1 runs in-process

    Returns:
        List of results aligned with ``items``
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    workers = min(jobs, len(items))
    logger.debug(f"Dispatching {len(items)} tasks to {workers} worker processes")
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(func, item) for item in items]
        return [future.result() for future in futures]
