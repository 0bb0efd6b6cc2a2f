"""Parallel executor: maps independent jobs over worker processes.

Each item is dispatched to a process pool through the event loop; results come
back in input order, so aggregation is deterministic regardless of schedule.
"""

from __future__ import annotations

import asyncio
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ParallelExecutor:
    """Runs a picklable function over items with a bounded process pool.

    Features:
    - Inline execution for a single worker (no pickling, easy debugging)
    - Input-order results
    - Per-item progress logging
    """

    def __init__(self, jobs: int = 1) -> None:
        self.jobs = max(1, int(jobs))

    async def map(self, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
        """Evaluate fn on every item and return the results in order."""
        if self.jobs == 1 or len(items) <= 1:
            return [self._run_inline(fn, item, k, len(items)) for k, item in enumerate(items)]

        loop = asyncio.get_running_loop()
        workers = min(self.jobs, len(items))
        logger.info(f"Dispatching {len(items)} job(s) to {workers} worker process(es)")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [loop.run_in_executor(pool, fn, item) for item in items]
            return list(await asyncio.gather(*futures))

    @staticmethod
    def _run_inline(fn: Callable[[T], R], item: T, k: int, total: int) -> R:
        logger.debug(f"Job {k + 1}/{total}")
        return fn(item)


def run_parallel(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> list[R]:
    """Synchronous entry point: ``ParallelExecutor(jobs).map`` on a fresh event loop."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return asyncio.run(ParallelExecutor(jobs).map(fn, items))
