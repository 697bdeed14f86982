"""Deterministic worker pools.

All parallel work in the library is split into chunks whose boundaries are
fixed by the problem shape, never by the worker count.  Workers only decide
*who* executes a chunk; every chunk performs the same floating-point
operations in the same order regardless of pool size, so results are
bitwise reproducible for 1 or many workers.  Chunks handed to one
``run`` call must write to pairwise disjoint outputs.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor


def chunk_ranges(n: int, size: int) -> list[tuple[int, int]]:
    """Half-open index ranges covering [0, n) in fixed blocks of ``size``."""
    if size <= 0:
        raise ValueError("chunk size must be positive")
    return [(i, min(i + size, n)) for i in range(0, n, size)]


class WorkerPool:
    """Thread pool that executes lists of zero-argument tasks.

    With ``workers == 1`` tasks run inline in submission order; otherwise
    they are dispatched to a shared ThreadPoolExecutor.  Exceptions from any
    task propagate to the caller of :meth:`run`.
    """

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))
        self._executor = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def run(self, tasks: Iterable[Callable[[], None]]) -> None:
        tasks = list(tasks)
        if self._executor is None or len(tasks) <= 1:
            for task in tasks:
                task()
            return
        futures = [self._executor.submit(task) for task in tasks]
        for fut in futures:
            fut.result()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def run_tasks(pool: WorkerPool | None, tasks: Sequence[Callable[[], None]]) -> None:
    if pool is None:
        for task in tasks:
            task()
    else:
        pool.run(tasks)
