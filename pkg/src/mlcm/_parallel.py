"""Deterministic task fan-out for replicate-level parallelism.

Tasks carry their own derived seeds, so results are a pure function of the
task list; the worker count only affects wall time. ``run_tasks`` returns
results in task order, making every downstream reduction independent of
scheduling. Worker count resolution: explicit argument, else the
``MLCM_THREADS`` environment variable, else 1.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

__all__ = ["resolve_threads", "run_tasks", "THREADS_ENV"]

THREADS_ENV = "MLCM_THREADS"


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count from the argument, the environment, or 1."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if raw:
            try:
                threads = int(raw)
            except ValueError:
                raise ValueError(
                    f"{THREADS_ENV} must be an integer, got {raw!r}"
                ) from None
        else:
            threads = 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def run_tasks(fn: Callable, tasks: Sequence, threads: Optional[int] = None):
    """Apply ``fn`` to each task, in order, optionally across processes.

    ``fn`` and the tasks must be picklable when ``threads > 1``. The result
    list is identical for every thread count.
    """
    tasks = list(tasks)
    threads = resolve_threads(threads)
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))
