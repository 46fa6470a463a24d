from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from typing import Any, TypeVar

from joblib import Parallel, cpu_count, delayed

T = TypeVar("T")


def resolve_workers(workers: int | None) -> int:
    """0 or None means one worker per available core."""
    if workers is None or workers == 0:
        return max(1, cpu_count())
    if workers < 0:
        raise ValueError(f"workers must be >= 0, got {workers}")
    return workers


def partition(start: int, stop: int, parts: int) -> list[tuple[int, int]]:
    """Split the inclusive range [start, stop] into at most ``parts`` contiguous ranges."""
    if stop < start:
        return []
    size = stop - start + 1
    parts = max(1, min(parts, size))
    step, extra = divmod(size, parts)
    out: list[tuple[int, int]] = []
    lo = start
    for i in range(parts):
        hi = lo + step - 1 + (1 if i < extra else 0)
        out.append((lo, hi))
        lo = hi + 1
    return out


class WorkerPool:
    """Runs independent tasks (bucket ranges, path blocks) and returns results in task order.

    With one worker everything runs in-process; otherwise a joblib pool is kept
    open for the lifetime of the context so stages reuse the same processes.
    """

    def __init__(
        self,
        workers: int | None = 1,
        *,
        backend: str = "loky",
        logger: logging.Logger | None = None,
    ) -> None:
        self.workers = resolve_workers(workers)
        self.backend = backend
        self.log = logger or logging.getLogger(__name__)
        self._parallel: Parallel | None = None

    def __enter__(self) -> WorkerPool:
        if self.workers > 1:
            self._parallel = Parallel(n_jobs=self.workers, backend=self.backend)
            self._parallel.__enter__()
            self.log.debug("started %s pool with %d workers", self.backend, self.workers)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._parallel is not None:
            self._parallel.__exit__(*exc)
            self._parallel = None

    def map(self, fn: Callable[..., T], tasks: Sequence[tuple[Any, ...]]) -> list[T]:
        if self._parallel is None or len(tasks) <= 1:
            return [fn(*args) for args in tasks]
        return list(self._parallel(delayed(fn)(*args) for args in tasks))
