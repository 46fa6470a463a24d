from __future__ import annotations

import logging
import threading
from pathlib import Path

from app.errors import PolicyFileError
from app.io.results import ALPHA_CSV, HRATES_FILE, PROB_CSV, read_policy_dir
from app.solver.dp import PolicyGrid

WATCHED_FILES = frozenset({PROB_CSV, ALPHA_CSV, HRATES_FILE})


class PolicyStore:
    """Holds the solved grid served to clients; reload() swaps it in one step."""

    def __init__(self, directory: Path, *, logger: logging.Logger | None = None) -> None:
        self.directory = directory
        self.log = logger or logging.getLogger(__name__)
        self._grid: PolicyGrid | None = None
        self._lock = threading.Lock()
        self.last_error: str | None = None

    @property
    def grid(self) -> PolicyGrid | None:
        return self._grid

    @property
    def loaded(self) -> bool:
        return self._grid is not None

    def reload(self) -> PolicyGrid:
        """Re-read the grid; on failure the previously loaded grid stays in service."""
        try:
            grid = read_policy_dir(self.directory)
        except (PolicyFileError, ValueError) as exc:
            self.last_error = str(exc)
            self.log.warning("policy reload from %s failed: %s", self.directory, exc)
            raise
        with self._lock:
            self._grid = grid
            self.last_error = None
        self.log.info(
            "policy loaded from %s: stages=%d buckets=%d p_r=%d",
            self.directory,
            grid.stages,
            grid.bucket_count,
            grid.p_r,
        )
        return grid

    def try_reload(self) -> bool:
        try:
            self.reload()
        except (PolicyFileError, ValueError):
            return False
        return True
