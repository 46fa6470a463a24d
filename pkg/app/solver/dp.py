"""Backward induction over (stage x bucket).

Each stage picks, per bucket midpoint, the allocation minimizing

    (1 - h(t)) * [1 - (1 - F(rf)) * (1 - E[V(t+1) | no ruin])]

over the allocation grid, threading stage vectors from S_Max - 1 down to 0.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from app.metrics import SOLVER_CELLS, SOLVER_PRUNE_BUCKET, SOLVER_STAGE_SECONDS
from app.model.hazard import HazardSchedule
from app.model.returns import ReturnModel, portfolio_moments
from app.model.ruin import Discretization, bucket_indices
from app.parallel import WorkerPool, partition
from app.solver.transitions import (
    CompressedStage,
    StageVector,
    compress_stage,
    conditional_expectation,
    high_form,
    low_form,
)

# Cells per evaluation block; bounds memory, not results.
BLOCK_CELLS = 1 << 16
PRUNE_SLACK = 0.1**16 + 0.1**17


@dataclass(frozen=True)
class PolicyCell:
    t: int
    rf: float
    bucket: int
    v: float
    alpha: float
    overflow: bool


@dataclass(frozen=True)
class PolicyGrid:
    """Solved V and alpha for decision stages 0..S-1 and buckets 1..N."""

    p_r: int
    rf_max: float
    v: NDArray[np.float64]
    alpha: NDArray[np.float64]
    overflow: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.v.shape != self.alpha.shape or self.v.shape[0] != self.overflow.size:
            raise ValueError("grid arrays disagree in shape")

    @property
    def stages(self) -> int:
        return int(self.v.shape[0])

    @property
    def bucket_count(self) -> int:
        return int(self.v.shape[1])

    @property
    def midpoints(self) -> NDArray[np.float64]:
        return np.arange(1, self.bucket_count + 1, dtype=np.float64) / self.p_r

    def discretization(self, p_alpha: int = 1, prune_power: float = math.inf) -> Discretization:
        return Discretization(
            p_r=self.p_r, p_alpha=p_alpha, rf_max=self.rf_max, prune_power=prune_power
        )

    def stage(self, t: int) -> StageVector:
        ov = float(self.overflow[t])
        return StageVector(t=t, values=self.v[t].copy(), overflow=ov, ceiling=ov)

    def alphas_for(self, t: int, rf: NDArray[np.float64]) -> NDArray[np.float64]:
        """Allocation per ruin factor at stage ``t``; the overflow region holds all stock."""
        idx = bucket_indices(rf, self.discretization())
        row = np.append(self.alpha[t], 1.0)
        return row[idx - 1]

    def lookup(self, t: int, rf: float) -> PolicyCell:
        if not 0 <= t < self.stages:
            raise KeyError(f"no decision stage {t} (grid has 0..{self.stages - 1})")
        b = int(bucket_indices(np.array([rf]), self.discretization())[0])
        if b > self.bucket_count:
            return PolicyCell(t, rf, b, float(self.overflow[t]), 1.0, True)
        return PolicyCell(t, rf, b, float(self.v[t, b - 1]), float(self.alpha[t, b - 1]), False)

    def sub_horizon(self, t: int) -> PolicyGrid:
        """Stages t..S-1 re-indexed from 0."""
        if not 0 <= t < self.stages:
            raise ValueError(f"stage {t} outside 0..{self.stages - 1}")
        return PolicyGrid(
            p_r=self.p_r,
            rf_max=self.rf_max,
            v=self.v[t:].copy(),
            alpha=self.alpha[t:].copy(),
            overflow=self.overflow[t:].copy(),
        )

    def same_as(self, other: PolicyGrid) -> bool:
        return (
            self.p_r == other.p_r
            and self.bucket_count == other.bucket_count
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.overflow, other.overflow)
        )


def select_allocation(
    v_low: NDArray[np.float64], v_high: NDArray[np.float64], threshold: float
) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Pick the allocation index per row as a sequential scan over the grid would.

    The scan switches to the complement form at the first candidate whose direct
    value exceeds ``threshold`` and keeps it for the rest of the row. Before the
    switch only strict improvements are taken (smaller allocation wins ties);
    after it equal values also replace the incumbent (larger allocation wins).
    The scan stops at the first exact zero.
    """
    rows_n, m = v_low.shape
    rows = np.arange(rows_n)
    cols = np.arange(m)

    over = v_low > threshold
    k = np.where(over.any(axis=1), over.argmax(axis=1), m)
    in_low = cols[None, :] < k[:, None]
    vl = np.where(in_low, v_low, np.inf)
    vh = np.where(in_low, np.inf, v_high)

    low_arg = vl.argmin(axis=1)
    low_min = vl[rows, low_arg]
    high_min = vh.min(axis=1)
    high_last = (m - 1) - vh[:, ::-1].argmin(axis=1)
    high_zero = vh == 0.0
    has_high_zero = high_zero.any(axis=1)
    first_high_zero = high_zero.argmax(axis=1)

    pick_low = (low_min == 0.0) | (k == m) | (~has_high_zero & (high_min > low_min))
    choice = np.where(pick_low, low_arg, np.where(has_high_zero, first_high_zero, high_last))
    value = np.where(choice < k, v_low[rows, choice], v_high[rows, choice])
    return choice, value


def evaluate_buckets(
    first: int,
    last: int,
    alphas: NDArray[np.float64],
    mean: NDArray[np.float64],
    std: NDArray[np.float64],
    comp: CompressedStage,
    hazard: float,
    p_r: int,
    full: bool,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Optimal (v, alpha) for buckets first..last.

    ``full=False`` evaluates only the last (largest) allocation, the pruned search.
    """
    if not full:
        alphas, mean, std = alphas[-1:], mean[-1:], std[-1:]
    m = alphas.size
    threshold = 0.5 * (1.0 - hazard)
    rows_per_block = max(1, BLOCK_CELLS // m)

    values = np.empty(last - first + 1)
    chosen = np.empty(last - first + 1)
    for lo in range(first, last + 1, rows_per_block):
        hi = min(lo + rows_per_block - 1, last)
        rf = (np.arange(lo, hi + 1, dtype=np.float64) / p_r)[:, None]
        cdf, e = conditional_expectation(rf, mean[None, :], std[None, :], comp, p_r)
        v_low = low_form(cdf, e, hazard)
        v_high = high_form(cdf, e, hazard)
        idx, val = select_allocation(v_low, v_high, threshold)
        values[lo - first : hi - first + 1] = val
        chosen[lo - first : hi - first + 1] = alphas[idx]
    return values, chosen


def prune_cutoff(hazard: float, prune_power: float) -> float:
    """Value at which a stage's search collapses to the largest allocation."""
    scale = 10.0**prune_power
    return math.floor(scale * (1.0 - hazard)) / scale - PRUNE_SLACK


def find_prune_bucket(
    n: int,
    alphas: NDArray[np.float64],
    mean: NDArray[np.float64],
    std: NDArray[np.float64],
    comp: CompressedStage,
    hazard: float,
    d: Discretization,
) -> int | None:
    """First bucket whose full-search value reaches the prune cutoff, if any.

    Stage values rise with the bucket, so a bisection over full single-bucket
    searches finds the same bucket a left-to-right scan would.
    """
    if not d.prunes or alphas.size == 1:
        return None
    cutoff = prune_cutoff(hazard, d.prune_power)

    def reaches(b: int) -> bool:
        v, _ = evaluate_buckets(b, b, alphas, mean, std, comp, hazard, d.p_r, True)
        return bool(v[0] >= cutoff)

    if not reaches(n):
        return None
    lo, hi = 1, n
    while lo < hi:
        mid = (lo + hi) // 2
        if reaches(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def solve_stage(
    t: int,
    next_stage: StageVector,
    model: ReturnModel,
    h: HazardSchedule,
    d: Discretization,
    *,
    alphas: Sequence[float] | NDArray[np.float64] | None = None,
    pool: WorkerPool | None = None,
    logger: logging.Logger | None = None,
) -> tuple[StageVector, NDArray[np.float64]]:
    """Solve decision stage ``t`` given the solved stage ``t + 1``."""
    log = logger or logging.getLogger(__name__)
    if not 0 <= t < h.s_max:
        raise ValueError(f"stage {t} is not a decision stage (0..{h.s_max - 1})")
    started = time.perf_counter()
    pool = pool or WorkerPool(1)

    cand = d.alpha_values if alphas is None else np.asarray(alphas, dtype=np.float64)
    mean, std = portfolio_moments(model, cand)
    hazard = h.hazard(t)
    n = d.bucket_count
    comp = compress_stage(next_stage)

    prune_at = find_prune_bucket(n, cand, mean, std, comp, hazard, d)
    full_last = n if prune_at is None else prune_at

    parts = max(1, pool.workers * 4)
    tasks = [
        (lo, hi, cand, mean, std, comp, hazard, d.p_r, True)
        for lo, hi in partition(1, full_last, parts)
    ]
    tasks += [
        (lo, hi, cand, mean, std, comp, hazard, d.p_r, False)
        for lo, hi in partition(full_last + 1, n, pool.workers)
    ]
    results = pool.map(evaluate_buckets, tasks)
    values = np.concatenate([r[0] for r in results])
    chosen = np.concatenate([r[1] for r in results])

    ceiling = 1.0 - hazard
    elapsed = time.perf_counter() - started
    SOLVER_STAGE_SECONDS.observe(elapsed)
    SOLVER_CELLS.labels("full").inc(full_last * cand.size)
    SOLVER_CELLS.labels("pruned").inc(n - full_last)
    SOLVER_PRUNE_BUCKET.set(prune_at or 0)
    log.info(
        "stage %d solved: runs=%d prune_bucket=%s alphas=%d elapsed=%.2fs",
        t,
        comp.runs,
        prune_at,
        cand.size,
        elapsed,
    )
    stage = StageVector(t=t, values=values, overflow=ceiling, ceiling=ceiling)
    return stage, chosen


StageCallback = Callable[[StageVector, NDArray[np.float64]], None]


class DynamicProgramSolver:
    """Threads stage vectors from the boundary back to t = 0."""

    def __init__(
        self,
        model: ReturnModel,
        hazards: HazardSchedule,
        discretization: Discretization,
        *,
        workers: int | None = 1,
        alpha_schedule: Sequence[float] | None = None,
        logger: logging.Logger | None = None,
    ) -> None:
        if alpha_schedule is not None and len(alpha_schedule) != hazards.stage_count:
            raise ValueError(
                f"alpha schedule has {len(alpha_schedule)} entries, "
                f"expected one per decision stage ({hazards.stage_count})"
            )
        if alpha_schedule is not None and any(not 0.0 <= a <= 1.0 for a in alpha_schedule):
            raise ValueError("alpha schedule entries must lie in [0, 1]")
        self.model = model
        self.hazards = hazards
        self.d = discretization
        self.workers = workers
        self.alpha_schedule = alpha_schedule
        self.log = logger or logging.getLogger(__name__)

    def _alphas(self, t: int) -> NDArray[np.float64] | None:
        if self.alpha_schedule is None:
            return None
        return np.array([self.alpha_schedule[t]], dtype=np.float64)

    def run(self, on_stage: StageCallback | None = None) -> PolicyGrid:
        s_max = self.hazards.s_max
        n = self.d.bucket_count
        v = np.empty((s_max, n))
        alpha = np.empty((s_max, n))
        overflow = np.empty(s_max)

        self.log.info(
            "solving %d stages x %d buckets (p_r=%d, p_alpha=%d, prune_power=%s)",
            s_max,
            n,
            self.d.p_r,
            self.d.p_alpha,
            self.d.prune_power,
        )
        nxt = StageVector.boundary(s_max, n, self.hazards.survival(s_max))
        with WorkerPool(self.workers, logger=self.log) as pool:
            for t in range(s_max - 1, -1, -1):
                nxt, row = solve_stage(
                    t,
                    nxt,
                    self.model,
                    self.hazards,
                    self.d,
                    alphas=self._alphas(t),
                    pool=pool,
                    logger=self.log,
                )
                v[t], alpha[t], overflow[t] = nxt.values, row, nxt.overflow
                if on_stage is not None:
                    on_stage(nxt, row)
        return PolicyGrid(p_r=self.d.p_r, rf_max=self.d.rf_max, v=v, alpha=alpha, overflow=overflow)


def solve(
    model: ReturnModel,
    h: HazardSchedule,
    d: Discretization,
    *,
    workers: int | None = 1,
    alpha_schedule: Sequence[float] | None = None,
    logger: logging.Logger | None = None,
) -> PolicyGrid:
    return DynamicProgramSolver(
        model, h, d, workers=workers, alpha_schedule=alpha_schedule, logger=logger
    ).run()
