"""Bucket transition probabilities and the one-stage value of an allocation.

Given RF(t) at a bucket midpoint, next period's ruin factor lands in bucket ``i``
exactly when the gross return falls between the images ``rf * (1 + P_R / (i +- 1/2))``
of that bucket's edges. Higher returns mean smaller RF, so bucket 1 collects the
right tail and the overflow bucket collects returns just above ``rf``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtr

from app.errors import StageDataError
from app.model.returns import NormalParams, normal_cdf
from app.model.ruin import Discretization

UPPER_SLACK = 2e-16
MONOTONE_SLACK = 1e-15


@dataclass(frozen=True)
class StageVector:
    """Values V(t, i) for buckets 1..N plus the overflow region.

    ``ceiling`` is the largest value any cell of the stage may hold, 1 - h(t).
    """

    t: int
    values: NDArray[np.float64]
    overflow: float
    ceiling: float

    @classmethod
    def boundary(cls, t: int, bucket_count: int, ceiling: float) -> StageVector:
        return cls(t=t, values=np.zeros(bucket_count), overflow=0.0, ceiling=ceiling)

    @property
    def bucket_count(self) -> int:
        return int(self.values.size)

    def value(self, i: int) -> float:
        """V at bucket ``i`` (1-based); ``bucket_count + 1`` is the overflow."""
        if i == self.bucket_count + 1:
            return self.overflow
        return float(self.values[i - 1])

    def full(self) -> NDArray[np.float64]:
        return np.append(self.values, self.overflow)


@dataclass(frozen=True)
class CompressedStage:
    """Run endpoints of equal values; each endpoint closes a run of equal V."""

    endpoints: NDArray[np.int64]
    values: NDArray[np.float64]
    overflow: float
    bucket_count: int

    @property
    def runs(self) -> int:
        return int(self.endpoints.size)


def compress_stage(next_stage: StageVector) -> CompressedStage:
    """Merge equal consecutive values; scanning stops once the ceiling is reached.

    Raises StageDataError on a value below zero, above the ceiling or decreasing.
    """
    v = next_stage.values
    n = next_stage.bucket_count
    ceiling = next_stage.ceiling

    prev = 0.0
    for b in range(1, n + 1):
        cur = v[b - 1]
        if cur < 0.0 or cur > ceiling + UPPER_SLACK or cur < prev - MONOTONE_SLACK:
            raise StageDataError(
                b,
                f"stage {next_stage.t} value {cur!r} breaks the range/monotone check "
                f"(previous {prev!r}, ceiling {ceiling!r})",
            )
        prev = cur

    marks = [1]
    if n > 2:
        inner = np.arange(2, n)
        changes = inner[v[inner - 1] != v[inner]]
        saturated = changes[v[changes] >= ceiling]
        if saturated.size:
            changes = changes[changes <= saturated[0]]
        marks.extend(int(b) for b in changes)
    if n > 1:
        marks.append(n)

    ends = np.asarray(marks, dtype=np.int64)
    return CompressedStage(
        endpoints=ends,
        values=v[ends - 1].copy(),
        overflow=next_stage.overflow,
        bucket_count=n,
    )


def uncompressed(next_stage: StageVector) -> CompressedStage:
    """Every bucket as its own run, for direct comparisons."""
    n = next_stage.bucket_count
    ends = np.arange(1, n + 1, dtype=np.int64)
    return CompressedStage(
        endpoints=ends,
        values=next_stage.values.copy(),
        overflow=next_stage.overflow,
        bucket_count=n,
    )


def _cdf(x: NDArray[np.float64], mean: NDArray[np.float64], std: NDArray[np.float64]):
    if np.all(std > 0.0):
        return ndtr((x - mean) / std)
    return normal_cdf(x, mean, std)


def conditional_expectation(
    rf: NDArray[np.float64],
    mean: NDArray[np.float64],
    std: NDArray[np.float64],
    comp: CompressedStage,
    p_r: int,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """F(rf) and E[V(t+1) | no ruin] for every (rf, law) pair.

    ``rf`` has shape (B, 1) and ``mean``/``std`` shape (1, M), giving (B, M) results.
    Runs are accumulated in bucket order so each cell is independent of the others.
    """
    cdf = _cdf(rf, mean, std)
    edges = p_r / (comp.endpoints.astype(np.float64) + 0.5)
    rhs = np.ones_like(cdf)
    acc = np.zeros_like(cdf)
    for edge, v in zip(edges, comp.values, strict=True):
        lhs = _cdf(rf * (1.0 + edge), mean, std)
        acc = acc + (rhs - lhs) * v
        rhs = lhs
    acc = acc + (rhs - cdf) * comp.overflow
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = acc / (1.0 - cdf)
    # Ruin certain next period: the expectation is never used beyond the overflow value.
    acc = np.where(cdf == 1.0, comp.overflow, acc)
    return cdf, acc


def low_form(cdf, expectation, hazard: float):
    """Value computed directly; accurate while it is small."""
    return (1.0 - hazard) * (cdf + expectation - cdf * expectation)


def high_form(cdf, expectation, hazard: float):
    """Same value computed through survival complements; accurate near one."""
    return 1.0 - (
        hazard + (1.0 - cdf) * (1.0 - expectation) - hazard * (1.0 - cdf) * (1.0 - expectation)
    )


def transition_pmf(rf: float, dist: NormalParams, d: Discretization) -> NDArray[np.float64]:
    """P(next bucket = i | no ruin) for i = 1..N+1 (last entry is overflow)."""
    if not rf > 0:
        raise ValueError(f"rf must be positive, got {rf}")
    mean = np.float64(dist.mean)
    std = np.float64(dist.std)
    n = d.bucket_count
    tail = normal_cdf(rf, mean, std)
    if tail == 1.0:
        raise ValueError(f"ruin is certain at rf={rf}; the transition pmf is undefined")
    images = rf * (1.0 + d.p_r / (np.arange(1, n + 1, dtype=np.float64) + 0.5))
    f = normal_cdf(images, mean, std)
    upper = np.concatenate(([1.0], f))
    lower = np.concatenate((f, [tail]))
    return (upper - lower) / (1.0 - tail)


def stage_value(
    rf: float,
    dist: NormalParams,
    next_stage: StageVector,
    survival: float,
    d: Discretization,
) -> float:
    """Probability of ruin from ``rf`` holding the law ``dist`` for one period.

    The tail is evaluated at the bucket midpoint; survival is P(T_D > t | T_D >= t).
    """
    hazard = 1.0 - survival
    comp = compress_stage(next_stage)
    cdf, e = conditional_expectation(
        np.array([[rf]]), np.array([[dist.mean]]), np.array([[dist.std]]), comp, d.p_r
    )
    v = low_form(cdf, e, hazard)
    if v[0, 0] > 0.5 * survival:
        v = high_form(cdf, e, hazard)
    return float(v[0, 0])
