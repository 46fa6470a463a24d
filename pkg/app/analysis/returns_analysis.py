"""Serial-dependence diagnostics for annual return series.

Autocorrelations use the biased estimator (denominator over the full series) around the
full-series mean, which keeps every Yule-Walker Toeplitz matrix positive semidefinite.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, Field

from app.errors import SingularSystemError, ZeroVarianceError

WHITENESS_Z = 2.0


@dataclass(frozen=True)
class Series:
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("series must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def of(cls, values: ArrayLike) -> Series:
        return cls(np.asarray(values, dtype=np.float64))

    @property
    def n(self) -> int:
        return int(self.values.size)


class SampleMoments(BaseModel):
    n: int = Field(ge=2, description="Observations")
    mean: float = Field(description="Sample mean")
    std: float = Field(ge=0.0, description="Sample standard deviation (n - 1 denominator)")
    var: float = Field(ge=0.0, description="Sample variance (n - 1 denominator)")


def sample_moments(s: Series) -> SampleMoments:
    if s.n < 2:
        raise ValueError(f"moments need at least 2 observations, got {s.n}")
    var = float(np.var(s.values, ddof=1))
    return SampleMoments(n=s.n, mean=float(s.values.mean()), std=math.sqrt(var), var=var)


def _check_lag(s: Series, max_lag: int) -> None:
    if not 1 <= max_lag <= s.n - 1:
        raise ValueError(f"max_lag must lie in 1..{s.n - 1}, got {max_lag}")


def acf(s: Series, max_lag: int) -> NDArray[np.float64]:
    """r(1..max_lag)."""
    _check_lag(s, max_lag)
    dev = s.values - s.values.mean()
    denom = float(np.dot(dev, dev))
    if denom == 0.0:
        raise ZeroVarianceError("series has zero variance; autocorrelation is undefined")
    n = s.n
    return np.array([np.dot(dev[: n - k], dev[k:]) / denom for k in range(1, max_lag + 1)])


def yule_walker(r: NDArray[np.float64], order: int) -> NDArray[np.float64]:
    """AR(order) coefficients from autocorrelations ``r`` (lags 1.., r(0) = 1 implied)."""
    col = np.concatenate(([1.0], r[: order - 1]))
    system = scipy.linalg.toeplitz(col)
    try:
        phi = scipy.linalg.solve(system, r[:order], assume_a="sym")
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(order) from exc
    if not np.all(np.isfinite(phi)):
        raise SingularSystemError(order)
    return phi


def pacf_yule_walker(s: Series, max_lag: int) -> NDArray[np.float64]:
    """phi_hat(k) for k = 1..max_lag: last coefficient of each fitted AR(k)."""
    r = acf(s, max_lag)
    return np.array([yule_walker(r, k)[-1] for k in range(1, max_lag + 1)])


def whiteness_threshold(n: int) -> float:
    return WHITENESS_Z / math.sqrt(n)


class LagRow(BaseModel):
    lag: int = Field(ge=1)
    acf: float
    pacf: float
    acf_flag: bool = Field(description="|acf| exceeds the threshold")
    pacf_flag: bool = Field(description="|pacf| exceeds the threshold")


class WhitenessReport(BaseModel):
    n: int
    threshold: float = Field(description="2 / sqrt(n)")
    moments: SampleMoments
    lags: list[LagRow]

    @property
    def flagged(self) -> list[int]:
        return [row.lag for row in self.lags if row.acf_flag or row.pacf_flag]

    @property
    def acf_flagged(self) -> list[int]:
        return [row.lag for row in self.lags if row.acf_flag]

    def render(self) -> str:
        lines = [
            f"n={self.n} mean={self.moments.mean:.6f} std={self.moments.std:.6f} "
            f"threshold={self.threshold:.5f}",
            f"{'lag':>4} {'acf':>10} {'pacf':>10}  flags",
        ]
        for row in self.lags:
            flags = ("A" if row.acf_flag else "-") + ("P" if row.pacf_flag else "-")
            lines.append(f"{row.lag:>4} {row.acf:>10.5f} {row.pacf:>10.5f}  {flags}")
        return "\n".join(lines)


def whiteness_report(s: Series, max_lag: int) -> WhitenessReport:
    r = acf(s, max_lag)
    p = pacf_yule_walker(s, max_lag)
    thr = whiteness_threshold(s.n)
    rows = [
        LagRow(
            lag=k,
            acf=float(r[k - 1]),
            pacf=float(p[k - 1]),
            acf_flag=bool(abs(r[k - 1]) > thr),
            pacf_flag=bool(abs(p[k - 1]) > thr),
        )
        for k in range(1, max_lag + 1)
    ]
    return WhitenessReport(n=s.n, threshold=thr, moments=sample_moments(s), lags=rows)


def ar_roots(phi: ArrayLike) -> list[complex]:
    """Roots of 1 - phi_1 B - phi_2 B^2 for AR(1) or AR(2)."""
    coef = [float(c) for c in np.atleast_1d(np.asarray(phi, dtype=np.float64))]
    if len(coef) == 1 or (len(coef) == 2 and coef[1] == 0.0):
        if coef[0] == 0.0:
            return []
        return [complex(1.0 / coef[0])]
    if len(coef) != 2:
        raise ValueError(f"root check supports AR(1) and AR(2), got AR({len(coef)})")
    p1, p2 = coef
    # phi_2 B^2 + phi_1 B - 1 = 0
    disc = cmath.sqrt(p1 * p1 + 4.0 * p2)
    return [(-p1 + disc) / (2.0 * p2), (-p1 - disc) / (2.0 * p2)]


def ar_roots_ok(phi: ArrayLike) -> bool:
    """True when every characteristic root lies outside the unit circle."""
    return all(abs(z) > 1.0 for z in ar_roots(phi))


def load_series(path: Path | str) -> Series:
    """One value per line; blank lines and ``#`` comments are skipped."""
    values: list[float] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        token = line.split()[0].rstrip(",")
        try:
            values.append(float(token))
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: not a number: {token!r}") from exc
    return Series.of(values)
