"""Monte Carlo estimate of the probability of ruin under a given allocation strategy.

Everything is simulated in real terms: each period draws correlated real stock and
bond returns, blends them at the strategy's allocation, scales by (1 - E_R) and moves
the ruin factor. A path is ruined at the first withdrawal time t <= T_D whose gross
return does not exceed RF(t - 1).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from app.metrics import SIM_PATHS
from app.model.hazard import HazardSchedule
from app.model.returns import ReturnModel
from app.parallel import WorkerPool
from app.sim.rng import PATH_BLOCK, block_generator, path_blocks
from app.solver.dp import PolicyGrid

_GM_SALT = 1


class Strategy(Protocol):
    label: str

    def alphas(self, t: int, rf: NDArray[np.float64]) -> NDArray[np.float64]: ...

    def check(self, stages: int) -> None: ...


@dataclass(frozen=True)
class FixedAllocation:
    alpha: float
    label: str = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "label", f"fixed({self.alpha:g})")

    def alphas(self, t: int, rf: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.full(rf.shape, self.alpha)

    def check(self, stages: int) -> None:
        return None


@dataclass(frozen=True)
class GlidePath:
    """Predetermined allocation per decision stage, blind to the account's state."""

    schedule: tuple[float, ...]
    label: str = "glidepath"

    def __post_init__(self) -> None:
        if any(not 0.0 <= a <= 1.0 for a in self.schedule):
            raise ValueError("glide-path allocations must lie in [0, 1]")

    def alphas(self, t: int, rf: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.full(rf.shape, self.schedule[t])

    def check(self, stages: int) -> None:
        if len(self.schedule) != stages:
            raise ValueError(
                f"glide-path has {len(self.schedule)} entries, expected {stages} decision stages"
            )


@dataclass(frozen=True)
class GridPolicy:
    """Allocation read from a solved grid at the bucket holding RF(t); no interpolation."""

    grid: PolicyGrid
    label: str = "policy"

    def alphas(self, t: int, rf: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.grid.alphas_for(t, rf)

    def check(self, stages: int) -> None:
        if self.grid.stages < stages:
            raise ValueError(
                f"policy grid covers {self.grid.stages} stages, horizon needs {stages}"
            )


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    master_seed: int
    strategy: Strategy
    w_r: float
    horizon: HazardSchedule

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if not 0.0 < self.w_r < 1.0:
            raise ValueError(f"w_r must lie in (0, 1), got {self.w_r}")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        self.strategy.check(self.horizon.stage_count)


class SimResult(BaseModel):
    strategy: str = Field(description="Strategy label")
    n_paths: int = Field(ge=1, description="Simulated paths")
    ruined: int = Field(ge=0, description="Paths that hit ruin")
    estimate: float = Field(ge=0.0, le=1.0, description="Ruined fraction")
    std_error: float = Field(ge=0.0, description="Binomial standard error of the estimate")
    ruined_at: list[int] = Field(description="Ruin count per withdrawal time t = 0..S_Max")

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return self.estimate - z * self.std_error, self.estimate + z * self.std_error


class _Draws:
    """Correlated real stock/bond return sampler by conditional decomposition."""

    def __init__(self, model: ReturnModel) -> None:
        self.stock_mean = model.stock_mean
        self.bond_mean = model.bond_mean
        self.stock_std = math.sqrt(model.stock_var)
        self.bond_std = math.sqrt(model.bond_var)
        rho = model.correlation
        self.rho = rho
        self.rho_c = math.sqrt(max(0.0, 1.0 - rho * rho))

    def draw(self, rng: np.random.Generator, n: int) -> tuple[NDArray, NDArray]:
        z = rng.standard_normal((2, n))
        stock = self.stock_mean + self.stock_std * z[0]
        bond = self.bond_mean + self.bond_std * (self.rho * z[0] + self.rho_c * z[1])
        return stock, bond


def draw_horizons(
    rng: np.random.Generator, horizon: HazardSchedule, n: int
) -> NDArray[np.int64]:
    """T_D per path from the hazard schedule; fixed schedules are deterministic."""
    if horizon.fixed_horizon:
        return np.full(n, horizon.s_max, dtype=np.int64)
    cdf = horizon.td_cdf()
    cdf[-1] = 1.0
    u = rng.random(n)
    return np.minimum(np.searchsorted(cdf, u, side="right"), horizon.s_max).astype(np.int64)


def simulate_block(
    block: int, count: int, cfg: SimConfig, model: ReturnModel
) -> NDArray[np.int64]:
    """Ruin counts per time for one block of paths."""
    rng = block_generator(cfg.master_seed, block)
    s_max = cfg.horizon.s_max
    draws = _Draws(model)
    keep = 1.0 - model.expense_ratio

    td = draw_horizons(rng, cfg.horizon, count)
    rf = np.full(count, cfg.w_r)
    live = np.ones(count, dtype=bool)
    hist = np.zeros(s_max + 1, dtype=np.int64)
    for t in range(1, s_max + 1):
        stock, bond = draws.draw(rng, count)
        active = live & (td >= t)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        a = cfg.strategy.alphas(t - 1, rf[idx])
        r_hat = keep * (1.0 + a * stock[idx] + (1.0 - a) * bond[idx])
        prev = rf[idx]
        ruin = r_hat <= prev
        hist[t] += int(ruin.sum())
        live[idx[ruin]] = False
        ok = idx[~ruin]
        rf[ok] = prev[~ruin] / (r_hat[~ruin] - prev[~ruin])
    return hist


def simulate(
    cfg: SimConfig,
    model: ReturnModel,
    *,
    workers: int | None = 1,
    logger: logging.Logger | None = None,
) -> SimResult:
    log = logger or logging.getLogger(__name__)
    blocks = path_blocks(cfg.n_paths, PATH_BLOCK)
    with WorkerPool(workers, logger=log) as pool:
        hists = pool.map(simulate_block, [(b, n, cfg, model) for b, n in blocks])
    hist = np.sum(hists, axis=0)
    ruined = int(hist.sum())
    p = ruined / cfg.n_paths
    se = math.sqrt(p * (1.0 - p) / cfg.n_paths)
    SIM_PATHS.labels(cfg.strategy.label).inc(cfg.n_paths)
    log.info(
        "simulated %d paths (%s, w_r=%g): p_ruin=%.6f se=%.6f",
        cfg.n_paths,
        cfg.strategy.label,
        cfg.w_r,
        p,
        se,
    )
    return SimResult(
        strategy=cfg.strategy.label,
        n_paths=cfg.n_paths,
        ruined=ruined,
        estimate=p,
        std_error=se,
        ruined_at=[int(x) for x in hist],
    )


class FixedAlphaScan(BaseModel):
    results: list[SimResult] = Field(description="One simulation per fixed allocation")
    alphas: list[float] = Field(description="Allocations scanned, in order")
    best_alpha: float = Field(description="Allocation with the smallest estimate")
    best: SimResult = Field(description="Simulation at the best allocation")


def default_alpha_scan() -> list[float]:
    return [round(0.05 * i, 2) for i in range(21)]


def best_fixed_alpha(
    model: ReturnModel,
    horizon: HazardSchedule,
    w_r: float,
    *,
    n_paths: int,
    seed: int,
    alphas: Sequence[float] | None = None,
    workers: int | None = 1,
    logger: logging.Logger | None = None,
) -> FixedAlphaScan:
    """Simulate each fixed allocation on the same seed and keep the best."""
    grid = list(alphas) if alphas is not None else default_alpha_scan()
    if not grid:
        raise ValueError("at least one allocation is required")
    results = [
        simulate(
            SimConfig(n_paths, seed, FixedAllocation(a), w_r, horizon),
            model,
            workers=workers,
            logger=logger,
        )
        for a in grid
    ]
    best_i = min(range(len(grid)), key=lambda i: results[i].estimate)
    return FixedAlphaScan(
        results=results, alphas=grid, best_alpha=grid[best_i], best=results[best_i]
    )


def improvement_ratio(suboptimal: float, optimal: float) -> float:
    """Relative reduction in ruin probability: 1 - optimal / suboptimal."""
    if suboptimal <= 0.0:
        raise ValueError("suboptimal probability must be positive")
    return 1.0 - optimal / suboptimal


class GeometricMeanReport(BaseModel):
    stock_gm: float = Field(description="Average per-history geometric mean real stock return")
    bond_gm: float = Field(description="Average per-history geometric mean real bond return")
    stock_discarded: int = Field(ge=0, description="Stock histories dropped as outliers")
    bond_discarded: int = Field(ge=0, description="Bond histories dropped as outliers")
    n_reps: int = Field(ge=1, description="Simulated histories")


def _gm_block(
    block: int, count: int, years: int, seed: int, model: ReturnModel
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    rng = block_generator(seed, block, salt=_GM_SALT)
    draws = _Draws(model)
    stock = np.empty((count, years))
    bond = np.empty((count, years))
    for y in range(years):
        stock[:, y], bond[:, y] = draws.draw(rng, count)

    def gm(r: NDArray[np.float64]) -> NDArray[np.float64]:
        gross = 1.0 + r
        bad = np.any(gross <= 0.0, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.exp(np.mean(np.log(gross), axis=1)) - 1.0
        out[bad] = np.nan
        return out

    return gm(stock), gm(bond)


def _trimmed_mean(gms: NDArray[np.float64]) -> tuple[float, int]:
    """Drop histories with a non-positive gross return and as many from the top tail."""
    bad = int(np.isnan(gms).sum())
    good = np.sort(gms[~np.isnan(gms)])
    if bad:
        good = good[: good.size - bad]
    if good.size == 0:
        raise ValueError("every simulated history was discarded")
    return float(good.mean()), 2 * bad


def geometric_mean_check(
    model: ReturnModel,
    years: int,
    n_reps: int,
    seed: int,
    *,
    workers: int | None = 1,
    logger: logging.Logger | None = None,
) -> GeometricMeanReport:
    log = logger or logging.getLogger(__name__)
    if years < 2:
        raise ValueError(f"years must be >= 2, got {years}")
    blocks = path_blocks(n_reps, max(1, PATH_BLOCK // 8))
    with WorkerPool(workers, logger=log) as pool:
        parts = pool.map(_gm_block, [(b, n, years, seed, model) for b, n in blocks])
    stock_gm, stock_drop = _trimmed_mean(np.concatenate([p[0] for p in parts]))
    bond_gm, bond_drop = _trimmed_mean(np.concatenate([p[1] for p in parts]))
    log.info(
        "geometric means over %d histories of %d years: stock=%.5f bond=%.5f "
        "(discarded %d/%d)",
        n_reps,
        years,
        stock_gm,
        bond_gm,
        stock_drop,
        bond_drop,
    )
    return GeometricMeanReport(
        stock_gm=stock_gm,
        bond_gm=bond_gm,
        stock_discarded=stock_drop,
        bond_discarded=bond_drop,
        n_reps=n_reps,
    )
