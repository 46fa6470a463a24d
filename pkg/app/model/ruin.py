"""Ruin-factor state machine and bucket geometry.

RF(t) is the reciprocal of the number of real withdrawals the account can still fund.
It moves by ``RF(t) = RF(t-1) / (r - RF(t-1))`` and the account is ruined at the first
period whose gross real return ``r`` does not exceed RF(t-1).
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Ruin(Enum):
    """Terminal marker for a ruined account; never a number."""

    RUINED = "ruined"


RUINED = Ruin.RUINED

RuinFactor = float | Literal[Ruin.RUINED]


def _require_positive(rf: float, name: str = "rf") -> None:
    if not rf > 0:
        raise ValueError(f"{name} must be positive, got {rf}")


def is_ruin(rf_prev: float, r_hat: float) -> bool:
    """True when the gross return cannot cover the withdrawal; equality is ruin."""
    _require_positive(rf_prev, "rf_prev")
    return r_hat <= rf_prev


def next_ruin_factor(rf_prev: float, r_hat: float) -> RuinFactor:
    _require_positive(rf_prev, "rf_prev")
    if r_hat <= rf_prev:
        return RUINED
    return rf_prev / (r_hat - rf_prev)


def required_return(rf_prev: float, rf_next: float) -> float:
    """Gross real return that moves the ruin factor from ``rf_prev`` to ``rf_next``."""
    _require_positive(rf_prev, "rf_prev")
    _require_positive(rf_next, "rf_next")
    return rf_prev * (1.0 + 1.0 / rf_next)


class RuinFactorState(BaseModel):
    """A retiree's position on the ruin-factor axis at time ``t``."""

    model_config = ConfigDict(frozen=True)

    t: int = Field(ge=0, description="Time index; 0 is the first allocation decision")
    rf: float | Ruin = Field(description="Current ruin factor or the ruined marker")

    @field_validator("rf")
    @classmethod
    def _positive(cls, v: float | Ruin) -> float | Ruin:
        if v is not RUINED and not v > 0:
            raise ValueError("rf must be positive while un-ruined")
        return v

    @classmethod
    def start(cls, w_r: float) -> RuinFactorState:
        return cls(t=0, rf=w_r)

    @property
    def ruined(self) -> bool:
        return self.rf is RUINED

    @property
    def withdrawals_remaining(self) -> float:
        if self.rf is RUINED:
            return 0.0
        return 1.0 / self.rf

    def advance(self, r_hat: float) -> RuinFactorState:
        if self.rf is RUINED:
            return self.model_copy(update={"t": self.t + 1})
        return RuinFactorState(t=self.t + 1, rf=next_ruin_factor(self.rf, r_hat))


class AccountSnapshot(BaseModel):
    model_config = ConfigDict(frozen=True)

    initial_balance: float = Field(gt=0.0, description="Standard-form starting balance $A")
    rf0: float = Field(gt=0.0, description="Initial withdrawal rate W_R = RF(0)")
    rf_t: float = Field(gt=0.0, description="Current ruin factor RF(t)")


def real_balance(snap: AccountSnapshot) -> float:
    """Real balance implied by the ruin factor: $A * RF(0) / RF(t)."""
    return snap.initial_balance * snap.rf0 / snap.rf_t


def rf_from_balance(initial_balance: float, w_r: float, balance: float) -> float:
    """Inverse of :func:`real_balance`: RF(t) for a real balance."""
    if balance <= 0:
        raise ValueError("balance must be positive; a non-positive balance is ruin")
    return initial_balance * w_r / balance


class RebasePlan(BaseModel):
    """Restarting the plan at the current balance with a new ruin factor."""

    model_config = ConfigDict(frozen=True)

    balance_ratio: float = Field(description="Current real balance as a multiple of $A")
    new_rf0: float = Field(description="Ruin factor the restarted plan begins with")
    withdrawal_rate_on_initial: float = Field(
        description="New real withdrawal as a fraction of the original $A"
    )


def rebase_withdrawal(snap: AccountSnapshot, target_rf: float) -> RebasePlan:
    _require_positive(target_rf, "target_rf")
    ratio = real_balance(snap) / snap.initial_balance
    return RebasePlan(
        balance_ratio=ratio,
        new_rf0=target_rf,
        withdrawal_rate_on_initial=target_rf * ratio,
    )


def to_standard_form(balance_b: float, w_r: float) -> tuple[float, float]:
    """Convert a balance before the first withdrawal into standard form.

    Returns ``(balance_a, w_0)`` with ``w_0 * balance_b == w_r * balance_a``.
    """
    if not 0 < w_r < 1:
        raise ValueError(f"w_r must lie in (0, 1), got {w_r}")
    _require_positive(balance_b, "balance_b")
    w_0 = w_r / (1.0 + w_r)
    return balance_b * (1.0 - w_0), w_0


class Discretization(BaseModel):
    """Ruin-factor buckets and the allocation search grid."""

    model_config = ConfigDict(frozen=True)

    p_r: int = Field(ge=1, description="Ruin-factor precision P_R (buckets per unit RF)")
    p_alpha: int = Field(ge=1, description="Allocation precision P_alpha")
    rf_max: float = Field(gt=0.0, description="Largest bucket midpoint RF_Max")
    prune_power: float = Field(
        default=4.0,
        ge=0.0,
        description="Decimal places of the stage maximum at which pruning starts; inf disables",
    )
    alpha_subset: tuple[float, ...] | None = Field(
        default=None,
        description="Restrict the search to these allocations instead of the full grid",
    )

    @field_validator("alpha_subset")
    @classmethod
    def _subset_in_range(cls, v: tuple[float, ...] | None) -> tuple[float, ...] | None:
        if v is None:
            return v
        if not v:
            raise ValueError("alpha_subset must not be empty")
        if any(not 0.0 <= a <= 1.0 for a in v):
            raise ValueError("alpha_subset values must lie in [0, 1]")
        if list(v) != sorted(set(v)):
            raise ValueError("alpha_subset must be strictly increasing")
        return v

    @model_validator(mode="after")
    def _has_buckets(self) -> Discretization:
        if self.bucket_count < 1:
            raise ValueError("rf_max * p_r must round to at least one bucket")
        return self

    @property
    def bucket_count(self) -> int:
        return int(self.rf_max * self.p_r + 0.5)

    @property
    def overflow_bucket(self) -> int:
        return self.bucket_count + 1

    @property
    def alpha_grid(self) -> NDArray[np.float64]:
        return np.arange(self.p_alpha + 1, dtype=np.float64) / self.p_alpha

    @property
    def alpha_values(self) -> NDArray[np.float64]:
        if self.alpha_subset is not None:
            return np.asarray(self.alpha_subset, dtype=np.float64)
        return self.alpha_grid

    @property
    def prunes(self) -> bool:
        return math.isfinite(self.prune_power)

    def with_alphas(self, alphas: tuple[float, ...] | None) -> Discretization:
        return self.model_copy(update={"alpha_subset": alphas})

    def upper_edge(self, i: ArrayLike) -> NDArray[np.float64]:
        """Right (closed) edge of bucket ``i``: (i + 1/2) / P_R."""
        return (np.asarray(i, dtype=np.float64) + 0.5) / self.p_r


def bucket_midpoint(i: int, d: Discretization) -> float:
    if not 1 <= i <= d.bucket_count:
        raise ValueError(f"bucket {i} has no midpoint (valid 1..{d.bucket_count})")
    return i / d.p_r


def bucket_indices(rf: ArrayLike, d: Discretization) -> NDArray[np.int64]:
    """Vectorized :func:`bucket_index`; edges are compared exactly as computed."""
    x = np.asarray(rf, dtype=np.float64)
    if np.any(~(x > 0)):
        raise ValueError("rf must be positive")
    n = d.bucket_count
    # Clamp before the cast: x * P_R past the int64 range (or inf) is overflow.
    guess = np.clip(np.ceil(x * d.p_r - 0.5), 1, n + 1).astype(np.int64)
    # Settle float noise against the edges (i + 1/2) / P_R.
    up = (guess <= n) & (x > d.upper_edge(guess))
    guess = np.where(up, guess + 1, guess)
    down = (guess > 1) & (x <= d.upper_edge(guess - 1))
    guess = np.where(down, guess - 1, guess)
    return guess


def bucket_index(rf: float, d: Discretization) -> int:
    """Bucket holding ``rf``; ``bucket_count + 1`` is the overflow region."""
    _require_positive(rf)
    return int(bucket_indices(np.array([rf]), d)[0])
