from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import ndtr

# Correlation checks allow for the rounding of published variance/covariance triples.
_COV_TOLERANCE = 1e-12


class NormalParams(BaseModel):
    """Normal law of the gross real portfolio multiplier for one period."""

    model_config = ConfigDict(frozen=True)

    mean: float = Field(description="Mean of the gross multiplier (centered near 1)")
    std: float = Field(ge=0.0, description="Standard deviation of the gross multiplier")


class ReturnModel(BaseModel):
    """Joint real stock/bond return law plus the per-period expense ratio.

    Stored as variances and a covariance, the same fields the control file carries.
    """

    model_config = ConfigDict(frozen=True)

    stock_mean: float = Field(description="Real annual stock return mean")
    stock_var: float = Field(ge=0.0, description="Real annual stock return variance")
    bond_mean: float = Field(description="Real annual bond return mean")
    bond_var: float = Field(ge=0.0, description="Real annual bond return variance")
    stock_bond_cov: float = Field(description="Covariance of real stock and bond returns")
    expense_ratio: float = Field(
        default=0.0, ge=0.0, lt=1.0, description="Fraction of the portfolio paid per period"
    )

    @model_validator(mode="after")
    def _valid_correlation(self) -> ReturnModel:
        bound = math.sqrt(self.stock_var * self.bond_var)
        if abs(self.stock_bond_cov) > bound + _COV_TOLERANCE:
            raise ValueError(
                f"covariance {self.stock_bond_cov} exceeds sqrt(stock_var*bond_var) = {bound}"
            )
        return self

    @classmethod
    def from_std_corr(
        cls,
        *,
        stock_mean: float,
        stock_std: float,
        bond_mean: float,
        bond_std: float,
        correlation: float,
        expense_ratio: float = 0.0,
    ) -> ReturnModel:
        if not -1.0 <= correlation <= 1.0:
            raise ValueError(f"correlation must lie in [-1, 1], got {correlation}")
        return cls(
            stock_mean=stock_mean,
            stock_var=stock_std * stock_std,
            bond_mean=bond_mean,
            bond_var=bond_std * bond_std,
            stock_bond_cov=correlation * stock_std * bond_std,
            expense_ratio=expense_ratio,
        )

    @property
    def correlation(self) -> float:
        denom = math.sqrt(self.stock_var * self.bond_var)
        return self.stock_bond_cov / denom if denom > 0 else 0.0

    def with_expense_ratio(self, expense_ratio: float) -> ReturnModel:
        return self.model_copy(update={"expense_ratio": expense_ratio})


# Real S&P 500 / 10-year T-bond moments shipped in the sample control files.
BASELINE_MODEL = ReturnModel(
    stock_mean=0.082509,
    stock_var=0.0402696529,
    bond_mean=0.021409,
    bond_var=0.0069605649,
    stock_bond_cov=0.0007344180,
    expense_ratio=0.0,
)


def _check_alphas(alphas: NDArray[np.float64]) -> None:
    if alphas.size and (np.any(alphas < 0.0) or np.any(alphas > 1.0) or np.any(np.isnan(alphas))):
        raise ValueError("alpha must lie in [0, 1]")


def portfolio_moments(
    model: ReturnModel, alphas: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Vectorized mean and std of the expense-adjusted gross multiplier per alpha."""
    a = np.asarray(alphas, dtype=np.float64)
    _check_alphas(a)
    keep = 1.0 - model.expense_ratio
    b = 1.0 - a
    mean = keep * (1.0 + a * model.stock_mean + b * model.bond_mean)
    var = (a * a) * model.stock_var + (b * b) * model.bond_var + 2.0 * a * b * model.stock_bond_cov
    # Rounding can push the variance of a perfectly hedged blend a hair below zero.
    std = keep * np.sqrt(np.maximum(var, 0.0))
    return mean, std


def portfolio_dist(model: ReturnModel, alpha: float) -> NormalParams:
    """Distribution of the gross real return of a stock fraction ``alpha``."""
    mean, std = portfolio_moments(model, np.array([alpha]))
    return NormalParams(mean=float(mean[0]), std=float(std[0]))


def normal_cdf(x: ArrayLike, mean: ArrayLike, std: ArrayLike) -> NDArray[np.float64]:
    """P(r <= x) for normal laws, broadcasting over all arguments.

    A zero std is a point mass at the mean; x equal to the mean counts as below.
    """
    x = np.asarray(x, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (x - mean) / std
        out = ndtr(z)
    step = np.where(x >= mean, 1.0, 0.0)
    return np.where(std > 0.0, out, step)


def return_cdf(dist: NormalParams, x: float) -> float:
    if dist.std == 0.0:
        return 1.0 if x >= dist.mean else 0.0
    return float(ndtr((x - dist.mean) / dist.std))


def min_variance_alpha(model: ReturnModel) -> float:
    """Stock fraction of the minimum-variance blend, clipped to [0, 1]."""
    denom = model.stock_var + model.bond_var - 2.0 * model.stock_bond_cov
    if denom <= 0.0:
        return 0.0
    return min(max((model.bond_var - model.stock_bond_cov) / denom, 0.0), 1.0)
