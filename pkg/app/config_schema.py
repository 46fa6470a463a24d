from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.model.hazard import (
    AgeTable,
    HazardSchedule,
    Member,
    MpuSpec,
    derive_hazards,
    fixed_horizon_schedule,
)
from app.model.returns import ReturnModel
from app.model.ruin import Discretization


class ControlConfig(BaseModel):
    """Typed form of the three-line control file."""

    model_config = ConfigDict(frozen=True)

    # line 1
    stock_mean: float = Field(description="Real annual stock return mean")
    stock_var: float = Field(ge=0.0, description="Real annual stock return variance")
    bond_mean: float = Field(description="Real annual bond return mean")
    bond_var: float = Field(ge=0.0, description="Real annual bond return variance")
    stock_bond_cov: float = Field(description="Stock/bond return covariance")
    rf_max: float = Field(gt=0.0, description="Largest ruin-factor bucket midpoint")
    e_r: float = Field(ge=0.0, lt=1.0, description="Expense ratio per period")
    prune_power: float = Field(ge=0.0, description="Pruning precision in decimals; inf disables")
    # line 2
    p_r: int = Field(ge=1, description="Ruin-factor precision")
    p_alpha: int = Field(ge=1, description="Allocation precision")
    # line 3
    t_d: int | None = Field(default=None, ge=1, description="Fixed horizon in years")
    members: tuple[Member, ...] = Field(
        default=(), description="MPU members for a random horizon"
    )

    @model_validator(mode="after")
    def _one_horizon(self) -> ControlConfig:
        if (self.t_d is None) == (not self.members):
            raise ValueError("exactly one of t_d (fixed horizon) or members (random) is required")
        return self

    @property
    def fixed_horizon(self) -> bool:
        return self.t_d is not None

    @property
    def num_random(self) -> int:
        return len(self.members)

    def return_model(self) -> ReturnModel:
        return ReturnModel(
            stock_mean=self.stock_mean,
            stock_var=self.stock_var,
            bond_mean=self.bond_mean,
            bond_var=self.bond_var,
            stock_bond_cov=self.stock_bond_cov,
            expense_ratio=self.e_r,
        )

    def discretization(self) -> Discretization:
        return Discretization(
            p_r=self.p_r, p_alpha=self.p_alpha, rf_max=self.rf_max, prune_power=self.prune_power
        )

    def mpu(self) -> MpuSpec:
        if not self.members:
            raise ValueError("fixed-horizon configuration has no MPU")
        return MpuSpec(members=self.members)

    def horizon(self, age_table: AgeTable | None = None) -> HazardSchedule:
        if self.t_d is not None:
            return fixed_horizon_schedule(self.t_d)
        if age_table is None:
            raise ValueError("a random horizon needs an age table")
        mpu = self.mpu()
        mpu.validate_against(age_table)
        return derive_hazards(age_table, mpu)


class SimulationProfile(BaseModel):
    paths: int = Field(ge=1, description="Monte Carlo paths")
    seed: int = Field(default=0, ge=0, description="Master seed")
    w_r: float = Field(gt=0.0, lt=1.0, description="Initial withdrawal rate")
    fixed_alpha: float | None = Field(
        default=None,
        ge=0.0,
        le=1.0,
        description="Simulate this constant allocation; the solved policy is used when unset",
    )


class RunProfile(BaseModel):
    name: str = Field(min_length=1, description="Unique profile name")
    description: str = Field(default="", description="What the run reproduces")
    control: ControlConfig = Field(description="Solver inputs, same fields as the control file")
    age_table: str | None = Field(default=None, description="Path to an ageprobs.txt table")
    workers: int | None = Field(default=None, ge=0, description="Worker processes; 0 = all cores")
    output_dir: str = Field(default="out", description="Directory for result files")
    keep_hazards: bool = Field(
        default=False, description="Reuse an existing hrates.txt instead of re-deriving"
    )
    simulation: SimulationProfile | None = Field(default=None, description="Optional check run")

    @field_validator("control", mode="before")
    @classmethod
    def _inf_prune(cls, v: object) -> object:
        # "inf" as a plain string, alongside YAML's own .inf
        if isinstance(v, dict) and str(v.get("prune_power", "")).lower() in {"inf", "none"}:
            return {**v, "prune_power": math.inf}
        return v

    @model_validator(mode="after")
    def _random_needs_table(self) -> RunProfile:
        if not self.control.fixed_horizon and self.age_table is None:
            raise ValueError(f"profile '{self.name}': a random horizon needs age_table")
        return self
