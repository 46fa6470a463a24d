"""Discrete-time hazards P(T_D = t | T_D >= t) for a person or a multi-person unit.

The unit's horizon T_D is the last member's remaining lifetime, so its CDF is the
product of the members' conditional CDFs. Members' lifetimes are independent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.errors import AgeTableError, MemberAgeError

SUM_TOLERANCE = 1e-15


class Gender(str, Enum):
    MALE = "M"
    FEMALE = "F"

    @classmethod
    def parse(cls, token: str) -> Gender:
        return cls(token.strip().upper())


@dataclass(frozen=True)
class AgeTable:
    """Per-age death probabilities by gender, indexed from ``start_age``."""

    start_age: int
    male_pmf: tuple[float, ...]
    female_pmf: tuple[float, ...]
    max_male_age: int
    max_female_age: int

    @property
    def end_age(self) -> int:
        return self.start_age + len(self.male_pmf) - 1

    def pmf(self, gender: Gender) -> tuple[float, ...]:
        return self.male_pmf if gender is Gender.MALE else self.female_pmf

    def max_age(self, gender: Gender) -> int:
        return self.max_male_age if gender is Gender.MALE else self.max_female_age

    def probability(self, gender: Gender, age: int) -> float:
        return self.pmf(gender)[age - self.start_age]


class Member(BaseModel):
    model_config = ConfigDict(frozen=True)

    gender: Gender = Field(description="M or F")
    age: int = Field(ge=0, description="Age at the start of retirement")

    @field_validator("gender", mode="before")
    @classmethod
    def _upper(cls, v: object) -> object:
        return v.strip().upper() if isinstance(v, str) else v


class MpuSpec(BaseModel):
    """A multi-person unit drawing from one pooled account."""

    model_config = ConfigDict(frozen=True)

    members: tuple[Member, ...] = Field(min_length=1, description="Pooled retirees")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> MpuSpec:
        return cls(members=tuple(Member(gender=g, age=a) for g, a in pairs))

    def validate_against(self, table: AgeTable) -> None:
        for i, m in enumerate(self.members, start=1):
            if m.age < table.start_age:
                raise MemberAgeError(
                    f"member {i} ({m.gender.value} {m.age}) is younger than the table "
                    f"start age {table.start_age}"
                )
            if m.age > table.max_age(m.gender):
                raise MemberAgeError(
                    f"member {i} ({m.gender.value} {m.age}) is older than the maximum "
                    f"{m.gender.value} age {table.max_age(m.gender)}"
                )


@dataclass(frozen=True)
class HazardSchedule:
    """h(t) for t = 0..S_Max; decisions are made at t = 0..S_Max-1."""

    hazards: NDArray[np.float64]
    fixed_horizon: bool = False
    member_pmf_sums: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        h = np.asarray(self.hazards, dtype=np.float64)
        if h.ndim != 1 or h.size < 2:
            raise ValueError("a hazard schedule needs at least two time points")
        if np.any(h < 0.0) or np.any(h > 1.0):
            raise ValueError("hazards must lie in [0, 1]")
        h.setflags(write=False)
        object.__setattr__(self, "hazards", h)

    @property
    def s_max(self) -> int:
        return int(self.hazards.size - 1)

    @property
    def stage_count(self) -> int:
        return self.s_max

    def hazard(self, t: int) -> float:
        return float(self.hazards[t])

    def survival(self, t: int) -> float:
        """P(T_D > t | T_D >= t)."""
        return 1.0 - float(self.hazards[t])

    def td_pmf(self) -> NDArray[np.float64]:
        """Unconditional P(T_D = t) implied by the hazards."""
        alive = np.concatenate(([1.0], np.cumprod(1.0 - self.hazards)[:-1]))
        return alive * self.hazards

    def td_cdf(self) -> NDArray[np.float64]:
        return np.cumsum(self.td_pmf())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HazardSchedule):
            return NotImplemented
        return np.array_equal(self.hazards, other.hazards)

    def __hash__(self) -> int:
        return hash(self.hazards.tobytes())


def parse_age_table(text: str) -> AgeTable:
    ages: list[int] = []
    male: list[float] = []
    female: list[float] = []
    lines = text.rstrip().splitlines()
    if not lines:
        raise AgeTableError(None, "table is empty")
    for row, line in enumerate(lines, start=1):
        parts = line.split()
        if len(parts) != 3:
            raise AgeTableError(row, f"expected 'age male_prob female_prob', got {line!r}")
        try:
            age = int(parts[0])
            pm = float(parts[1])
            pf = float(parts[2])
        except ValueError as exc:
            raise AgeTableError(row, f"non-numeric value in {line!r}") from exc
        if ages and age != ages[-1] + 1:
            raise AgeTableError(row, f"age {age} does not follow {ages[-1]}")
        if pm < 0.0 or pf < 0.0:
            raise AgeTableError(row, f"negative probability at age {age}")
        ages.append(age)
        male.append(pm)
        female.append(pf)

    for name, col in (("male", male), ("female", female)):
        total = 0.0
        for p in reversed(col):
            total += p
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise AgeTableError(None, f"{name} column sums to {total!r}, not 1")

    def _last_positive(col: list[float]) -> int:
        positive = [a for a, p in zip(ages, col, strict=True) if p > 0.0]
        if not positive:
            raise AgeTableError(None, "column has no positive probability")
        return positive[-1]

    return AgeTable(
        start_age=ages[0],
        male_pmf=tuple(male),
        female_pmf=tuple(female),
        max_male_age=_last_positive(male),
        max_female_age=_last_positive(female),
    )


def load_age_table(source: Path | str) -> AgeTable:
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise AgeTableError(None, f"cannot read {path}: {exc}") from exc
    return parse_age_table(text)


def horizon_years(table: AgeTable, mpu: MpuSpec) -> int:
    """S_Max: the largest remaining lifetime among the members."""
    mpu.validate_against(table)
    return max(table.max_age(m.gender) - m.age for m in mpu.members)


def member_pmf(table: AgeTable, member: Member, length: int) -> list[float]:
    """Remaining-lifetime PMF of one member re-indexed to t = 0, zero padded."""
    probs = table.pmf(member.gender)
    first = member.age - table.start_age
    remaining = 0.0
    for j in range(len(probs) - 1, first - 1, -1):
        remaining += probs[j]
    out = [0.0] * length
    for j in range(table.max_age(member.gender) - member.age + 1):
        out[j] = probs[first + j] / remaining
    return out


def derive_hazards(
    table: AgeTable, mpu: MpuSpec, *, logger: logging.Logger | None = None
) -> HazardSchedule:
    log = logger or logging.getLogger(__name__)
    s_max = horizon_years(table, mpu)
    length = s_max + 1

    td_cdf: list[float] = [0.0] * length
    sums: list[float] = []
    for i, m in enumerate(mpu.members):
        pmf = member_pmf(table, m, length)
        total = 0.0
        for p in pmf:
            total += p
        sums.append(total)
        if abs(total - 1.0) > SUM_TOLERANCE:
            log.warning("member %d pmf sums to %.20f, not 1", i + 1, total)
        running = 0.0
        for j in range(length):
            running += pmf[j]
            td_cdf[j] = running if i == 0 else td_cdf[j] * running

    hazards = [0.0] * length
    hazards[0] = td_cdf[0]
    for j in range(1, length):
        denom = 1.0 - td_cdf[j - 1]
        hazards[j] = 1.0 if denom == 0.0 else min((td_cdf[j] - td_cdf[j - 1]) / denom, 1.0)

    log.info("derived hazards for %d member(s), s_max=%d", len(mpu.members), s_max)
    return HazardSchedule(np.array(hazards), member_pmf_sums=tuple(sums))


def fixed_horizon_schedule(t_d: int) -> HazardSchedule:
    """Death certain at ``t_d`` and impossible before it."""
    if t_d < 1:
        raise ValueError(f"t_d must be at least 1, got {t_d}")
    h = np.zeros(t_d + 1)
    h[t_d] = 1.0
    return HazardSchedule(h, fixed_horizon=True)
