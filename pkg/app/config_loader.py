from __future__ import annotations

from pathlib import Path

import yaml
from pydantic import ValidationError

from app.config_schema import ControlConfig, RunProfile
from app.errors import ControlFileError
from app.model.hazard import Gender, Member

LINE1_FIELDS = (
    "stock_mean",
    "stock_var",
    "bond_mean",
    "bond_var",
    "stock_bond_cov",
    "rf_max",
    "e_r",
    "prune_power",
)
LINE2_FIELDS = ("p_r", "p_alpha")

# (line, field) for each ControlConfig attribute, used to place validation errors.
_POSITIONS: dict[str, tuple[int, int | None]] = {
    **{name: (1, i) for i, name in enumerate(LINE1_FIELDS, start=1)},
    **{name: (2, i) for i, name in enumerate(LINE2_FIELDS, start=1)},
    "t_d": (3, 2),
    "members": (3, None),
}


def _number(token: str, line: int, field: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ControlFileError(line, field, f"not a number: {token!r}") from None


def _integer(token: str, line: int, field: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ControlFileError(line, field, f"not an integer: {token!r}") from None


def _parse_members(tokens: list[str]) -> tuple[int | None, list[Member]]:
    count = _integer(tokens[0], 3, 1)
    if count < 0:
        raise ControlFileError(3, 1, f"member count must be >= 0, got {count}")
    if count == 0:
        if len(tokens) != 2:
            raise ControlFileError(
                3, None, f"fixed horizon expects '0 T_D', got {len(tokens)} fields"
            )
        return _integer(tokens[1], 3, 2), []
    expected = 1 + 2 * count
    if len(tokens) != expected:
        raise ControlFileError(
            3, None, f"{count} member(s) need {expected} fields, got {len(tokens)}"
        )
    members: list[Member] = []
    for k in range(count):
        g_field, a_field = 2 + 2 * k, 3 + 2 * k
        g = tokens[g_field - 1]
        try:
            gender = Gender.parse(g)
        except ValueError:
            raise ControlFileError(3, g_field, f"gender must be M or F, got {g!r}") from None
        age = _integer(tokens[a_field - 1], 3, a_field)
        if age < 0:
            raise ControlFileError(3, a_field, f"age must be >= 0, got {age}")
        members.append(Member(gender=gender, age=age))
    return None, members


def parse_control(text: str) -> ControlConfig:
    """Parse the whitespace-delimited three-line control format."""
    lines = [ln.split() for ln in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    if len(lines) < 3:
        raise ControlFileError(len(lines) + 1, None, "control file needs 3 lines")
    if len(lines) > 3:
        raise ControlFileError(4, None, "unexpected content after line 3")
    l1, l2, l3 = lines
    if len(l1) != len(LINE1_FIELDS):
        raise ControlFileError(1, None, f"expected {len(LINE1_FIELDS)} fields, got {len(l1)}")
    if len(l2) != len(LINE2_FIELDS):
        raise ControlFileError(2, None, f"expected {len(LINE2_FIELDS)} fields, got {len(l2)}")
    if not l3:
        raise ControlFileError(3, None, "empty line")

    values: dict[str, object] = {}
    for i, (name, tok) in enumerate(zip(LINE1_FIELDS, l1, strict=True), start=1):
        values[name] = _number(tok, 1, i)
    for i, (name, tok) in enumerate(zip(LINE2_FIELDS, l2, strict=True), start=1):
        values[name] = _integer(tok, 2, i)
    t_d, members = _parse_members(l3)
    values["t_d"] = t_d
    values["members"] = tuple(members)
    try:
        return ControlConfig(**values)
    except ValidationError as exc:
        err = exc.errors()[0]
        name = str(err["loc"][0]) if err["loc"] else ""
        line, field = _POSITIONS.get(name, (3, None))
        raise ControlFileError(line, field, err["msg"]) from exc


def emit_control(cfg: ControlConfig) -> str:
    """Control-file text that parses back to ``cfg``."""
    line1 = " ".join(repr(float(getattr(cfg, name))) for name in LINE1_FIELDS)
    line2 = f"{cfg.p_r} {cfg.p_alpha}"
    if cfg.t_d is not None:
        line3 = f"0 {cfg.t_d}"
    else:
        pairs = " ".join(f"{m.gender.value} {m.age}" for m in cfg.members)
        line3 = f"{len(cfg.members)} {pairs}"
    return f"{line1}\n{line2}\n{line3}\n"


def load_control(path: Path) -> ControlConfig:
    return parse_control(path.read_text(encoding="utf-8"))


class ConfigRegistry:
    """In-memory registry of YAML run profiles with refresh capability."""

    def __init__(self) -> None:
        self._profiles: dict[str, RunProfile] = {}

    def load_profile(self, path: Path) -> RunProfile:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
        return RunProfile(**data)

    def load_all_profiles(self, directory: Path) -> dict[str, RunProfile]:
        if not directory.exists() or not directory.is_dir():
            raise FileNotFoundError(f"Profile directory not found: {directory}")
        found: dict[str, RunProfile] = {}
        for yml in sorted(directory.glob("*.yaml")):
            profile = self.load_profile(yml)
            if profile.name in found:
                raise ValueError(f"Duplicate profile name '{profile.name}' in {yml.name}")
            found[profile.name] = profile
        self._profiles = found
        return self._profiles

    def get(self, name: str) -> RunProfile:
        return self._profiles[name]

    def refresh(self, directory: Path) -> dict[str, RunProfile]:
        return self.load_all_profiles(directory)


# Convenience module-level helpers
_registry = ConfigRegistry()


def load_profile(path: Path) -> RunProfile:
    return _registry.load_profile(path)


def load_all_profiles(directory: Path) -> dict[str, RunProfile]:
    return _registry.load_all_profiles(directory)


def get_profile(name: str) -> RunProfile:
    return _registry.get(name)


def refresh_profiles(directory: Path) -> dict[str, RunProfile]:
    return _registry.refresh(directory)
