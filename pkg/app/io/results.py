"""Readers and writers for the solver's text outputs.

Probabilities are written fixed-point to 50 places: the first 17 significant digits
of the double followed by zero padding, so a file re-parses to the same doubles.
Ruin factors and allocations use 10 places.
"""

from __future__ import annotations

import csv
import logging
import re
from collections.abc import Iterable
from decimal import Decimal
from pathlib import Path

import numpy as np

from app.errors import OutputDirectoryError, PolicyFileError
from app.model.hazard import HazardSchedule
from app.sim.simulator import SimResult
from app.solver.dp import PolicyGrid

HRATES_FILE = "hrates.txt"
VERTICAL_FILE = "FinalResults_V.txt"
PROB_CSV = "FinalProbResults_H.csv"
ALPHA_CSV = "FinalAlphaResults_H.csv"
HISTOGRAM_CSV = "RuinTimes.csv"

PROB_PLACES = 50
SHORT_PLACES = 10

_HRATE_LINE = re.compile(r"^\s*(\S+)\s+\(t=(\d+)\)\s*$")
_HEADER_STAGE = re.compile(r"^Time \(t=(\d+)\)$")

log = logging.getLogger(__name__)


def format_fixed(v: float, places: int = PROB_PLACES) -> str:
    """Fixed-point text of ``v`` holding 17 significant digits, zero padded."""
    return format(Decimal(f"{v:.17g}"), f".{places}f")


def format_short(v: float) -> str:
    return f"{v:.{SHORT_PLACES}f}"


def ensure_output_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputDirectoryError(f"cannot create output directory {path}: {exc}") from exc
    if not path.is_dir():
        raise OutputDirectoryError(f"{path} is not a directory")
    return path


def _write_lines(path: Path, lines: Iterable[str]) -> Path:
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
    except OSError as exc:
        raise OutputDirectoryError(f"cannot write {path}: {exc}") from exc
    return path


# hazards


def write_hrates(schedule: HazardSchedule, out_dir: Path) -> Path:
    path = ensure_output_dir(out_dir) / HRATES_FILE
    return _write_lines(
        path, (f"{format_fixed(h)} (t={t})" for t, h in enumerate(schedule.hazards))
    )


def read_hrates(path: Path) -> HazardSchedule:
    values: list[float] = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PolicyFileError(path, f"cannot read: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        m = _HRATE_LINE.match(raw)
        if m is None:
            raise PolicyFileError(path, f"line {lineno}: expected '<hazard> (t=<n>)'")
        if int(m.group(2)) != len(values):
            raise PolicyFileError(path, f"line {lineno}: expected t={len(values)}")
        values.append(float(m.group(1)))
    try:
        return HazardSchedule(np.array(values))
    except ValueError as exc:
        raise PolicyFileError(path, str(exc)) from exc


# grid


def write_vertical(grid: PolicyGrid, out_dir: Path) -> Path:
    path = ensure_output_dir(out_dir) / VERTICAL_FILE
    rf = [format_short(x) for x in grid.midpoints]

    def rows() -> Iterable[str]:
        for t in range(grid.stages):
            v_row = grid.v[t]
            a_row = grid.alpha[t]
            for i in range(grid.bucket_count):
                yield f"{t} {rf[i]} {format_fixed(v_row[i])} {format_short(a_row[i])}"

    return _write_lines(path, rows())


def write_horizontal(grid: PolicyGrid, out_dir: Path) -> tuple[Path, Path]:
    out = ensure_output_dir(out_dir)
    header = "RF" + "".join(f", Time (t={t})" for t in range(grid.stages))
    rf = [format_short(x) for x in grid.midpoints]

    def rows(values: np.ndarray, fmt) -> Iterable[str]:
        yield header
        for i in range(grid.bucket_count):
            yield rf[i] + "".join("," + fmt(values[t, i]) for t in range(grid.stages))

    prob = _write_lines(out / PROB_CSV, rows(grid.v, format_fixed))
    alpha = _write_lines(out / ALPHA_CSV, rows(grid.alpha, format_short))
    return prob, alpha


def write_grid(grid: PolicyGrid, out_dir: Path) -> list[Path]:
    vertical = write_vertical(grid, out_dir)
    prob, alpha = write_horizontal(grid, out_dir)
    log.info("wrote %d stages x %d buckets to %s", grid.stages, grid.bucket_count, out_dir)
    return [vertical, prob, alpha]


def _overflow_row(stages: int, hazards: HazardSchedule | None) -> np.ndarray:
    if hazards is None:
        return np.ones(stages)
    if hazards.stage_count < stages:
        raise ValueError(
            f"hazard schedule covers {hazards.stage_count} stages, grid has {stages}"
        )
    return 1.0 - hazards.hazards[:stages]


def _p_r_from_rf(path: Path, rf: np.ndarray) -> int:
    if rf.size == 0 or rf[0] <= 0.0:
        raise PolicyFileError(path, "no bucket rows")
    p_r = int(round(1.0 / rf[0]))
    expected = np.arange(1, rf.size + 1) / p_r
    if not np.allclose(rf, expected, rtol=0.0, atol=1e-6):
        raise PolicyFileError(path, "ruin factor column is not the bucket midpoint grid i / P_R")
    return p_r


def _read_csv_matrix(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """(rf column, stage x bucket values)."""
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise PolicyFileError(path, f"cannot read: {exc}") from exc
    if not rows:
        raise PolicyFileError(path, "empty file")
    header = [c.strip() for c in rows[0]]
    if header[0] != "RF":
        raise PolicyFileError(path, "header must start with 'RF'")
    for j, col in enumerate(header[1:]):
        m = _HEADER_STAGE.match(col)
        if m is None or int(m.group(1)) != j:
            raise PolicyFileError(path, f"header column {j + 2}: expected 'Time (t={j})'")
    stages = len(header) - 1
    if stages < 1:
        raise PolicyFileError(path, "no stage columns")
    rf: list[float] = []
    values: list[list[float]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != stages + 1:
            raise PolicyFileError(path, f"line {lineno}: expected {stages + 1} fields")
        try:
            rf.append(float(row[0]))
            values.append([float(c) for c in row[1:]])
        except ValueError as exc:
            raise PolicyFileError(path, f"line {lineno}: {exc}") from exc
    return np.array(rf), np.array(values).T.reshape(stages, len(rf))


def read_horizontal(
    prob_csv: Path, alpha_csv: Path, *, hazards: HazardSchedule | None = None
) -> PolicyGrid:
    """PolicyGrid from the two CSVs; overflow values come from ``hazards`` or default to 1."""
    rf, v = _read_csv_matrix(prob_csv)
    rf_a, alpha = _read_csv_matrix(alpha_csv)
    if v.shape != alpha.shape or not np.array_equal(rf, rf_a):
        raise PolicyFileError(alpha_csv, f"shape or ruin factors disagree with {prob_csv.name}")
    p_r = _p_r_from_rf(prob_csv, rf)
    return PolicyGrid(
        p_r=p_r,
        rf_max=rf.size / p_r,
        v=v,
        alpha=alpha,
        overflow=_overflow_row(v.shape[0], hazards),
    )


def read_alpha_policy(alpha_csv: Path) -> PolicyGrid:
    """Allocation-only grid for simulation; probabilities are unknown and left as NaN."""
    rf, alpha = _read_csv_matrix(alpha_csv)
    p_r = _p_r_from_rf(alpha_csv, rf)
    return PolicyGrid(
        p_r=p_r,
        rf_max=rf.size / p_r,
        v=np.full_like(alpha, np.nan),
        alpha=alpha,
        overflow=np.ones(alpha.shape[0]),
    )


def read_policy_dir(directory: Path) -> PolicyGrid:
    """Grid from a solve's output directory, using hrates.txt for overflow values if present."""
    hr = directory / HRATES_FILE
    hazards = read_hrates(hr) if hr.exists() else None
    return read_horizontal(directory / PROB_CSV, directory / ALPHA_CSV, hazards=hazards)


def read_vertical(path: Path, *, hazards: HazardSchedule | None = None) -> PolicyGrid:
    ts: list[int] = []
    rf: list[float] = []
    v: list[float] = []
    alpha: list[float] = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PolicyFileError(path, f"cannot read: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise PolicyFileError(path, f"line {lineno}: expected 't rf v alpha'")
        try:
            ts.append(int(parts[0]))
            rf.append(float(parts[1]))
            v.append(float(parts[2]))
            alpha.append(float(parts[3]))
        except ValueError as exc:
            raise PolicyFileError(path, f"line {lineno}: {exc}") from exc
    if not ts:
        raise PolicyFileError(path, "empty file")
    t_arr = np.array(ts)
    stages = int(t_arr.max()) + 1
    if t_arr.size % stages or np.any(np.diff(t_arr) < 0):
        raise PolicyFileError(path, "stages must be ascending with equal bucket counts")
    n = t_arr.size // stages
    rf_rows = np.array(rf).reshape(stages, n)
    p_r = _p_r_from_rf(path, rf_rows[0])
    return PolicyGrid(
        p_r=p_r,
        rf_max=n / p_r,
        v=np.array(v).reshape(stages, n),
        alpha=np.array(alpha).reshape(stages, n),
        overflow=_overflow_row(stages, hazards),
    )


# simulation


def write_histogram(result: SimResult, out_dir: Path, name: str = HISTOGRAM_CSV) -> Path:
    path = ensure_output_dir(out_dir) / name
    total = result.n_paths

    def rows() -> Iterable[str]:
        yield "t,ruined,fraction"
        for t, count in enumerate(result.ruined_at):
            yield f"{t},{count},{count / total:.10f}"

    return _write_lines(path, rows())


def render_sim_report(result: SimResult) -> str:
    lo, hi = result.interval()
    return (
        f"strategy={result.strategy} paths={result.n_paths} ruined={result.ruined}\n"
        f"p_ruin={result.estimate:.6f} se={result.std_error:.6f} "
        f"95%=[{lo:.6f}, {hi:.6f}]"
    )


def read_glide_path(path: Path) -> tuple[float, ...]:
    """One allocation per line for stages 0, 1, ...; blank lines and ``#`` comments skipped."""
    out: list[float] = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PolicyFileError(path, f"cannot read: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            a = float(line.split()[-1])
        except ValueError as exc:
            raise PolicyFileError(path, f"line {lineno}: {exc}") from exc
        if not 0.0 <= a <= 1.0:
            raise PolicyFileError(path, f"line {lineno}: allocation {a} outside [0, 1]")
        out.append(a)
    if not out:
        raise PolicyFileError(path, "no allocations")
    return tuple(out)
