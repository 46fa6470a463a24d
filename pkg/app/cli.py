"""Command-line front end: solve, hazard, simulate, analyze and serve."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from pydantic import ValidationError

from app.analysis.returns_analysis import load_series, whiteness_report
from app.config import apply_thread_limits
from app.config_loader import load_all_profiles, load_control
from app.config_schema import ControlConfig, RunProfile, SimulationProfile
from app.errors import MinRuinError
from app.io.results import (
    ALPHA_CSV,
    HRATES_FILE,
    ensure_output_dir,
    read_alpha_policy,
    read_glide_path,
    read_hrates,
    render_sim_report,
    write_grid,
    write_histogram,
    write_hrates,
)
from app.logging_config import init_logging
from app.metrics import write_metrics_file
from app.model.hazard import (
    AgeTable,
    HazardSchedule,
    MpuSpec,
    derive_hazards,
    fixed_horizon_schedule,
    load_age_table,
)
from app.model.returns import BASELINE_MODEL, ReturnModel
from app.sim.simulator import (
    FixedAllocation,
    GlidePath,
    GridPolicy,
    SimConfig,
    SimResult,
    Strategy,
    best_fixed_alpha,
    geometric_mean_check,
    simulate,
)
from app.solver.dp import PolicyGrid, solve

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_AGE_TABLE = ROOT / "data" / "ageprobs.txt"
DEFAULT_PROFILES_DIR = ROOT / "configs"
EXIT_USAGE = 2

log = logging.getLogger("app.cli")


@dataclass(frozen=True)
class SolveRun:
    grid: PolicyGrid
    hazards: HazardSchedule
    files: list[Path]


def run_solve(
    cfg: ControlConfig,
    out_dir: Path,
    *,
    age_table: AgeTable | None = None,
    workers: int | None = None,
    reuse_hazards: bool = False,
    logger: logging.Logger | None = None,
) -> SolveRun:
    """Derive hazards, solve and write every result file into ``out_dir``."""
    lg = logger or log
    ensure_output_dir(out_dir)
    written: list[Path] = []
    if cfg.t_d is not None:
        hazards = fixed_horizon_schedule(cfg.t_d)
    else:
        existing = out_dir / HRATES_FILE
        if reuse_hazards and existing.exists():
            lg.warning("reusing existing hazard file %s", existing)
            hazards = read_hrates(existing)
        else:
            if age_table is None:
                raise ValueError("a random horizon needs an age table")
            hazards = cfg.horizon(age_table)
            written.append(write_hrates(hazards, out_dir))
        lg.info("random horizon: s_max=%d members=%d", hazards.s_max, cfg.num_random)

    grid = solve(
        cfg.return_model(), hazards, cfg.discretization(), workers=workers, logger=lg
    )
    written.extend(write_grid(grid, out_dir))
    return SolveRun(grid=grid, hazards=hazards, files=written)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _parse_members(text: str) -> MpuSpec:
    tokens = text.split()
    if not tokens or len(tokens) % 2:
        raise ValueError(f"members must be 'G AGE' pairs, got {text!r}")
    pairs = [(tokens[i], int(tokens[i + 1])) for i in range(0, len(tokens), 2)]
    return MpuSpec.of(*pairs)


def _age_table(path: Path | None) -> AgeTable:
    return load_age_table(path or DEFAULT_AGE_TABLE)


def _profile(args: argparse.Namespace) -> RunProfile:
    profiles = load_all_profiles(args.profiles_dir)
    try:
        return profiles[args.profile]
    except KeyError:
        raise ValueError(
            f"unknown profile '{args.profile}' (known: {', '.join(sorted(profiles))})"
        ) from None


def _resolve(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    return p if p.is_absolute() else ROOT / p


# solve


def _cmd_solve(args: argparse.Namespace) -> int:
    if args.profile:
        profile = _profile(args)
        cfg = profile.control
        table_path = args.age_table or _resolve(profile.age_table)
        out_dir = args.out or _resolve(profile.output_dir)
        workers = args.workers if args.workers is not None else profile.workers
        reuse = args.reuse_hazards or profile.keep_hazards
        sim = profile.simulation
    else:
        if args.control is None:
            raise ValueError("solve needs --control or --profile")
        cfg = load_control(args.control)
        table_path = args.age_table
        out_dir = args.out or Path("out")
        workers = args.workers
        reuse = args.reuse_hazards
        sim = None

    table = None if cfg.fixed_horizon else _age_table(table_path)
    run = run_solve(cfg, out_dir, age_table=table, workers=workers, reuse_hazards=reuse)
    for path in run.files:
        print(path)

    if sim is not None:
        result = _simulate_profile(sim, cfg.return_model(), run.hazards, run.grid, workers)
        print(render_sim_report(result))
    return 0


def _simulate_profile(
    sim: SimulationProfile,
    model: ReturnModel,
    hazards: HazardSchedule,
    grid: PolicyGrid,
    workers: int | None,
) -> SimResult:
    strategy: Strategy = (
        FixedAllocation(sim.fixed_alpha) if sim.fixed_alpha is not None else GridPolicy(grid)
    )
    cfg = SimConfig(sim.paths, sim.seed, strategy, sim.w_r, hazards)
    return simulate(cfg, model, workers=workers)


# hazard


def _cmd_hazard(args: argparse.Namespace) -> int:
    if args.control is not None:
        cfg = load_control(args.control)
        if cfg.fixed_horizon:
            raise ValueError("control file describes a fixed horizon; no hazards to derive")
        mpu = cfg.mpu()
    elif args.members:
        mpu = _parse_members(args.members)
    else:
        raise ValueError("hazard needs --control or --members")
    table = _age_table(args.age_table)
    mpu.validate_against(table)
    hazards = derive_hazards(table, mpu)
    path = write_hrates(hazards, args.out)
    print(f"s_max={hazards.s_max}")
    print(path)
    return 0


# simulate


def _horizon(args: argparse.Namespace) -> HazardSchedule:
    if args.years is not None:
        return fixed_horizon_schedule(args.years)
    if args.hrates is not None:
        return read_hrates(args.hrates)
    if args.members:
        mpu = _parse_members(args.members)
        table = _age_table(args.age_table)
        mpu.validate_against(table)
        return derive_hazards(table, mpu)
    raise ValueError("simulate needs one of --years, --hrates or --members")


def _strategy(args: argparse.Namespace) -> Strategy:
    if args.fixed_alpha is not None:
        return FixedAllocation(args.fixed_alpha)
    if args.policy is not None:
        path = args.policy / ALPHA_CSV if args.policy.is_dir() else args.policy
        return GridPolicy(read_alpha_policy(path))
    if args.glide_path is not None:
        return GlidePath(read_glide_path(args.glide_path))
    raise ValueError("simulate needs one of --fixed-alpha, --policy or --glide-path")


def _cmd_simulate(args: argparse.Namespace) -> int:
    model = load_control(args.control).return_model() if args.control else BASELINE_MODEL
    if args.expense_ratio is not None:
        model = model.with_expense_ratio(args.expense_ratio)

    if args.geometric_means is not None:
        report = geometric_mean_check(
            model, args.geometric_means, args.paths, args.seed, workers=args.workers
        )
        print(
            f"stock_gm={report.stock_gm:.5f} bond_gm={report.bond_gm:.5f} "
            f"discarded={report.stock_discarded}/{report.bond_discarded} reps={report.n_reps}"
        )
        return 0

    if args.wr is None:
        raise ValueError("simulate needs --wr")
    horizon = _horizon(args)

    if args.scan_fixed:
        scan = best_fixed_alpha(
            model, horizon, args.wr, n_paths=args.paths, seed=args.seed, workers=args.workers
        )
        for a, res in zip(scan.alphas, scan.results, strict=True):
            print(f"alpha={a:.2f} p_ruin={res.estimate:.6f} se={res.std_error:.6f}")
        print(f"best alpha={scan.best_alpha:.2f} p_ruin={scan.best.estimate:.6f}")
        return 0

    cfg = SimConfig(args.paths, args.seed, _strategy(args), args.wr, horizon)
    result = simulate(cfg, model, workers=args.workers)
    print(render_sim_report(result))
    if args.histogram is not None:
        print(write_histogram(result, args.histogram))
    return 0


# analyze


def _cmd_analyze(args: argparse.Namespace) -> int:
    series = load_series(args.series)
    max_lag = args.max_lag or max(1, series.n // 4)
    report = whiteness_report(series, max_lag)
    print(report.render())
    flagged = report.flagged
    print(f"flagged lags: {', '.join(map(str, flagged)) if flagged else 'none'}")
    return 0


# serve


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from app.main import create_app

    uvicorn.run(create_app(args.policy_dir), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minruin",
        description="Minimum probability-of-ruin allocation solver and simulator",
    )
    parser.add_argument("--log-level", default=None, help="Overrides LOG_LEVEL (default INFO)")
    parser.add_argument(
        "--metrics-file", type=Path, default=None, help="Write Prometheus metrics here on exit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="Solve the allocation grid and write result files")
    p.add_argument("--control", type=Path, help="Three-line control file")
    p.add_argument("--profile", help="Run profile name from --profiles-dir")
    p.add_argument("--profiles-dir", type=Path, default=DEFAULT_PROFILES_DIR)
    p.add_argument("--age-table", type=Path, default=None, help="ageprobs.txt for random horizons")
    p.add_argument("--out", type=Path, default=None, help="Output directory")
    p.add_argument("--workers", type=int, default=None, help="Worker processes; 0 = all cores")
    p.add_argument(
        "--reuse-hazards",
        action="store_true",
        help="Reuse hrates.txt found in the output directory",
    )
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("hazard", help="Derive hrates.txt for a person or MPU")
    p.add_argument("--control", type=Path, help="Control file with a random horizon")
    p.add_argument("--members", help="Space-separated pairs, e.g. 'M 65 F 67'")
    p.add_argument("--age-table", type=Path, default=None)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=_cmd_hazard)

    p = sub.add_parser("simulate", help="Monte Carlo probability of ruin")
    strat = p.add_mutually_exclusive_group()
    strat.add_argument("--fixed-alpha", type=_fraction, default=None)
    strat.add_argument("--policy", type=Path, default=None, help="FinalAlphaResults_H.csv or dir")
    strat.add_argument("--glide-path", type=Path, default=None, help="One allocation per line")
    strat.add_argument(
        "--scan-fixed", action="store_true", help="Scan fixed allocations 0.00..1.00 by 0.05"
    )
    strat.add_argument(
        "--geometric-means",
        type=_positive_int,
        default=None,
        metavar="YEARS",
        help="Check simulated geometric mean returns over YEARS-long histories",
    )
    hz = p.add_mutually_exclusive_group()
    hz.add_argument("--years", type=_positive_int, default=None, help="Fixed horizon T_D")
    hz.add_argument("--hrates", type=Path, default=None, help="Hazard file from a random solve")
    hz.add_argument("--members", default=None, help="MPU pairs, e.g. 'M 65 F 65'")
    p.add_argument("--age-table", type=Path, default=None)
    p.add_argument("--wr", type=float, default=None, help="Initial withdrawal rate W_R")
    p.add_argument("--paths", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--control", type=Path, default=None, help="Take the return model from here")
    p.add_argument("--expense-ratio", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--histogram", type=Path, default=None, help="Write ruin-time CSV here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="ACF/PACF whiteness diagnostics for a return series")
    p.add_argument("series", type=Path, help="One return per line")
    p.add_argument("--max-lag", type=_positive_int, default=None, help="Default n // 4")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("serve", help="Serve a solved grid over HTTP")
    p.add_argument(
        "--policy-dir", type=Path, default=None, help="Default $MINRUIN_POLICY_DIR or out"
    )
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    init_logging(args.log_level)
    apply_thread_limits()
    try:
        return args.func(args)
    except (MinRuinError, ValueError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if args.metrics_file is not None:
            write_metrics_file(args.metrics_file)


if __name__ == "__main__":
    sys.exit(main())
