import numpy as np
import pytest

from app.model.hazard import HazardSchedule, fixed_horizon_schedule
from app.model.returns import BASELINE_MODEL, ReturnModel
from app.model.ruin import Discretization
from app.sim.rng import block_generator
from app.sim.simulator import (
    FixedAllocation,
    GlidePath,
    GridPolicy,
    SimConfig,
    best_fixed_alpha,
    default_alpha_scan,
    draw_horizons,
    geometric_mean_check,
    improvement_ratio,
    simulate,
)
from app.solver.dp import solve

THIRTY = fixed_horizon_schedule(30)


def _cfg(alpha=0.5, n=20_000, seed=11, horizon=THIRTY, w_r=0.04):
    return SimConfig(n, seed, FixedAllocation(alpha), w_r, horizon)


def test_estimate_and_standard_error():
    res = simulate(_cfg(), BASELINE_MODEL)
    assert res.n_paths == 20_000
    assert res.ruined == sum(res.ruined_at)
    assert res.estimate == res.ruined / res.n_paths
    p = res.estimate
    assert res.std_error == pytest.approx(np.sqrt(p * (1 - p) / res.n_paths), rel=1e-12)
    lo, hi = res.interval()
    assert lo < p < hi
    assert res.strategy == "fixed(0.5)"


def test_same_seed_same_result_for_any_worker_count():
    one = simulate(_cfg(n=20_000), BASELINE_MODEL, workers=1)
    three = simulate(_cfg(n=20_000), BASELINE_MODEL, workers=3)
    assert one.ruined_at == three.ruined_at
    other = simulate(_cfg(n=20_000, seed=12), BASELINE_MODEL)
    assert other.ruined_at != one.ruined_at


def test_histogram_covers_withdrawal_times_only():
    res = simulate(_cfg(alpha=0.0, w_r=0.07), BASELINE_MODEL)
    assert len(res.ruined_at) == 31
    assert res.ruined_at[0] == 0
    assert res.ruined > 0


def test_deterministic_growth_never_ruins():
    flat = ReturnModel(
        stock_mean=0.05, stock_var=0.0, bond_mean=0.05, bond_var=0.0, stock_bond_cov=0.0
    )
    res = simulate(_cfg(alpha=0.3, n=1000), flat)
    assert res.ruined == 0 and res.std_error == 0.0


def test_random_horizons_follow_the_hazards():
    h = HazardSchedule(np.array([0.1, 0.3, 0.5, 1.0]))
    td = draw_horizons(block_generator(5, 0), h, 200_000)
    freq = np.bincount(td, minlength=4) / td.size
    np.testing.assert_allclose(freq, h.td_pmf(), atol=5e-3)
    assert td.max() <= h.s_max
    assert np.all(draw_horizons(block_generator(5, 0), THIRTY, 10) == 30)


def test_no_ruin_after_death():
    # everyone dies by t = 2, so no ruin can be counted at t = 3
    h = HazardSchedule(np.array([0.0, 0.0, 1.0, 1.0]))
    res = simulate(_cfg(alpha=0.0, w_r=0.6, horizon=h, n=5000), BASELINE_MODEL)
    assert res.ruined_at[3] == 0
    assert res.ruined_at[1] + res.ruined_at[2] == res.ruined > 0


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(n=0)
    with pytest.raises(ValueError):
        _cfg(w_r=1.0)
    with pytest.raises(ValueError):
        SimConfig(10, 1, GlidePath((0.5, 0.4)), 0.04, THIRTY)
    with pytest.raises(ValueError):
        FixedAllocation(1.2)


def test_glide_path_matches_constant_allocation():
    glide = SimConfig(20_000, 3, GlidePath((0.4,) * 30), 0.04, THIRTY)
    a = simulate(glide, BASELINE_MODEL)
    b = simulate(_cfg(alpha=0.4, seed=3), BASELINE_MODEL)
    assert a.ruined_at == b.ruined_at
    assert a.strategy == "glidepath"


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_simulation_agrees_with_single_allocation_solve(alpha):
    d = Discretization(p_r=1000, p_alpha=1, rf_max=1.0)
    grid = solve(BASELINE_MODEL, THIRTY, d, alpha_schedule=[alpha] * 30)
    exact = grid.lookup(0, 0.04).v
    res = simulate(_cfg(alpha=alpha, n=250_000, seed=2024), BASELINE_MODEL)
    assert abs(res.estimate - exact) <= 3 * res.std_error + 2 / d.p_r


def test_policy_beats_best_fixed_allocation():
    h = fixed_horizon_schedule(10)
    grid = solve(BASELINE_MODEL, h, Discretization(p_r=200, p_alpha=20, rf_max=2.75))
    policy = simulate(SimConfig(40_000, 9, GridPolicy(grid), 0.1, h), BASELINE_MODEL)
    scan = best_fixed_alpha(
        BASELINE_MODEL, h, 0.1, n_paths=40_000, seed=9, alphas=[0.2, 0.4, 0.6, 0.8]
    )
    combined = np.hypot(policy.std_error, scan.best.std_error)
    assert policy.estimate <= scan.best.estimate + 3 * combined
    assert scan.best_alpha in scan.alphas
    assert scan.best.estimate == min(r.estimate for r in scan.results)


def test_policy_shorter_than_horizon_rejected():
    d = Discretization(p_r=10, p_alpha=2, rf_max=1.0)
    grid = solve(BASELINE_MODEL, fixed_horizon_schedule(2), d)
    with pytest.raises(ValueError):
        SimConfig(10, 1, GridPolicy(grid), 0.04, fixed_horizon_schedule(3))


def test_default_scan_grid():
    grid = default_alpha_scan()
    assert len(grid) == 21 and grid[0] == 0.0 and grid[-1] == 1.0 and grid[9] == 0.45


def test_improvement_ratio():
    assert improvement_ratio(0.0421, 0.0287) == pytest.approx(0.318, abs=1e-3)
    with pytest.raises(ValueError):
        improvement_ratio(0.0, 0.01)


def test_geometric_means_below_arithmetic():
    rep = geometric_mean_check(BASELINE_MODEL, years=86, n_reps=4000, seed=7)
    assert rep.n_reps == 4000
    assert rep.stock_gm < BASELINE_MODEL.stock_mean
    assert rep.bond_gm < BASELINE_MODEL.bond_mean
    assert rep.stock_discarded % 2 == 0


def test_geometric_mean_of_constant_returns():
    flat = ReturnModel(
        stock_mean=0.07, stock_var=0.0, bond_mean=0.02, bond_var=0.0, stock_bond_cov=0.0
    )
    rep = geometric_mean_check(flat, years=10, n_reps=50, seed=1)
    assert rep.stock_gm == pytest.approx(0.07, rel=1e-12)
    assert rep.bond_gm == pytest.approx(0.02, rel=1e-12)
    assert rep.stock_discarded == rep.bond_discarded == 0
    with pytest.raises(ValueError):
        geometric_mean_check(flat, years=1, n_reps=50, seed=1)
