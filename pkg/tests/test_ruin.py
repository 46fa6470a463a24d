from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from app.model.ruin import (
    RUINED,
    AccountSnapshot,
    Discretization,
    RuinFactorState,
    bucket_index,
    bucket_indices,
    bucket_midpoint,
    is_ruin,
    next_ruin_factor,
    real_balance,
    rebase_withdrawal,
    required_return,
    rf_from_balance,
    to_standard_form,
)


def test_next_ruin_factor_recursion():
    assert next_ruin_factor(0.04, 1.05) == pytest.approx(0.04 / 1.01, rel=1e-15)
    assert next_ruin_factor(Fraction(1, 25), Fraction(21, 20)) == Fraction(4, 101)


def test_equality_counts_as_ruin():
    assert is_ruin(0.04, 0.04)
    assert next_ruin_factor(0.04, 0.04) is RUINED
    assert next_ruin_factor(0.04, -0.3) is RUINED
    assert not is_ruin(0.04, 0.0400001)


def test_non_positive_rf_rejected():
    with pytest.raises(ValueError):
        next_ruin_factor(0.0, 1.05)
    with pytest.raises(ValueError):
        is_ruin(-0.01, 1.05)


def test_required_return_tracks_ruin_factor():
    # 4.0% -> 3.9% needs about 6.56% real
    r = required_return(0.040, 0.039)
    assert r - 1.0 == pytest.approx(0.0656, abs=5e-5)
    assert next_ruin_factor(0.040, r) == pytest.approx(0.039, rel=1e-12)


def test_state_advances_and_stays_ruined():
    s = RuinFactorState.start(0.04)
    assert s.withdrawals_remaining == pytest.approx(25.0)
    s = s.advance(1.05)
    assert s.t == 1 and not s.ruined
    s = s.advance(0.0)
    assert s.ruined and s.withdrawals_remaining == 0.0
    s = s.advance(2.0)
    assert s.ruined and s.t == 3
    with pytest.raises(ValidationError):
        RuinFactorState(t=0, rf=-0.1)


def test_ruin_factor_matches_balance_identity_on_random_paths():
    rng = np.random.default_rng(7)
    for _ in range(50):
        balance0 = float(rng.uniform(1e5, 2e6))
        w_r = float(rng.uniform(0.02, 0.06))
        withdrawal = w_r * balance0
        balance = balance0
        rf = w_r
        for r in rng.uniform(0.98, 1.15, size=30):
            balance = balance * r - withdrawal
            rf = next_ruin_factor(rf, float(r))
            if rf is RUINED:
                assert balance <= 1e-9 * withdrawal
                break
            assert rf == pytest.approx(withdrawal / balance, rel=1e-12)
            assert rf_from_balance(balance0, w_r, balance) == pytest.approx(rf, rel=1e-12)
            snap = AccountSnapshot(initial_balance=balance0, rf0=w_r, rf_t=rf)
            assert real_balance(snap) == pytest.approx(balance, rel=1e-12)


def test_rebase_withdrawal_after_good_returns():
    # balance grew until RF fell to 3.5%; restarting at 4% pays 4.57% of the original balance
    snap = AccountSnapshot(initial_balance=1.0, rf0=0.04, rf_t=0.035)
    plan = rebase_withdrawal(snap, 0.04)
    assert plan.withdrawal_rate_on_initial == pytest.approx(0.04 * 0.04 / 0.035, rel=1e-12)
    assert plan.withdrawal_rate_on_initial == pytest.approx(0.0457, abs=1e-4)
    assert plan.new_rf0 == 0.04


def test_standard_form_preserves_withdrawal():
    balance_a, w_0 = to_standard_form(1_000_000.0, 0.04)
    assert w_0 * 1_000_000.0 == pytest.approx(0.04 * balance_a, rel=1e-15)
    assert balance_a == pytest.approx(1_000_000.0 - w_0 * 1_000_000.0)


def test_discretization_geometry():
    d = Discretization(p_r=1000, p_alpha=100, rf_max=2.75)
    assert d.bucket_count == 2750
    assert d.overflow_bucket == 2751
    grid = d.alpha_grid
    assert grid.size == 101 and grid[0] == 0.0 and grid[-1] == 1.0
    assert bucket_midpoint(40, d) == 0.04


def test_alpha_subset_validation():
    d = Discretization(p_r=10, p_alpha=4, rf_max=1.0, alpha_subset=(0.25, 0.5))
    np.testing.assert_array_equal(d.alpha_values, [0.25, 0.5])
    with pytest.raises(ValidationError):
        Discretization(p_r=10, p_alpha=4, rf_max=1.0, alpha_subset=(0.5, 0.25))
    with pytest.raises(ValidationError):
        Discretization(p_r=10, p_alpha=4, rf_max=1.0, alpha_subset=(1.5,))
    with pytest.raises(ValidationError):
        Discretization(p_r=10, p_alpha=4, rf_max=0.01)


def test_bucket_edges_are_closed_on_the_right():
    d = Discretization(p_r=1000, p_alpha=10, rf_max=2.75)
    assert bucket_index(0.04, d) == 40
    assert bucket_index(0.0405, d) == 40
    assert bucket_index(0.04050001, d) == 41
    assert bucket_index(0.0001, d) == 1
    assert bucket_index(2.7505, d) == 2750
    assert bucket_index(2.7506, d) == 2751
    assert bucket_index(9.0, d) == 2751
    np.testing.assert_array_equal(bucket_indices([0.04, 9.0], d), [40, 2751])
    with pytest.raises(ValueError):
        bucket_index(0.0, d)


def test_every_midpoint_maps_to_its_own_bucket():
    d = Discretization(p_r=5000, p_alpha=10, rf_max=2.75)
    i = np.arange(1, d.bucket_count + 1)
    np.testing.assert_array_equal(bucket_indices(i / d.p_r, d), i)


@pytest.mark.parametrize("rf", [1e14, 1e16, 1e20, np.inf])
def test_huge_ruin_factors_fall_in_the_overflow_bucket(rf):
    d = Discretization(p_r=5000, p_alpha=10, rf_max=2.75)
    assert bucket_index(rf, d) == d.overflow_bucket == 13751
    np.testing.assert_array_equal(bucket_indices([rf, 0.041], d), [13751, 205])


def test_first_bucket_edge():
    d = Discretization(p_r=5000, p_alpha=10, rf_max=2.75)
    edge = 1.5 / d.p_r
    assert bucket_index(edge, d) == 1
    assert bucket_index(float(np.nextafter(edge, np.inf)), d) == 2
    assert bucket_index(0.041, d) == 205


def test_withdrawals_remaining_count_down_at_zero_real_return():
    rf = Fraction(1, 25)
    for remaining in range(24, 0, -1):
        rf = next_ruin_factor(rf, Fraction(1))
        assert rf == Fraction(1, remaining)
    assert rf == 1
    assert next_ruin_factor(rf, Fraction(1)) is RUINED

    state = RuinFactorState.start(0.04)
    for _ in range(3):
        state = state.advance(1.0)
    assert state.withdrawals_remaining == pytest.approx(22.0, rel=1e-12)


def test_ruin_test_agrees_with_the_recursion():
    rng = np.random.default_rng(11)
    rf = rng.uniform(0.01, 1.5, size=2000)
    r_hat = rng.uniform(-0.5, 2.0, size=2000)
    for a, r in zip(rf, r_hat, strict=True):
        assert is_ruin(float(a), float(r)) == (next_ruin_factor(float(a), float(r)) is RUINED)


def test_required_return_inverts_the_recursion():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        rf = float(rng.uniform(0.005, 1.0))
        r_hat = rf + float(rng.uniform(0.01, 1.5))
        nxt = next_ruin_factor(rf, r_hat)
        assert required_return(rf, nxt) == pytest.approx(r_hat, rel=1e-12)


def test_ruin_factor_monotone_in_both_arguments():
    rng = np.random.default_rng(13)
    for _ in range(500):
        r_hat = float(rng.uniform(0.9, 1.3))
        lo, hi = sorted(rng.uniform(0.001, 0.8, size=2))
        if hi >= r_hat or hi - lo < 1e-9:
            continue
        assert next_ruin_factor(float(lo), r_hat) < next_ruin_factor(float(hi), r_hat)
        rf = float(lo)
        assert next_ruin_factor(rf, r_hat + 0.01) < next_ruin_factor(rf, r_hat)


def test_ruin_factor_falls_exactly_when_return_beats_one_plus_rf():
    rng = np.random.default_rng(14)
    for _ in range(2000):
        rf = float(rng.uniform(0.01, 0.5))
        r_hat = float(rng.uniform(rf + 1e-6, 2.0))
        if abs(r_hat - (1.0 + rf)) < 1e-9:
            continue
        assert (next_ruin_factor(rf, r_hat) < rf) == (r_hat > 1.0 + rf)
