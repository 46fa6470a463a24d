import numpy as np
import pytest
from scipy.signal import lfilter

from app.analysis.returns_analysis import (
    Series,
    acf,
    ar_roots,
    ar_roots_ok,
    load_series,
    pacf_yule_walker,
    sample_moments,
    whiteness_report,
    whiteness_threshold,
    yule_walker,
)
from app.errors import SingularSystemError, ZeroVarianceError


def test_threshold_for_86_years():
    assert whiteness_threshold(86) == pytest.approx(0.21567, abs=5e-6)


def test_sample_moments_use_n_minus_one():
    m = sample_moments(Series.of([1.0, 2.0, 3.0, 4.0]))
    assert m.mean == 2.5
    assert m.var == pytest.approx(5.0 / 3.0, rel=1e-15)
    assert m.std == pytest.approx(np.sqrt(5.0 / 3.0), rel=1e-15)
    with pytest.raises(ValueError):
        sample_moments(Series.of([1.0]))


def test_alternating_series_is_negatively_correlated():
    s = Series.of(np.tile([1.0, -1.0], 500))
    r = acf(s, 2)
    assert r[0] == pytest.approx(-0.999, abs=1e-12)
    assert r[1] == pytest.approx(0.998, abs=1e-12)


def test_first_partial_equals_first_autocorrelation():
    s = Series.of(np.random.default_rng(1).standard_normal(200))
    assert pacf_yule_walker(s, 1)[0] == acf(s, 1)[0]


def test_reversed_series_has_same_autocorrelations():
    values = np.random.default_rng(2).standard_normal(300)
    np.testing.assert_allclose(
        acf(Series.of(values), 10), acf(Series.of(values[::-1]), 10), rtol=1e-12, atol=1e-15
    )


def test_ar1_partials_cut_off_after_lag_one():
    e = np.random.default_rng(60).standard_normal(10_500)
    y = lfilter([1.0], [1.0, -0.6], e)[500:]
    p = pacf_yule_walker(Series.of(y), 5)
    assert p[0] == pytest.approx(0.6, abs=0.02)
    assert np.all(np.abs(p[1:]) < 3.0 / np.sqrt(y.size))
    phi = yule_walker(acf(Series.of(y), 1), 1)
    assert ar_roots_ok(phi)


def test_white_noise_report():
    s = Series.of(np.random.default_rng(86).normal(0.08, 0.2, 86))
    rep = whiteness_report(s, 21)
    assert rep.threshold == pytest.approx(0.21567, abs=5e-6)
    assert [row.lag for row in rep.lags] == list(range(1, 22))
    assert len(rep.acf_flagged) <= 4
    assert set(rep.acf_flagged) <= set(rep.flagged)
    text = rep.render()
    assert "threshold=0.21567" in text
    assert len(text.splitlines()) == 23


def test_zero_variance_and_lag_range():
    with pytest.raises(ZeroVarianceError):
        acf(Series.of([2.0] * 20), 3)
    s = Series.of([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        acf(s, 3)
    with pytest.raises(ValueError):
        acf(s, 0)


def test_singular_yule_walker_system_names_the_lag():
    with pytest.raises(SingularSystemError) as exc:
        yule_walker(np.array([1.0, 1.0]), 2)
    assert exc.value.lag == 2


def test_ar_root_checks():
    assert ar_roots_ok([0.6])
    assert not ar_roots_ok([1.2])
    assert ar_roots_ok([0.5, 0.3])
    assert not ar_roots_ok([0.5, 0.6])
    roots = ar_roots([0.5, 0.3])
    for z in roots:
        assert abs(1 - 0.5 * z - 0.3 * z * z) < 1e-12
    with pytest.raises(ValueError):
        ar_roots([0.1, 0.1, 0.1])


def test_load_series_skips_comments(tmp_path):
    path = tmp_path / "returns.txt"
    path.write_text("# real S&P returns\n0.12\n\n-0.05  # crash\n0.07,\n", encoding="utf-8")
    s = load_series(path)
    np.testing.assert_array_equal(s.values, [0.12, -0.05, 0.07])
    path.write_text("0.1\nabc\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_series(path)
