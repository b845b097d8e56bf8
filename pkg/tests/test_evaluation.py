import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadcast.errors import AlignmentError, CoverageError, ValidationError
from loadcast.evaluation import (
    aggregate_forecasts,
    daily_metrics,
    metrics_report,
    predicted_mse_pair,
    quarter_metrics,
    residual_stats,
    residuals,
    write_report_json,
    write_residual_csv,
)
from loadcast.series import LoadSeries

DAYS = np.arange(737000, 737020)


def series(values, days=DAYS):
    return LoadSeries(days, np.asarray(values, dtype=float))


def loop_metrics(L, Lh):
    """Plain-loop reference for the six indexes (loads in MW, output in GW)."""
    n_day, q = L.shape
    ape = se = ae = 0.0
    for d in range(n_day):
        for k in range(q):
            e = L[d, k] - Lh[d, k]
            ape += abs(e / L[d, k])
            se += e * e
            ae += abs(e)
    n = n_day * q
    dape = dse = dae = 0.0
    for d in range(n_day):
        a = sum(L[d]) / q
        p = sum(Lh[d]) / q
        dape += abs((a - p) / a)
        dse += (a - p) ** 2
        dae += abs(a - p)
    return (100 * ape / n, math.sqrt(se / n) / 1000, ae / n / 1000,
            100 * dape / n_day, math.sqrt(dse / n_day) / 1000, dae / n_day / 1000)


@pytest.fixture
def pair():
    rng = np.random.default_rng(0)
    L = rng.uniform(20000, 45000, (len(DAYS), 96))
    Lh = L * (1 + rng.normal(0, 0.02, L.shape))
    return series(L), series(Lh)


class TestMetrics:
    def test_perfect_forecast(self, pair):
        actual, _ = pair
        r = metrics_report(actual, actual, DAYS)
        assert all(getattr(r, k) == 0 for k in r.INDEXES)

    def test_flat_offset_example(self):
        actual = series(np.full((20, 96), 30000.0))
        pred = series(np.full((20, 96), 29700.0))
        mape, rmse, mae = quarter_metrics(actual, pred, DAYS)
        assert mape == pytest.approx(1.0, abs=1e-12)
        assert rmse == pytest.approx(0.3, abs=1e-12)
        assert mae == pytest.approx(0.3, abs=1e-12)

    def test_matches_loop_reference(self, pair):
        actual, pred = pair
        r = metrics_report(actual, pred, DAYS, dof=12.5)
        ref = loop_metrics(actual.values, pred.values)
        got = tuple(getattr(r, k) for k in r.INDEXES)
        np.testing.assert_allclose(got, ref, rtol=1e-10)
        assert r.n == 20 * 96 and r.n_day == 20 and r.dof == 12.5

    def test_single_quarter_spike_in_daily_mae(self):
        L = np.full((20, 96), 30000.0)
        Lh = L.copy()
        Lh[4, 10] += 960.0
        _, _, mae_daily = daily_metrics(series(L), series(Lh), DAYS)
        assert mae_daily == pytest.approx(0.01 / 20, abs=1e-15)

    def test_subset_of_days(self, pair):
        actual, pred = pair
        days = DAYS[::3]
        r = metrics_report(actual, pred, days)
        idx = np.searchsorted(DAYS, days)
        ref = loop_metrics(actual.values[idx], pred.values[idx])
        np.testing.assert_allclose([getattr(r, k) for k in r.INDEXES], ref, rtol=1e-10)

    def test_missing_forecast_day(self, pair):
        actual, pred = pair
        short = pred.subset(DAYS[:-1])
        with pytest.raises(CoverageError, match="lack a forecast"):
            quarter_metrics(actual, short, DAYS)
        with pytest.raises(CoverageError):
            quarter_metrics(actual, pred, [])

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1.0, 500.0), st.floats(1.0, 500.0))
    def test_offset_monotone(self, a, b):
        actual = series(np.full((20, 96), 30000.0))
        small, big = sorted((a, b))
        r1 = metrics_report(actual, series(actual.values + small), DAYS)
        r2 = metrics_report(actual, series(actual.values + big), DAYS)
        for k in r1.INDEXES:
            assert getattr(r1, k) <= getattr(r2, k) + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 100.0))
    def test_mape_scale_invariant(self, c):
        rng = np.random.default_rng(1)
        L = rng.uniform(1e4, 4e4, (20, 96))
        Lh = L * rng.uniform(0.95, 1.05, L.shape)
        base = metrics_report(series(L), series(Lh), DAYS)
        scaled = metrics_report(series(c * L), series(c * Lh), DAYS)
        assert scaled.mape_pct == pytest.approx(base.mape_pct, rel=1e-9)
        assert scaled.mape_daily_pct == pytest.approx(base.mape_daily_pct, rel=1e-9)
        assert scaled.rmse_gw == pytest.approx(c * base.rmse_gw, rel=1e-9)

    def test_relative_to(self):
        actual = series(np.full((20, 96), 30000.0))
        r1 = metrics_report(actual, series(np.full((20, 96), 29700.0)), DAYS)
        r2 = metrics_report(actual, series(np.full((20, 96), 29400.0)), DAYS)
        rel = r1.relative_to(r2)
        assert rel["mape_pct"] == pytest.approx(-50.0)
        assert rel["mae_daily_gw"] == pytest.approx(-50.0)


class TestResiduals:
    def test_units_are_gw(self):
        actual = series(np.full((20, 96), 30000.0))
        e = residuals(actual, series(np.full((20, 96), 29500.0)), DAYS)
        assert np.all(e.values == 0.5)

    def test_perfect_correlation(self):
        e = np.random.default_rng(2).standard_normal(500)
        assert residual_stats(e, 2 * e + 1).rho == pytest.approx(1.0)
        assert residual_stats(e, -e).rho == pytest.approx(-1.0)

    def test_white_noise_uncorrelated(self):
        rng = np.random.default_rng(3)
        n = 20000
        s = residual_stats(rng.standard_normal(n), rng.standard_normal(n))
        assert abs(s.rho) < 3 / math.sqrt(n)

    def test_population_moments(self):
        e = np.array([1.0, 2.0, 3.0, 6.0])
        s = residual_stats(e)
        assert s.bias == 3.0
        assert s.mse == pytest.approx(50 / 4)
        assert s.variance == pytest.approx(14 / 4)
        assert s.mse == pytest.approx(s.variance + s.bias**2)

    def test_alignment(self, pair):
        actual, pred = pair
        e1 = residuals(actual, pred, DAYS[:10])
        e2 = residuals(actual, pred, DAYS[1:11])
        with pytest.raises(AlignmentError):
            residual_stats(e1, e2)
        with pytest.raises(AlignmentError):
            residual_stats(np.zeros(5), np.zeros(6))
        with pytest.raises(ValidationError):
            residual_stats(np.array([]))

    def test_residual_csv(self, tmp_path, pair):
        actual, pred = pair
        e = residuals(actual, pred, DAYS[:2])
        path = tmp_path / "res.csv"
        write_residual_csv(e, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "date,q,residual_gw" and len(lines) == 1 + 2 * 96
        assert float(lines[1].split(",")[2]) == e.values[0, 0]


class TestAggregation:
    def test_identical_forecasts(self, pair):
        _, pred = pair
        np.testing.assert_array_equal(aggregate_forecasts([pred, pred]).values, pred.values)

    def test_example_midpoint(self):
        a = series(np.full((20, 96), 30000.0))
        b = series(np.full((20, 96), 32000.0))
        assert np.all(aggregate_forecasts([a, b]).values == 31000.0)

    def test_residual_of_average(self, pair):
        actual, pred = pair
        other = series(pred.values * 1.01)
        avg = aggregate_forecasts([pred, other])
        e1 = residuals(actual, pred, DAYS).values
        e2 = residuals(actual, other, DAYS).values
        ea = residuals(actual, avg, DAYS).values
        np.testing.assert_allclose(ea, (e1 + e2) / 2, atol=1e-12)

    def test_misaligned(self, pair):
        _, pred = pair
        with pytest.raises(AlignmentError):
            aggregate_forecasts([pred, pred.subset(DAYS[:5])])
        with pytest.raises(ValidationError):
            aggregate_forecasts([pred])

    def test_uncorrelated_unbiased_halves_mse(self):
        rng = np.random.default_rng(4)
        n = 200000
        e1, e2 = rng.normal(0, 1, n), rng.normal(0, 1, n)
        s1 = residual_stats(e1, e2)
        s2 = residual_stats(e2)
        p = predicted_mse_pair(s1, s2)
        assert p.predicted_mse == pytest.approx(0.5, abs=0.02)
        assert p.improves

    def test_identical_residuals(self):
        e = np.random.default_rng(5).normal(0.1, 1, 1000)
        p = predicted_mse_pair(residual_stats(e, e), residual_stats(e))
        assert p.predicted_mse == pytest.approx(np.mean(e**2), rel=1e-12)
        # worse < 3 better - 2 mse is false when both are equal
        assert not p.improves

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1))
    def test_empirical_identity(self, seed, b1, b2, mix):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((2, 300))
        e1 = b1 + z[0]
        e2 = b2 + mix * z[0] + z[1]
        p = predicted_mse_pair(residual_stats(e1, e2), residual_stats(e2))
        assert p.predicted_mse == pytest.approx(np.mean(((e1 + e2) / 2) ** 2), rel=1e-10, abs=1e-12)

    def test_improvement_rule(self):
        rng = np.random.default_rng(6)
        e1 = rng.normal(0, 1, 5000)
        e2 = rng.normal(0, 3, 5000)
        p = predicted_mse_pair(residual_stats(e1, e2), residual_stats(e2))
        # 9 > 3 * 1: averaging with a much worse, independent model does not pay
        assert p.better == 1 and not p.improves

    def test_missing_covariance(self):
        e = np.ones(4)
        with pytest.raises(ValidationError):
            predicted_mse_pair(residual_stats(e), residual_stats(e))


def test_report_json_nan_is_null(tmp_path):
    path = tmp_path / "r.json"
    write_report_json({"a": float("nan"), "b": np.float64(1.5), "c": [np.int64(2)],
                       "d": np.bool_(True)}, path)
    assert json.loads(path.read_text()) == {"a": None, "b": 1.5, "c": [2], "d": True}
