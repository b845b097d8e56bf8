"""Forecast accuracy indexes, residual moments and forecast averaging.

Loads are handled in MW; reported RMSE/MAE, residuals and their moments are
in GW (MW / 1000). All sample moments divide by ``n`` so that the
decomposition of the averaged forecast's MSE holds exactly on a sample::

    MSE_avg = MSE_1/4 + MSE_2/4 + (Cov[e1, e2] + bias_1 * bias_2) / 2
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .calendar import date_of
from .errors import AlignmentError, CoverageError, ValidationError
from .series import DaySeries, LoadSeries

__all__ = [
    "MW_PER_GW",
    "MetricsReport",
    "ResidualSeries",
    "ResidualStats",
    "AggregationPrediction",
    "quarter_metrics",
    "daily_metrics",
    "metrics_report",
    "residuals",
    "residual_stats",
    "aggregate_forecasts",
    "predicted_mse_pair",
    "write_residual_csv",
    "write_report_json",
]

MW_PER_GW = 1000.0


@dataclass
class MetricsReport:
    mape_pct: float
    rmse_gw: float
    mae_gw: float
    mape_daily_pct: float
    rmse_daily_gw: float
    mae_daily_gw: float
    n: int
    n_day: int
    dof: float | None = None

    INDEXES = ("mape_pct", "rmse_gw", "mae_gw", "mape_daily_pct", "rmse_daily_gw", "mae_daily_gw")

    def as_dict(self) -> dict:
        return asdict(self)

    def relative_to(self, other: "MetricsReport") -> dict:
        """Percentage change of each index relative to ``other``."""
        return {
            k: 100.0 * (getattr(self, k) - getattr(other, k)) / getattr(other, k)
            if getattr(other, k) else math.nan
            for k in self.INDEXES
        }


def _aligned(actual: DaySeries, pred: DaySeries, days):
    days = sorted(int(d) for d in days)
    if not days:
        raise CoverageError("no days to evaluate")
    missing = [d for d in days if d not in pred]
    if missing:
        listed = ", ".join(date_of(d).isoformat() for d in missing[:10])
        raise CoverageError(f"{len(missing)} evaluation day(s) lack a forecast: {listed}")
    missing = [d for d in days if d not in actual]
    if missing:
        listed = ", ".join(date_of(d).isoformat() for d in missing[:10])
        raise CoverageError(f"{len(missing)} evaluation day(s) lack observed load: {listed}")
    L = np.vstack([actual[d] for d in days])
    Lh = np.vstack([pred[d] for d in days])
    return days, L, Lh


def quarter_metrics(actual: DaySeries, pred: DaySeries, days) -> tuple[float, float, float]:
    """Quarter-hourly ``(MAPE %, RMSE GW, MAE GW)`` over ``days``."""
    _, L, Lh = _aligned(actual, pred, days)
    err = L - Lh
    n = err.size
    mape = 100.0 / n * np.sum(np.abs(err / L))
    rmse = math.sqrt(np.sum(err**2) / n) / MW_PER_GW
    mae = np.sum(np.abs(err)) / n / MW_PER_GW
    return float(mape), float(rmse), float(mae)


def daily_metrics(actual: DaySeries, pred: DaySeries, days) -> tuple[float, float, float]:
    """``(MAPE %, RMSE GW, MAE GW)`` of the daily mean loads over ``days``."""
    _, L, Lh = _aligned(actual, pred, days)
    Ld = L.mean(axis=1)
    Lhd = Lh.mean(axis=1)
    err = Ld - Lhd
    n_day = err.size
    mape = 100.0 / n_day * np.sum(np.abs(err / Ld))
    rmse = math.sqrt(np.sum(err**2) / n_day) / MW_PER_GW
    mae = np.sum(np.abs(err)) / n_day / MW_PER_GW
    return float(mape), float(rmse), float(mae)


def metrics_report(actual: DaySeries, pred: DaySeries, days, dof=None) -> MetricsReport:
    days = sorted(int(d) for d in days)
    q = quarter_metrics(actual, pred, days)
    dly = daily_metrics(actual, pred, days)
    return MetricsReport(*q, *dly, n=len(days) * actual.n_quarters, n_day=len(days), dof=dof)


# -- residuals ----------------------------------------------------------------


@dataclass(frozen=True)
class ResidualSeries:
    """Residuals ``L - L^`` in GW on a set of days."""

    days: np.ndarray
    values: np.ndarray

    def flat(self) -> np.ndarray:
        return self.values.ravel()


def residuals(actual: DaySeries, pred: DaySeries, days) -> ResidualSeries:
    days, L, Lh = _aligned(actual, pred, days)
    return ResidualSeries(np.asarray(days, dtype=np.int64), (L - Lh) / MW_PER_GW)


@dataclass
class ResidualStats:
    """Population moments of a residual sample.

    ``cov`` and ``rho`` describe the pairing with a second residual series
    when one was given.
    """

    bias: float
    mse: float
    variance: float
    n: int
    cov: float | None = None
    rho: float | None = None
    partner_bias: float | None = None
    partner_mse: float | None = None


def _values(e):
    if isinstance(e, ResidualSeries):
        return e.days, e.flat()
    return None, np.asarray(e, dtype=float).ravel()


def residual_stats(e1, e2=None) -> ResidualStats:
    """Bias, MSE and variance of ``e1``; covariance and correlation with ``e2``.

    Raises
    ------
    AlignmentError
        If ``e2`` is given on a different support than ``e1``.
    """
    days1, x = _values(e1)
    if x.size == 0:
        raise ValidationError("empty residual sample")
    bias = float(x.mean())
    mse = float(np.mean(x**2))
    var = float(np.mean((x - bias) ** 2))
    stats = ResidualStats(bias=bias, mse=mse, variance=var, n=x.size)
    if e2 is None:
        return stats
    days2, y = _values(e2)
    if x.shape != y.shape or (
        days1 is not None and days2 is not None and not np.array_equal(days1, days2)
    ):
        raise AlignmentError("residual series are not on the same support")
    b2 = float(y.mean())
    cov = float(np.mean((x - bias) * (y - b2)))
    var2 = float(np.mean((y - b2) ** 2))
    denom = math.sqrt(var * var2)
    stats.cov = cov
    stats.rho = float(np.clip(cov / denom, -1.0, 1.0)) if denom > 0 else math.nan
    stats.partner_bias = b2
    stats.partner_mse = float(np.mean(y**2))
    return stats


def aggregate_forecasts(preds: Sequence[DaySeries]) -> LoadSeries:
    """Pointwise mean of two or more forecasts on a common set of days."""
    if len(preds) < 2:
        raise ValidationError("aggregation needs at least two forecasts")
    days = preds[0].days
    for p in preds[1:]:
        if not np.array_equal(p.days, days) or p.n_quarters != preds[0].n_quarters:
            raise AlignmentError("forecasts to aggregate cover different days")
    return LoadSeries(days, np.mean([p.values for p in preds], axis=0))


@dataclass
class AggregationPrediction:
    """Predicted MSE of the average of two forecasts.

    ``improves`` tells whether averaging is predicted to beat the better of
    the two, i.e. ``MSE_worse < 3 MSE_better - 2 (Cov + b1 b2)``.
    """

    predicted_mse: float
    improves: bool
    better: int


def predicted_mse_pair(stats1: ResidualStats, stats2: ResidualStats) -> AggregationPrediction:
    """Predicted MSE of the two-model average from residual moments.

    The covariance is taken from whichever argument carries it.
    """
    cov = stats1.cov if stats1.cov is not None else stats2.cov
    if cov is None:
        raise ValidationError("residual covariance missing; call residual_stats(e1, e2)")
    m1, m2 = stats1.mse, stats2.mse
    cross = cov + stats1.bias * stats2.bias
    predicted = 0.25 * m1 + 0.25 * m2 + 0.5 * cross
    if m1 <= m2:
        better, best, worst = 1, m1, m2
    else:
        better, best, worst = 2, m2, m1
    return AggregationPrediction(predicted, bool(worst < 3.0 * best - 2.0 * cross), better)


# -- export --------------------------------------------------------------------


def write_residual_csv(res: ResidualSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "q", "residual_gw"])
        for day, row in zip(res.days, res.values):
            iso = date_of(day).isoformat()
            for q, v in enumerate(row, start=1):
                w.writerow([iso, q, repr(float(v))])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


def write_report_json(report, path) -> None:
    Path(path).write_text(json.dumps(_jsonable(report), indent=2))
