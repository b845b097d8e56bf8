"""One-day-ahead load forecasts from a fitted weight surface.

``L^(d) = exp(A Y(d-1) + S(d-7))``, issued only for test days whose
context (an unmasked ``Y(d-1)`` and the log-load ``S(d-7)``) is complete.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calendar import SpecialDayCalendar, date_of, day_serial, test_day_set
from .errors import CoverageError, OverflowRangeError, ParseError, ValidationError
from .estimators import WeightSurface
from .series import LoadSeries, QUARTERS, log_transform, preprocess

__all__ = [
    "ForecastDay",
    "predict_diff",
    "reconstruct_load",
    "rolling_forecast",
    "forecast_series",
    "write_forecast_csv",
    "read_forecast_csv",
]

EXP_LIMIT = 700.0


@dataclass(frozen=True)
class ForecastDay:
    day: int
    values: np.ndarray
    y_hat: np.ndarray

    @property
    def date(self):
        return date_of(self.day)


def predict_diff(surface, y_prev) -> np.ndarray:
    """``Y^(d) = A Y(d-1)``; ``surface`` is a WeightSurface or a plain matrix."""
    if isinstance(surface, WeightSurface):
        return surface.apply(y_prev)
    return np.asarray(surface, dtype=float) @ np.asarray(y_prev, dtype=float)


def reconstruct_load(y_hat, s_lag7) -> np.ndarray:
    """``exp(y_hat + s_lag7)`` in the units of the original load.

    Raises
    ------
    OverflowRangeError
        If any exponent exceeds 700 in magnitude.
    """
    z = np.asarray(y_hat, dtype=float) + np.asarray(s_lag7, dtype=float)
    if not np.all(np.isfinite(z)) or np.any(np.abs(z) > EXP_LIMIT):
        raise OverflowRangeError("forecast exponent outside [-700, 700] or not finite")
    return np.exp(z)


def rolling_forecast(surface, data: LoadSeries, cal: SpecialDayCalendar, year: int,
                     days=None) -> list[ForecastDay]:
    """Forecast every test day of ``year`` that has complete context.

    Each forecast for day ``d`` reads only loads from days ``d-8 .. d-1``.

    Parameters
    ----------
    days : iterable of int, optional
        Restrict to these target days (still intersected with the test set).

    Raises
    ------
    CoverageError
        If no day can be forecast.
    """
    targets = sorted(test_day_set(year, cal))
    if days is not None:
        wanted = {int(d) for d in days}
        targets = [d for d in targets if d in wanted]
    Y = preprocess(data, cal)
    S = log_transform(data)
    out = []
    for d in targets:
        if not Y.usable(d - 1):
            continue
        s_lag = S.get(d - 7)
        if s_lag is None:
            continue
        y_hat = predict_diff(surface, Y[d - 1])
        out.append(ForecastDay(d, reconstruct_load(y_hat, s_lag), y_hat))
    if not out:
        raise CoverageError(f"no day of {year} has complete forecasting context")
    return out


def forecast_series(forecasts) -> LoadSeries:
    """Stack a list of :class:`ForecastDay` into a :class:`LoadSeries`."""
    if not forecasts:
        raise ValidationError("no forecasts to stack")
    forecasts = sorted(forecasts, key=lambda f: f.day)
    return LoadSeries(np.array([f.day for f in forecasts]), np.vstack([f.values for f in forecasts]))


def write_forecast_csv(forecasts, path) -> None:
    """Long format ``date,q,load_pred_mw`` with ``q`` running 1..96."""
    series = forecasts if isinstance(forecasts, LoadSeries) else forecast_series(forecasts)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "q", "load_pred_mw"])
        for day, row in zip(series.days, series.values):
            iso = date_of(day).isoformat()
            for q, v in enumerate(row, start=1):
                w.writerow([iso, q, repr(float(v))])


def read_forecast_csv(path) -> LoadSeries:
    """Read a file written by :func:`write_forecast_csv`."""
    cells: dict[int, dict[int, float]] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "q", "load_pred_mw"]:
            raise ParseError("forecast header must be 'date,q,load_pred_mw'", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                day = day_serial(row[0].strip())
                q = int(row[1])
                value = float(row[2])
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not 1 <= q <= QUARTERS:
                raise ParseError(f"quarter {q} outside 1..{QUARTERS}", line=lineno)
            slot = cells.setdefault(day, {})
            if q in slot:
                raise ParseError(f"duplicate forecast for {row[0]} q{q}", line=lineno)
            slot[q] = value
    incomplete = [date_of(d).isoformat() for d, s in cells.items() if len(s) != QUARTERS]
    if incomplete:
        raise CoverageError(f"incomplete forecast days: {', '.join(sorted(incomplete)[:10])}")
    days = sorted(cells)
    values = np.array([[cells[d][q] for q in range(1, QUARTERS + 1)] for d in days])
    return LoadSeries(np.array(days, dtype=np.int64), values.reshape(len(days), QUARTERS))
