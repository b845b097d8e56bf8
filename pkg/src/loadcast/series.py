"""Load series containers, CSV ingestion and preprocessing.

The preprocessing chain is::

    L (MW) --log--> S --7-day difference--> Y~ --special-day mask--> Y

and training pairs ``(Y(d-1), Y(d))`` are drawn from the masked series.
All containers store one row of quarter-hour values per day, indexed by day
serial (see :mod:`loadcast.calendar`), and are read-only once built.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .calendar import SpecialDayCalendar, date_of, day_serial
from .errors import (
    ConflictError,
    NoTrainingPairsError,
    ParseError,
    ValidationError,
)

QUARTERS = 96

__all__ = [
    "QUARTERS",
    "DaySeries",
    "LoadSeries",
    "LogSeries",
    "DiffSeries",
    "TrainingSet",
    "ingest_csv",
    "log_transform",
    "seven_day_diff",
    "mask_special",
    "preprocess",
    "build_training_pairs",
    "year_range",
    "write_wide_csv",
    "write_long_csv",
    "write_skipped_report",
    "write_diff_csv",
]


def _readonly(arr, dtype):
    arr = np.array(arr, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DaySeries:
    """Per-day vectors of quarter-hour values.

    Attributes
    ----------
    days : (n,) int ndarray
        Strictly increasing day serials.
    values : (n, Q) float ndarray
        One row per day.
    """

    days: np.ndarray
    values: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        days = _readonly(self.days, np.int64).reshape(-1)
        values = _readonly(self.values, np.float64)
        if values.ndim != 2:
            values = values.reshape(len(days), -1)
            values.setflags(write=False)
        if values.shape[0] != days.shape[0]:
            raise ValidationError(
                f"{days.shape[0]} days but {values.shape[0]} value rows"
            )
        if np.any(np.diff(days) <= 0):
            raise ValidationError("day serials must be strictly increasing")
        object.__setattr__(self, "days", days)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", {int(d): k for k, d in enumerate(days)})
        self._validate()

    def _validate(self):
        pass

    @property
    def n_quarters(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return len(self.days)

    def __contains__(self, day) -> bool:
        return int(day) in self._index

    def __getitem__(self, day) -> np.ndarray:
        try:
            return self.values[self._index[int(day)]]
        except KeyError:
            raise KeyError(f"day serial {day} ({_fmt_day(day)}) not in series") from None

    def get(self, day, default=None):
        k = self._index.get(int(day))
        return default if k is None else self.values[k]

    def position(self, day) -> int:
        return self._index[int(day)]

    def dates(self) -> list[dt.date]:
        return [date_of(d) for d in self.days]

    def subset(self, days: Iterable[int]):
        """Rows for ``days`` (which must all be present), in sorted order."""
        days = sorted(int(d) for d in days)
        rows = [self._index[d] for d in days]
        return self._replace(np.asarray(days, dtype=np.int64), self.values[rows])

    def _replace(self, days, values):
        return type(self)(days, values)

    @classmethod
    def from_mapping(cls, mapping):
        """Build from ``{day serial or date: vector}``."""
        items = sorted((_to_serial(k), np.asarray(v, dtype=float)) for k, v in mapping.items())
        if not items:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, QUARTERS)))
        days = [k for k, _ in items]
        return cls(days, np.vstack([v for _, v in items]))


@dataclass(frozen=True, eq=False)
class LoadSeries(DaySeries):
    """Strictly positive loads in MW; ``skipped`` lists days dropped at ingestion."""

    skipped: tuple = ()

    def _validate(self):
        bad = ~(np.isfinite(self.values) & (self.values > 0))
        if bad.any():
            rows, cols = np.nonzero(bad)
            offenders = [
                f"{_fmt_day(self.days[r])} q{c + 1}={self.values[r, c]}"
                for r, c in zip(rows[:10], cols[:10])
            ]
            raise ValidationError(
                f"{bad.sum()} non-positive or non-finite loads: " + ", ".join(offenders)
            )

    def _replace(self, days, values):
        return type(self)(days, values, self.skipped)


@dataclass(frozen=True, eq=False)
class LogSeries(DaySeries):
    """Natural log of a :class:`LoadSeries`."""


@dataclass(frozen=True, eq=False)
class DiffSeries(DaySeries):
    """7-day differenced log-load with a per-day ``missing`` flag.

    Flagged days keep their numeric values; they are just not usable.
    """

    missing: np.ndarray = None

    def __post_init__(self):
        super().__post_init__()
        missing = np.zeros(len(self.days), dtype=bool) if self.missing is None else self.missing
        missing = _readonly(missing, bool).reshape(-1)
        if missing.shape[0] != len(self.days):
            raise ValidationError("missing flag length does not match days")
        object.__setattr__(self, "missing", missing)

    def _replace(self, days, values):
        raise NotImplementedError

    def subset(self, days):
        days = sorted(int(d) for d in days)
        rows = [self._index[d] for d in days]
        return DiffSeries(np.asarray(days, dtype=np.int64), self.values[rows], self.missing[rows])

    def usable(self, day) -> bool:
        k = self._index.get(int(day))
        return k is not None and not self.missing[k]


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Regressor/target pairs ``(Y(d-1), Y(d))`` in chronological order."""

    regressors: np.ndarray
    targets: np.ndarray
    days: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "regressors", _readonly(self.regressors, float))
        object.__setattr__(self, "targets", _readonly(self.targets, float))
        object.__setattr__(self, "days", _readonly(self.days, np.int64))
        if self.regressors.shape != self.targets.shape:
            raise ValidationError("regressor and target blocks differ in shape")

    def __len__(self):
        return len(self.days)

    @property
    def n_quarters(self) -> int:
        return self.regressors.shape[1]

    def gram(self) -> np.ndarray:
        """``G = sum_d Y(d-1) Y(d-1)^T``."""
        X = self.regressors
        return X.T @ X

    def cross(self) -> np.ndarray:
        """``B`` with column ``i`` equal to ``sum_d Y(d-1) Y(d, i)``."""
        return self.regressors.T @ self.targets

    def target_energy(self) -> float:
        return float(np.sum(self.targets**2))


def _to_serial(value) -> int:
    if isinstance(value, (int, np.integer)):
        return int(value)
    return day_serial(value)


def _fmt_day(serial) -> str:
    try:
        return date_of(serial).isoformat()
    except Exception:
        return str(serial)


def year_range(year: int) -> tuple[int, int]:
    """Inclusive serial range of a calendar year."""
    return day_serial(dt.date(year, 1, 1)), day_serial(dt.date(year, 12, 31))


# -- ingestion ---------------------------------------------------------------


def _parse_value(text, lineno):
    text = text.strip()
    if text == "" or text.lower() in ("nan", "na", "null"):
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"cannot parse load value {text!r}", line=lineno) from None


def _parse_timestamp(text, lineno):
    text = text.strip()
    try:
        stamp = dt.datetime.fromisoformat(text.replace("Z", ""))
    except ValueError:
        raise ParseError(f"cannot parse timestamp {text!r}", line=lineno) from None
    # wall-clock labels; the offset only tells DST repeats from true duplicates
    offset = stamp.utcoffset()
    stamp = stamp.replace(tzinfo=None)
    if stamp.minute % 15 or stamp.second or stamp.microsecond:
        raise ParseError(f"timestamp {text!r} is not on a quarter-hour", line=lineno)
    quarter = (stamp.hour * 60 + stamp.minute) // 15
    return day_serial(stamp.date()), quarter, offset


def _sniff_format(header):
    names = [h.strip().lower() for h in header]
    if len(names) == 2 and names[0] in ("timestamp", "datetime", "time"):
        return "long"
    if names and names[0] == "date" and len(names) == QUARTERS + 1:
        return "wide"
    raise ParseError(
        "unrecognised header; expected 'timestamp,load_mw' or 'date,v1,...,v96'", line=1
    )


def ingest_csv(path, format: str = "auto") -> LoadSeries:
    """Read a quarter-hourly load CSV.

    Parameters
    ----------
    path : path-like
        CSV file with a header row.
    format : {"auto", "long", "wide"}
        ``long``: ``timestamp,load_mw`` rows at 15-minute cadence (the
        timestamp labels the start of the quarter-hour). ``wide``:
        ``date,v1,...,v96`` rows. ``auto`` decides from the header.

    Returns
    -------
    LoadSeries
        Only days with all 96 samples present; the others are listed in
        ``skipped`` as ``(date, reason)``.

    Raises
    ------
    ParseError
        Malformed row (the message carries the line number).
    ConflictError
        The same (day, quarter) appears twice.
    ValidationError
        Zero or negative loads; all offenders are listed.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", line=1)
        fmt = _sniff_format(header) if format == "auto" else format
        if fmt == "long":
            cells, repeated = _read_long(reader)
        elif fmt == "wide":
            cells, repeated = _read_wide(reader)
        else:
            raise ValidationError(f"unknown CSV format {format!r}")
    return _assemble(cells, repeated)


def _read_long(reader):
    cells, offsets, repeated = {}, {}, {}
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
        day, quarter, offset = _parse_timestamp(row[0], lineno)
        value = _parse_value(row[1], lineno)
        slot = cells.setdefault(day, {})
        if quarter in slot:
            first = offsets[day, quarter]
            if offset is None or first is None or offset == first:
                raise ConflictError(
                    f"line {lineno}: duplicate sample for {_fmt_day(day)} quarter {quarter + 1}"
                )
            # same wall-clock label under another UTC offset: a DST repeat
            repeated[day] = repeated.get(day, 0) + 1
            continue
        offsets[day, quarter] = offset
        slot[quarter] = (value, lineno)
    return cells, repeated


def _read_wide(reader):
    cells = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != QUARTERS + 1:
            raise ParseError(f"expected {QUARTERS + 1} fields, got {len(row)}", line=lineno)
        try:
            day = day_serial(dt.date.fromisoformat(row[0].strip()))
        except ValueError:
            raise ParseError(f"cannot parse date {row[0]!r}", line=lineno) from None
        if day in cells:
            raise ConflictError(f"line {lineno}: duplicate row for {_fmt_day(day)}")
        cells[day] = {q: (_parse_value(v, lineno), lineno) for q, v in enumerate(row[1:])}
    return cells, {}


def _assemble(cells, repeated) -> LoadSeries:
    offenders = [
        f"line {lineno} ({_fmt_day(day)} q{q + 1}): {value}"
        for day, slot in sorted(cells.items())
        for q, (value, lineno) in sorted(slot.items())
        if not math.isnan(value) and value <= 0
    ]
    if offenders:
        raise ValidationError(f"{len(offenders)} non-positive loads: " + "; ".join(offenders))
    days, rows, skipped = [], [], []
    for day in sorted(cells):
        slot = cells[day]
        values = [slot[q][0] if q in slot else math.nan for q in range(QUARTERS)]
        n_valid = sum(1 for v in values if math.isfinite(v))
        if repeated.get(day):
            skipped.append((date_of(day), f"{QUARTERS + repeated[day]} samples (DST repeat)"))
            continue
        if n_valid != QUARTERS:
            skipped.append((date_of(day), f"{n_valid} of {QUARTERS} quarters valid"))
            continue
        days.append(day)
        rows.append(values)
    values = np.array(rows, dtype=float).reshape(len(rows), QUARTERS)
    return LoadSeries(np.array(days, dtype=np.int64), values, tuple(skipped))


# -- writers -----------------------------------------------------------------


def write_wide_csv(series: DaySeries, path, prefix: str = "v") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + [f"{prefix}{q + 1}" for q in range(series.n_quarters)])
        for day, row in zip(series.days, series.values):
            w.writerow([date_of(day).isoformat()] + [repr(float(v)) for v in row])


def write_long_csv(series: DaySeries, path, value_name: str = "load_mw") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", value_name])
        for day, row in zip(series.days, series.values):
            start = dt.datetime.combine(date_of(day), dt.time())
            for q, v in enumerate(row):
                stamp = start + dt.timedelta(minutes=15 * q)
                w.writerow([stamp.isoformat(timespec="minutes"), repr(float(v))])


def write_skipped_report(skipped, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "reason"])
        for day, reason in skipped:
            w.writerow([day.isoformat(), reason])


def write_diff_csv(series: DiffSeries, path) -> None:
    """Y series as ``date,missing,y1,...,yQ``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "missing"] + [f"y{q + 1}" for q in range(series.n_quarters)])
        for day, flag, row in zip(series.days, series.missing, series.values):
            w.writerow([date_of(day).isoformat(), int(flag)] + [repr(float(v)) for v in row])


# -- preprocessing -----------------------------------------------------------


def log_transform(load: LoadSeries) -> LogSeries:
    if np.any(load.values <= 0):
        raise ValidationError("log transform needs strictly positive loads")
    return LogSeries(load.days, np.log(load.values))


def seven_day_diff(log: LogSeries) -> DiffSeries:
    """``Y~(d) = S(d) - S(d-7)`` for every day where both exist."""
    days, rows = [], []
    for k, day in enumerate(log.days):
        lag = log.get(day - 7)
        if lag is not None:
            days.append(day)
            rows.append(log.values[k] - lag)
    values = np.array(rows, dtype=float).reshape(len(rows), log.n_quarters)
    return DiffSeries(np.array(days, dtype=np.int64), values)


def mask_special(diff: DiffSeries, cal: SpecialDayCalendar) -> DiffSeries:
    """Flag day ``d`` when ``d`` or ``d-7`` is special; values are untouched."""
    flags = np.array(
        [bool(cal.reasons(int(d))) or bool(cal.reasons(int(d) - 7)) for d in diff.days],
        dtype=bool,
    )
    return DiffSeries(diff.days, diff.values, diff.missing | flags)


def preprocess(load: LoadSeries, cal: SpecialDayCalendar) -> DiffSeries:
    return mask_special(seven_day_diff(log_transform(load)), cal)


def build_training_pairs(diff: DiffSeries, day_range) -> TrainingSet:
    """Pairs ``(Y(d-1), Y(d))`` for target days ``d`` in ``day_range``.

    Parameters
    ----------
    day_range : (first, last) or iterable of days
        Inclusive bounds as serials/dates, or an explicit collection of
        target days. An ``int`` is read as a calendar year.

    Raises
    ------
    NoTrainingPairsError
        If no target day in range has both members present and unmasked.
    """
    targets = _target_days(day_range)
    xs, ys, days = [], [], []
    for day in targets:
        if diff.usable(day) and diff.usable(day - 1):
            xs.append(diff[day - 1])
            ys.append(diff[day])
            days.append(day)
    if not days:
        raise NoTrainingPairsError("no training pairs in the requested day range")
    return TrainingSet(np.vstack(xs), np.vstack(ys), np.array(days, dtype=np.int64))


def _target_days(day_range) -> list[int]:
    if isinstance(day_range, (int, np.integer)):
        lo, hi = year_range(int(day_range))
        return list(range(lo, hi + 1))
    if isinstance(day_range, tuple) and len(day_range) == 2:
        lo, hi = (_to_serial(v) for v in day_range)
        if hi < lo:
            raise ValidationError("empty day range")
        return list(range(lo, hi + 1))
    days = sorted({_to_serial(v) for v in day_range})
    if not days:
        raise ValidationError("empty day range")
    return days
