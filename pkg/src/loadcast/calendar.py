"""Day-serial arithmetic and the special-day calendar.

Day serials count whole days from "January 0, year 0000" of the proleptic
Gregorian calendar, so 0000-01-01 has serial 1 and 2000-01-01 has serial
730486. Year 0 is a leap year under this convention.

Special days are the Italian holiday windows excluded from training and
evaluation: the winter break (Dec 22 - Jan 6), the summer break
(Aug 5 - Aug 24), five national holidays with two days either side, and
Easter from the Thursday before to Easter Monday.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DateRangeError, EasterUnknownError, ParseError

__all__ = [
    "SERIAL_OFFSET",
    "SpecialReason",
    "SpecialDayCalendar",
    "day_serial",
    "date_of",
    "is_special",
    "special_reasons",
    "special_day_set",
    "test_day_set",
    "load_easter_table",
]

# date.toordinal() counts 0001-01-01 as 1; year 0 adds a leap year of 366 days.
SERIAL_OFFSET = 366

NATIONAL_HOLIDAYS = {
    "liberation": (4, 25),
    "labour": (5, 1),
    "republic": (6, 2),
    "all_saints": (11, 1),
    "immaculate_conception": (12, 8),
}

_EASTER_MONTHS = (3, 4)


class SpecialReason(enum.Enum):
    NONE = "none"
    WINTER = "winter"
    SUMMER = "summer"
    EASTER = "easter"
    NATIONAL = "national"
    CUSTOM = "custom"

    def __bool__(self) -> bool:
        return self is not SpecialReason.NONE


def day_serial(date) -> int:
    """Return the day serial of a calendar date.

    Parameters
    ----------
    date : datetime.date, str or (year, month, day) tuple
        A ``datetime.date``/``datetime.datetime``, an ISO ``YYYY-MM-DD``
        string, or a tuple. Tuples may use year 0, which ``datetime.date``
        cannot represent.

    Raises
    ------
    DateRangeError
        If the date lies outside years 0000-9999 or is not a valid date.
    """
    if isinstance(date, dt.datetime):
        date = date.date()
    if isinstance(date, dt.date):
        return date.toordinal() + SERIAL_OFFSET
    if isinstance(date, str):
        text = date.strip()
        if text[:4] != "0000":
            try:
                return dt.date.fromisoformat(text).toordinal() + SERIAL_OFFSET
            except ValueError as exc:
                raise DateRangeError(f"invalid date {date!r}: {exc}") from None
        date = text.split("-")
    try:
        year, month, day = (int(v) for v in date)
    except (TypeError, ValueError):
        raise DateRangeError(f"cannot interpret {date!r} as a date") from None
    if year == 0:
        if not 1 <= month <= 12:
            raise DateRangeError(f"invalid month {month} in year 0")
        lengths = [31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]
        if not 1 <= day <= lengths[month - 1]:
            raise DateRangeError(f"invalid day {day} for 0000-{month:02d}")
        return sum(lengths[: month - 1]) + day
    try:
        return dt.date(year, month, day).toordinal() + SERIAL_OFFSET
    except ValueError as exc:
        raise DateRangeError(f"date {year:04d}-{month:02d}-{day:02d} out of range: {exc}") from None


def date_of(serial: int) -> dt.date:
    """Inverse of :func:`day_serial` for years 0001-9999."""
    serial = int(serial)
    ordinal = serial - SERIAL_OFFSET
    if ordinal < 1 or ordinal > dt.date.max.toordinal():
        raise DateRangeError(f"day serial {serial} outside years 0001-9999")
    return dt.date.fromordinal(ordinal)


def load_easter_table(path=None) -> dict[int, tuple[dt.date, dt.date]]:
    """Read an Easter-window table from CSV (``year,start,end``).

    With no path the bundled 1990-2019 table is read.
    """
    if path is None:
        text = resources.files("loadcast").joinpath("data/easter.csv").read_text()
    else:
        text = Path(path).read_text()
    table = {}
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header] != ["year", "start", "end"]:
        raise ParseError("Easter table header must be 'year,start,end'", line=1)
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line=lineno)
        try:
            year = int(row[0])
            start = dt.date.fromisoformat(row[1].strip())
            end = dt.date.fromisoformat(row[2].strip())
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if start.year != year or start.weekday() != 3 or (end - start).days != 4:
            raise ParseError(f"Easter window {row} is not Thursday-Monday of {year}",
                             line=lineno)
        table[year] = (start, end)
    return table


@dataclass(frozen=True)
class SpecialDayCalendar:
    """Rule set defining the special-day set.

    Each window family can be switched off, which is how artificial
    calendars for tests and synthetic experiments are built. ``extra_days``
    adds arbitrary ``datetime.date`` objects to the special set.
    """

    easter_table: Mapping[int, tuple[dt.date, dt.date]] = field(default_factory=dict)
    winter: bool = True
    summer: bool = True
    national: bool = True
    easter: bool = True
    national_holidays: Mapping[str, tuple[int, int]] = field(
        default_factory=lambda: dict(NATIONAL_HOLIDAYS)
    )
    national_halfwidth: int = 2
    extra_days: frozenset = frozenset()

    @classmethod
    def default(cls, easter_path=None) -> "SpecialDayCalendar":
        return cls(easter_table=load_easter_table(easter_path))

    @classmethod
    def empty(cls) -> "SpecialDayCalendar":
        """A calendar with no special days at all."""
        return cls(winter=False, summer=False, national=False, easter=False)

    def easter_window(self, year: int) -> tuple[dt.date, dt.date]:
        try:
            return self.easter_table[year]
        except KeyError:
            raise EasterUnknownError(year) from None

    def reasons(self, date) -> frozenset:
        """All reasons that make ``date`` special (empty if none)."""
        date = _as_date(date)
        found = set()
        md = (date.month, date.day)
        if self.winter and (md >= (12, 22) or md <= (1, 6)):
            found.add(SpecialReason.WINTER)
        if self.summer and (8, 5) <= md <= (8, 24):
            found.add(SpecialReason.SUMMER)
        if self.national:
            for month, day in self.national_holidays.values():
                centre = dt.date(date.year, month, day)
                if abs((date - centre).days) <= self.national_halfwidth:
                    found.add(SpecialReason.NATIONAL)
                    break
        # Easter windows always fall inside March-April; other months never
        # need the table.
        if self.easter and date.month in _EASTER_MONTHS:
            start, end = self.easter_window(date.year)
            if start <= date <= end:
                found.add(SpecialReason.EASTER)
        if date in self.extra_days:
            found.add(SpecialReason.CUSTOM)
        return frozenset(found)

    def is_special(self, date) -> SpecialReason:
        reasons = self.reasons(date)
        for reason in _PRIORITY:
            if reason in reasons:
                return reason
        return SpecialReason.NONE

    def national_holiday_of(self, date) -> str | None:
        """Name of the national holiday whose window contains ``date``."""
        date = _as_date(date)
        for name, (month, day) in self.national_holidays.items():
            if abs((date - dt.date(date.year, month, day)).days) <= self.national_halfwidth:
                return name
        return None


_PRIORITY = (
    SpecialReason.WINTER,
    SpecialReason.SUMMER,
    SpecialReason.EASTER,
    SpecialReason.NATIONAL,
    SpecialReason.CUSTOM,
)


def is_special(date, cal: SpecialDayCalendar) -> SpecialReason:
    """Classify a date; returns ``SpecialReason.NONE`` for ordinary days.

    Raises
    ------
    EasterUnknownError
        If the date falls in March/April of a year missing from the Easter
        table while Easter exclusion is enabled.
    """
    return cal.is_special(date)


def special_reasons(date, cal: SpecialDayCalendar) -> frozenset:
    return cal.reasons(date)


def special_day_set(first, last, cal: SpecialDayCalendar) -> set[int]:
    """Serials of all special days in the inclusive range ``[first, last]``."""
    lo, hi = _as_serial(first), _as_serial(last)
    return {s for s in range(lo, hi + 1) if cal.reasons(date_of(s))}


def test_day_set(year: int, cal: SpecialDayCalendar) -> set[int]:
    """Serials ``d`` in ``year`` with neither ``d`` nor ``d - 7`` special."""
    lo = day_serial(dt.date(year, 1, 1))
    hi = day_serial(dt.date(year, 12, 31))
    special = special_day_set(lo - 7, hi, cal)
    return {d for d in range(lo, hi + 1) if d not in special and d - 7 not in special}


test_day_set.__test__ = False  # not a pytest test despite the name


def _as_serial(value) -> int:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    return day_serial(value)


def _as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, str):
        return dt.date.fromordinal(day_serial(value) - SERIAL_OFFSET)
    return date_of(value)


def iter_year(year: int) -> Iterable[dt.date]:
    day = dt.date(year, 1, 1)
    while day.year == year:
        yield day
        day += dt.timedelta(days=1)
