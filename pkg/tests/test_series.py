import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from loadcast.calendar import SpecialDayCalendar, day_serial
from loadcast.errors import ConflictError, NoTrainingPairsError, ParseError, ValidationError
from loadcast.experiment import SyntheticSpec, synth_generate
from loadcast.series import (
    DiffSeries,
    LoadSeries,
    LogSeries,
    build_training_pairs,
    ingest_csv,
    log_transform,
    mask_special,
    preprocess,
    seven_day_diff,
    write_long_csv,
    write_skipped_report,
    write_wide_csv,
)

D0 = day_serial(dt.date(2018, 9, 3))


def constant_load(days, value=30000.0):
    return LoadSeries(np.asarray(days), np.full((len(days), 96), value))


def write_wide(path, rows):
    with open(path, "w") as fh:
        fh.write("date," + ",".join(f"v{q}" for q in range(1, 97)) + "\n")
        for date, values in rows:
            fh.write(date + "," + ",".join(str(v) for v in values) + "\n")


def write_long(path, samples):
    with open(path, "w") as fh:
        fh.write("timestamp,load_mw\n")
        for stamp, value in samples:
            fh.write(f"{stamp},{value}\n")


def day_stamps(date, tz=""):
    start = dt.datetime.combine(date, dt.time())
    return [(start + dt.timedelta(minutes=15 * q)).isoformat(timespec="minutes") + tz
            for q in range(96)]


class TestContainers:
    def test_rejects_nonpositive_and_ragged(self):
        with pytest.raises(ValidationError):
            LoadSeries(np.array([1]), np.zeros((1, 96)))
        with pytest.raises(ValidationError):
            LoadSeries(np.array([1, 2]), np.ones((3, 96)))

    def test_days_must_increase(self):
        with pytest.raises(ValidationError):
            LoadSeries(np.array([2, 1]), np.ones((2, 96)))

    def test_read_only(self):
        s = constant_load([D0])
        with pytest.raises(ValueError):
            s.values[0, 0] = 1.0

    def test_lookup(self):
        s = constant_load([D0, D0 + 1])
        assert D0 + 1 in s and D0 + 2 not in s
        assert s.get(D0 + 2) is None
        assert s[D0].shape == (96,)


class TestIngest:
    def test_wide_constant_day(self, tmp_path):
        path = tmp_path / "w.csv"
        write_wide(path, [("2018-10-01", [30000] * 96)])
        s = ingest_csv(path, "wide")
        assert list(s.days) == [day_serial("2018-10-01")]
        assert np.all(s.values == 30000.0)
        assert s.skipped == ()

    def test_long_missing_quarter_skips_day(self, tmp_path):
        path = tmp_path / "l.csv"
        d1, d2 = dt.date(2018, 10, 1), dt.date(2018, 10, 2)
        samples = [(t, 30000) for t in day_stamps(d1)] + [(t, 31000) for t in day_stamps(d2)[:-1]]
        write_long(path, samples)
        s = ingest_csv(path)
        assert list(s.days) == [day_serial(d1)]
        assert s.skipped == ((d2, "95 of 96 quarters valid"),)
        report = tmp_path / "skipped.csv"
        write_skipped_report(s.skipped, report)
        assert report.read_text().splitlines() == ["date,reason", "2018-10-02,95 of 96 quarters valid"]

    def test_nan_value_skips_day(self, tmp_path):
        path = tmp_path / "w.csv"
        write_wide(path, [("2018-10-01", [30000] * 95 + ["nan"])])
        s = ingest_csv(path)
        assert len(s) == 0 and len(s.skipped) == 1

    def test_synthetic_fourteen_days(self, tmp_path):
        load, _ = synth_generate(SyntheticSpec(n_days=14, start="2018-10-01", seed=5))
        path = tmp_path / "s.csv"
        write_wide_csv(load, path)
        s = ingest_csv(path)
        assert len(s) == 14
        assert np.all(np.diff(s.days) == 1)
        np.testing.assert_array_equal(s.values, load.values)

    def test_parse_error_has_line(self, tmp_path):
        path = tmp_path / "l.csv"
        write_long(path, [("2018-10-01T00:00", 1.0), ("2018-10-01T00:15", "abc")])
        with pytest.raises(ParseError) as info:
            ingest_csv(path)
        assert info.value.line == 3

    def test_off_grid_timestamp(self, tmp_path):
        path = tmp_path / "l.csv"
        write_long(path, [("2018-10-01T00:07", 1.0)])
        with pytest.raises(ParseError):
            ingest_csv(path)

    def test_duplicate_is_conflict(self, tmp_path):
        path = tmp_path / "l.csv"
        write_long(path, [("2018-10-01T00:00", 1.0), ("2018-10-01T00:00", 2.0)])
        with pytest.raises(ConflictError):
            ingest_csv(path)

    def test_duplicate_wide_row(self, tmp_path):
        path = tmp_path / "w.csv"
        write_wide(path, [("2018-10-01", [1] * 96), ("2018-10-01", [1] * 96)])
        with pytest.raises(ConflictError):
            ingest_csv(path)

    def test_nonpositive_lists_offenders(self, tmp_path):
        path = tmp_path / "w.csv"
        write_wide(path, [("2018-10-01", [1] * 94 + [0, -3])])
        with pytest.raises(ValidationError) as info:
            ingest_csv(path)
        msg = str(info.value)
        assert "2 non-positive" in msg and "q95" in msg and "q96" in msg

    def test_dst_days_skipped(self, tmp_path):
        # spring forward: 92 labels; fall back: 02:00-02:45 appear twice
        spring, autumn, plain = dt.date(2018, 3, 25), dt.date(2018, 10, 28), dt.date(2018, 10, 29)
        samples = []
        for q, t in enumerate(day_stamps(spring)):
            if not 8 <= q < 12:
                samples.append((t + ("+01:00" if q < 8 else "+02:00"), 1.0))
        for q, t in enumerate(day_stamps(autumn)):
            samples.append((t + ("+02:00" if q < 12 else "+01:00"), 1.0))
            if 8 <= q < 12:
                samples.append((t + "+01:00", 1.0))
        samples += [(t + "+01:00", 1.0) for t in day_stamps(plain)]
        path = tmp_path / "dst.csv"
        write_long(path, samples)
        s = ingest_csv(path)
        assert list(s.days) == [day_serial(plain)]
        reasons = dict(s.skipped)
        assert reasons[spring] == "92 of 96 quarters valid"
        assert reasons[autumn] == "100 samples (DST repeat)"

    def test_format_invariance_of_pairs(self, tmp_path, empty_calendar):
        load, _ = synth_generate(SyntheticSpec(n_days=40, start="2018-10-01", seed=2))
        wide, long = tmp_path / "w.csv", tmp_path / "l.csv"
        write_wide_csv(load, wide)
        write_long_csv(load, long)
        rng = (load.days[0], load.days[-1])
        a = build_training_pairs(preprocess(ingest_csv(wide), empty_calendar), rng)
        b = build_training_pairs(preprocess(ingest_csv(long), empty_calendar), rng)
        np.testing.assert_array_equal(a.days, b.days)
        np.testing.assert_array_equal(a.regressors, b.regressors)
        np.testing.assert_array_equal(a.targets, b.targets)

    def test_unknown_header(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("foo,bar,baz\n1,2,3\n")
        with pytest.raises(ParseError):
            ingest_csv(path)


class TestTransforms:
    def test_log_constant(self):
        S = log_transform(constant_load([D0]))
        np.testing.assert_allclose(S.values, 10.308953, atol=5e-7)

    def test_log_exact_inverse(self):
        S = log_transform(constant_load([D0], math.exp(10.0)))
        np.testing.assert_allclose(S.values, 10.0, rtol=0, atol=1e-12)

    @given(arrays(float, (2, 96), elements=st.floats(1e-3, 1e6)))
    def test_log_round_trip(self, v):
        S = log_transform(LoadSeries(np.array([D0, D0 + 1]), v))
        np.testing.assert_allclose(np.exp(S.values), v, rtol=1e-12)

    def test_periodic_annihilated(self):
        rng = np.random.default_rng(0)
        week = rng.normal(10, 0.1, (7, 96))
        S = LogSeries(np.arange(D0, D0 + 28), np.tile(week, (4, 1)))
        Y = seven_day_diff(S)
        assert list(Y.days) == list(range(D0 + 7, D0 + 28))
        np.testing.assert_array_equal(Y.values, 0.0)

    def test_linear_trend_gives_constant(self):
        alpha = 0.013
        days = np.arange(D0, D0 + 20)
        S = LogSeries(days, np.outer(alpha * (days - D0), np.ones(96)) + 10.0)
        Y = seven_day_diff(S)
        np.testing.assert_allclose(Y.values, 7 * alpha, rtol=1e-12)

    def test_gap_propagates(self):
        days = np.array([D0 + k for k in range(20) if k != 3])
        Y = seven_day_diff(log_transform(constant_load(days)))
        assert D0 + 3 not in Y and D0 + 10 not in Y and D0 + 11 in Y


class TestMasking:
    def test_examples(self, default_calendar):
        days = np.arange(day_serial("2018-09-01"), day_serial("2019-01-20"))
        Y = preprocess(constant_load(days), default_calendar)
        assert not Y.usable(day_serial("2018-12-25"))
        assert not Y.usable(day_serial("2019-01-13"))
        assert Y.usable(day_serial("2018-10-02"))
        assert Y.usable(day_serial("2019-01-14"))

    def test_values_untouched(self, default_calendar):
        rng = np.random.default_rng(1)
        days = np.arange(day_serial("2018-07-20"), day_serial("2018-09-10"))
        raw = seven_day_diff(log_transform(LoadSeries(days, rng.uniform(1, 2, (len(days), 96)))))
        masked = mask_special(raw, default_calendar)
        np.testing.assert_array_equal(raw.values, masked.values)
        assert masked.missing.sum() > 0

    def test_mask_rule_exhaustive(self, default_calendar):
        days = np.arange(day_serial("2017-12-01"), day_serial("2019-01-31"))
        Y = preprocess(constant_load(days), default_calendar)
        for d, flag in zip(Y.days, Y.missing):
            expected = bool(default_calendar.reasons(int(d))) or bool(
                default_calendar.reasons(int(d) - 7))
            assert flag == expected

    def test_constant_series_gives_zero(self, default_calendar):
        days = np.arange(day_serial("2018-01-01"), day_serial("2018-12-31"))
        Y = preprocess(constant_load(days), default_calendar)
        assert np.all(Y.values[~Y.missing] == 0.0)


class TestTrainingPairs:
    def test_ten_days_nine_pairs(self, empty_calendar):
        days = np.arange(D0 - 7, D0 + 10)
        Y = preprocess(constant_load(days), empty_calendar)
        train = build_training_pairs(Y, (D0, D0 + 9))
        assert len(train) == 9
        assert list(train.days) == list(range(D0 + 1, D0 + 10))

    def test_only_special_days(self, default_calendar):
        days = np.arange(day_serial("2018-07-01"), day_serial("2018-09-30"))
        Y = preprocess(constant_load(days), default_calendar)
        with pytest.raises(NoTrainingPairsError):
            build_training_pairs(Y, ("2018-08-06", "2018-08-24"))

    def test_pair_count_matches_enumeration(self, synthetic_years, default_calendar):
        Y = preprocess(synthetic_years, default_calendar)
        train = build_training_pairs(Y, 2018)
        cal = default_calendar

        def clean(d):
            return not cal.reasons(d) and not cal.reasons(d - 7)

        lo, hi = day_serial("2018-01-01"), day_serial("2018-12-31")
        expected = [d for d in range(lo, hi + 1) if clean(d) and clean(d - 1)]
        assert list(train.days) == expected
        k = Y.position(expected[0])
        np.testing.assert_array_equal(train.regressors[0], Y.values[k - 1])

    def test_gram_and_cross(self):
        rng = np.random.default_rng(4)
        days = np.arange(D0, D0 + 30)
        Y = DiffSeries(days, rng.standard_normal((30, 96)))
        t = build_training_pairs(Y, (D0, D0 + 29))
        G, B = t.gram(), t.cross()
        np.testing.assert_allclose(G, sum(np.outer(x, x) for x in t.regressors))
        # column i of B is sum_d Y(d-1) Y(d, i)
        np.testing.assert_allclose(B[:, 5], t.regressors.T @ t.targets[:, 5])

    @settings(max_examples=25, deadline=None)
    @given(st.sets(st.integers(0, 39), max_size=15))
    def test_pairs_skip_any_missing(self, holes):
        days = np.arange(D0, D0 + 40)
        missing = np.array([k in holes for k in range(40)])
        Y = DiffSeries(days, np.ones((40, 96)), missing)
        expected = [D0 + k for k in range(1, 40) if k not in holes and k - 1 not in holes]
        if not expected:
            with pytest.raises(NoTrainingPairsError):
                build_training_pairs(Y, (D0, D0 + 39))
        else:
            assert list(build_training_pairs(Y, (D0, D0 + 39)).days) == expected


def test_calendar_fixture_default_is_real(default_calendar):
    assert isinstance(default_calendar, SpecialDayCalendar)
