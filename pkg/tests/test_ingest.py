import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solarhybrid.ingest import (HOURS_PER_DAY, HourlySeries, IngestError, SplitSpec, daytime_filter,
                                daytime_selection, load_csv, repair_missing, split, split_sizes)
from solarhybrid.solar_geometry import StationMeta

HEADER = "timestamp,ghi_whm2,pressure_pa,cloud_octas,precip_mm\n"


def _write(tmp_path, body, name="st.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body)
    return path


def _hours(start, n):
    return np.datetime64(start, "s") + np.arange(n) * np.timedelta64(1, "h")


def test_load_three_valid_rows(tmp_path):
    path = _write(tmp_path, "2010-01-01T10:00:00,100,101300,3,0\n"
                            "2010-01-01T11:00:00,200,101250,4,0\n"
                            "2010-01-01T12:00:00,,101200,5,0.4\n")
    s = load_csv(path)
    assert len(s) == 3
    assert s.repair_fraction == 0.0
    assert s.missing_count == 1
    assert s.station_id == "st"
    np.testing.assert_array_equal(s.pressure_gradient, [0.0, -50.0, -50.0])


def test_duplicate_timestamp_names_row(tmp_path):
    path = _write(tmp_path, "2010-01-01T10:00:00,100,1,3,0\n"
                            "2010-01-01T10:00:00,100,1,3,0\n")
    with pytest.raises(IngestError, match="duplicate timestamp at row 3"):
        load_csv(path)


def test_octas_out_of_range(tmp_path):
    path = _write(tmp_path, "2010-01-01T10:00:00,100,1,9,0\n")
    with pytest.raises(IngestError, match="octas out of range"):
        load_csv(path)


@pytest.mark.parametrize("row,message", [
    ("2010-01-01T10:00:00,-5,1,3,0\n", "negative radiation"),
    ("2010-01-01T10:00:00,abc,1,3,0\n", "unparseable radiation"),
    ("yesterday,5,1,3,0\n", "unparseable timestamp"),
    ("2010-01-01T10:00:00,5,1,3,-1\n", "negative precipitation"),
])
def test_rejects_bad_values(tmp_path, row, message):
    with pytest.raises(IngestError, match=message):
        load_csv(_write(tmp_path, row))


def test_missing_mandatory_column(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("timestamp,pressure_pa\n2010-01-01T10:00:00,1\n")
    with pytest.raises(IngestError, match="ghi_whm2"):
        load_csv(path)


def test_custom_schema(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("when,glo\n2010-01-01T10:00:00,7\n")
    s = load_csv(path, schema={"timestamp": "when", "radiation": "glo"})
    assert s.radiation[0] == 7.0 and s.pressure is None


def _series(radiation, start="2010-01-01T00:00:00"):
    radiation = np.asarray(radiation, dtype=float)
    return HourlySeries("s", _hours(start, len(radiation)), radiation)


def test_repair_without_gaps_is_identity():
    s = _series(np.arange(48.0))
    r = repair_missing(s)
    np.testing.assert_array_equal(r.radiation, s.radiation)
    assert r.repair_fraction == 0.0


def test_repair_uses_same_hour_mean():
    rad = np.zeros(72)
    rad[10], rad[34], rad[58] = 100.0, np.nan, 300.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = repair_missing(_series(rad), max_missing_frac=1.0)
    assert r.radiation[34] == 200.0
    assert r.repaired_flags.sum() == 1


def test_repair_whole_hour_missing_fails():
    rad = np.ones(48)
    rad[[11, 35]] = np.nan
    with pytest.raises(IngestError, match="hour 11"):
        repair_missing(_series(rad), max_missing_frac=1.0)


def test_repair_warns_above_ceiling():
    rad = np.ones(48)
    rad[[3, 4, 5]] = np.nan
    with pytest.warns(RuntimeWarning, match="repaired"):
        repair_missing(_series(rad), max_missing_frac=0.04)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.one_of(st.none(), st.floats(0, 1000)), min_size=48, max_size=96))
def test_repair_idempotent(values):
    rad = np.array([np.nan if v is None else v for v in values])
    hours = np.arange(len(rad)) % 24
    for h in range(24):
        if np.all(np.isnan(rad[hours == h])):
            rad[np.flatnonzero(hours == h)[0]] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        once = repair_missing(_series(rad), max_missing_frac=1.0)
        twice = repair_missing(once, max_missing_frac=1.0)
    np.testing.assert_array_equal(once.radiation, twice.radiation)
    np.testing.assert_array_equal(once.repaired_flags, twice.repaired_flags)


def test_exogenous_channels_repaired():
    rad = np.ones(48)
    press = np.full(48, 1000.0)
    press[5] = np.nan
    s = HourlySeries("s", _hours("2010-01-01T00:00:00", 48), rad, pressure=press)
    r = repair_missing(s)
    assert r.pressure[5] == 1000.0
    assert r.repair_fraction == 0.0


GREENWICH = StationMeta("g", 0.8, 0.0)


def test_daytime_full_day_keeps_nine():
    out = daytime_filter(_series(np.ones(24), "2010-06-01T00:00:00"), GREENWICH)
    assert len(out) == HOURS_PER_DAY
    hours = out.timestamps.astype("datetime64[h]").astype(int) % 24
    np.testing.assert_array_equal(hours, np.arange(8, 17))


def test_daytime_two_days_adjacent():
    s = _series(np.arange(48.0), "2010-06-01T00:00:00")
    out = daytime_filter(s, GREENWICH)
    assert len(out) == 18
    # last sample of day 1 is followed directly by the first of day 2
    assert out.radiation[8] == 16.0 and out.radiation[9] == 32.0
    np.testing.assert_array_equal(out.slots[9:], out.slots[:9] + HOURS_PER_DAY)


def test_daytime_empty_series():
    empty = HourlySeries("s", np.array([], dtype="datetime64[s]"), np.array([]))
    assert len(daytime_filter(empty, GREENWICH)) == 0


def test_daytime_incomplete_day_fails():
    with pytest.raises(IngestError, match="incomplete daytime window"):
        daytime_filter(_series(np.ones(12), "2010-06-01T00:00:00"), GREENWICH)


def test_daytime_drops_feb29():
    s = _series(np.ones(24 * 3), "2012-02-28T00:00:00")
    out = daytime_filter(s, GREENWICH)
    assert len(out) == 2 * HOURS_PER_DAY
    assert out.slots[9] == out.slots[0] + HOURS_PER_DAY


@settings(max_examples=25, deadline=None)
@given(days=st.integers(1, 20), lon=st.floats(-170, 170))
def test_daytime_length_is_nine_per_day(days, lon):
    meta = StationMeta.from_degrees("x", 30.0, lon)
    s = _series(np.ones(24 * (days + 2)), "2010-04-30T00:00:00")
    _, dates, _ = daytime_selection(s.timestamps, meta.longitude)
    first = np.datetime64("2010-05-01")
    inside = (dates >= first) & (dates < first + np.timedelta64(days, "D"))
    out = daytime_filter(s.take(np.flatnonzero(inside)), meta)
    assert len(out) == HOURS_PER_DAY * days


def test_split_integer_partition():
    assert split_sizes(10, SplitSpec(0.72, 0.08, 0.20)) == (7, 1, 2)
    s = _series(np.arange(10.0))
    tr, va, te = split(s, SplitSpec(0.72, 0.08, 0.20))
    assert (len(tr), len(va), len(te)) == (7, 1, 2)


def test_split_all_test():
    tr, va, te = split(_series(np.arange(5.0)), SplitSpec(0.0, 0.0, 1.0))
    assert (len(tr), len(va), len(te)) == (0, 0, 5)


def test_split_too_short():
    with pytest.raises(IngestError):
        split(_series([1.0, 2.0]), SplitSpec())


def test_split_fractions_must_sum_to_one():
    with pytest.raises(IngestError):
        SplitSpec(0.5, 0.1, 0.1)


@given(n=st.integers(3, 500), a=st.floats(0, 1), b=st.floats(0, 1))
def test_split_preserves_order(n, a, b):
    tr_f = a
    va_f = (1 - a) * b
    spec = SplitSpec(tr_f, va_f, 1.0 - tr_f - va_f)
    s = _series(np.arange(float(n)))
    parts = split(s, spec)
    np.testing.assert_array_equal(np.concatenate([p.radiation for p in parts]), s.radiation)
