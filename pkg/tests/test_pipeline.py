import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremeloss.errors import EmptySplitError, ParseError
from extremeloss.loss import LossConfig
from extremeloss.pipeline import (N_FEATURES, STEP, EnvRecord, EnvSeries, WindowDataset, aggregate,
                                  build_windows, clean, ingest_csv, split_by_month, year_month)

T0 = int(np.datetime64("2018-06-17T00:00:00", "s").astype(np.int64))
HEADER = "Time,Temperature,Humidity,Pressure,Illumination,CO2\n"


def minute_series(n, start=T0, temp=20.0, step=60):
    t = start + step * np.arange(n)
    v = np.column_stack([np.full(n, temp), np.full(n, 60.0), np.full(n, 998.0),
                         np.full(n, 500.0), np.full(n, 600.0)])
    return EnvSeries(t, v)


def bucket_series(n_steps, start=T0, gaps=()):
    """Aggregated-style series: one row per 600 s bucket, temperature = index."""
    idx = np.array([k for k in range(n_steps) if k not in set(gaps)])
    t = start + STEP * idx
    v = np.column_stack([idx.astype(float), idx + 0.1, idx + 0.2, idx + 0.3, idx + 0.4])
    return EnvSeries(t, v)


# --- ingestion -------------------------------------------------------------

SAMPLE_ROWS = """2018/06/17 19:35:23, 27.90, 60.8, 997.9, 657.0, 611.0
2018/06/17 19:36:23,27.90,60.8,997.9,657.0,611.0
2018/06/17 19:37:22,27.90,60.8,997.9,657.0,611.0
"""


def test_ingest_sample_rows():
    res = ingest_csv(io.StringIO(HEADER + SAMPLE_ROWS))
    assert not res.errors
    rec = res.series[0]
    assert isinstance(rec, EnvRecord)
    assert rec.timestamp == np.datetime64("2018-06-17T19:35:23")
    assert (rec.temperature, rec.humidity, rec.pressure, rec.illumination, rec.co2) == \
        (27.90, 60.8, 997.9, 657.0, 611.0)
    assert len(res.series) == 3
    assert np.all(np.diff(res.series.time) > 0)


def test_ingest_empty_file(caplog):
    res = ingest_csv(io.StringIO(""))
    assert len(res.series) == 0
    assert "empty" in caplog.text


def test_ingest_bad_number_reported_with_line():
    text = HEADER + "2018/06/17 19:35:23,27.9,60.8,997.9,657.0,611.0\n" \
                    "2018/06/17 19:36:23,abc,60.8,997.9,657.0,611.0\n" \
                    "2018/06/17 19:37:22,27.9,60.8,997.9,657.0,611.0\n"
    res = ingest_csv(io.StringIO(text))
    assert len(res.series) == 2
    assert [e.line for e in res.errors] == [3]
    assert isinstance(res.errors[0], ParseError)


def test_ingest_collects_all_errors():
    text = HEADER + "2018/13/40 99:00:00,27.9,60.8,997.9,657.0,611.0\n" \
                    "2018/06/17 19:36:23,27.9,60.8\n" \
                    "2018/06/17 19:37:22,27.9,60.8,997.9,657.0,611.0\n"
    res = ingest_csv(io.StringIO(text))
    assert [e.line for e in res.errors] == [2, 3]
    assert len(res.series) == 1
    assert "1 records parsed, 2 malformed" in res.summary


def test_ingest_missing_header():
    with pytest.raises(ParseError):
        ingest_csv(io.StringIO(SAMPLE_ROWS))


def test_csv_round_trip(tmp_path):
    s = minute_series(5, temp=27.9)
    path = tmp_path / "raw.csv"
    s.to_csv(path)
    back = ingest_csv(path).series
    np.testing.assert_array_equal(back.time, s.time)
    np.testing.assert_allclose(back.values, s.values)
    assert path.read_text().startswith(HEADER + "2018/06/17 00:00:00,27.90,")


# --- cleaning --------------------------------------------------------------

def test_clean_removes_hot_outlier():
    s = minute_series(60)
    s.values[30, 0] = 45.0
    out, rep = clean(s)
    assert rep.outliers == 1 and len(out) == 59
    assert T0 + 30 * 60 not in out.time


def test_clean_keeps_range_boundaries():
    s = minute_series(60)
    s.values[10, 0] = 40.0
    s.values[11, 0] = 0.0
    s.values[12, 0] = -0.01
    out, rep = clean(s)
    assert rep.outliers == 1 and len(out) == 59


def test_clean_removes_short_burst():
    day = minute_series(120)
    burst = minute_series(20, start=T0 + 6 * 3600)
    s = EnvSeries(np.concatenate([day.time, burst.time]), np.concatenate([day.values, burst.values]))
    out, rep = clean(s)
    assert rep.short_segments == 1 and rep.short_segment_records == 20
    np.testing.assert_array_equal(out.time, day.time)


def test_clean_fixpoint_on_clean_day():
    s = minute_series(24 * 60)
    out, rep = clean(s)
    assert rep.removed == 0 and rep.short_segments == 0
    np.testing.assert_array_equal(out.time, s.time)
    np.testing.assert_array_equal(out.values, s.values)


def test_clean_sorts_and_dedups_keeping_first():
    s = minute_series(40)
    t = np.concatenate([s.time[::-1], s.time[:1]])
    v = np.concatenate([s.values[::-1], s.values[:1] + 1.0])
    out, rep = clean(EnvSeries(t, v))
    assert rep.duplicates == 1
    np.testing.assert_array_equal(out.time, s.time)
    # first occurrence in input order is the one from the reversed block
    assert out.values[0, 0] == 20.0


def test_clean_all_removed_is_legal():
    out, rep = clean(minute_series(10))
    assert len(out) == 0 and rep.short_segment_records == 10


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5000), st.floats(-5, 45)), max_size=200))
def test_clean_idempotent(points):
    t = np.array([T0 + 60 * k for k, _ in points], dtype=np.int64)
    v = np.zeros((len(points), 5))
    v[:, 0] = [x for _, x in points]
    once, _ = clean(EnvSeries(t, v))
    twice, rep = clean(once)
    assert rep.removed == 0
    np.testing.assert_array_equal(once.time, twice.time)
    np.testing.assert_array_equal(once.values, twice.values)


# --- aggregation -----------------------------------------------------------

def test_aggregate_constant_bucket():
    out = aggregate(minute_series(10, temp=27.90))
    assert len(out) == 1 and out.values[0, 0] == pytest.approx(27.90, rel=1e-12)
    assert out.time[0] == T0


def test_aggregate_arithmetic_mean():
    s = minute_series(3)
    s.values[:, 0] = [20.0, 21.0, 22.0]
    assert aggregate(s).values[0, 0] == 21.0


def test_aggregate_wall_clock_alignment():
    # start at 00:07 -> first bucket 00:00 holds 3 records, next holds 10
    s = minute_series(13, start=T0 + 7 * 60)
    out = aggregate(s)
    np.testing.assert_array_equal(out.time, [T0, T0 + 600])


def test_aggregate_preserves_gap():
    a = minute_series(10)
    b = minute_series(10, start=T0 + 40 * 60)
    out = aggregate(EnvSeries(np.concatenate([a.time, b.time]), np.concatenate([a.values, b.values])))
    np.testing.assert_array_equal(out.time, [T0, T0 + 2400])


def test_aggregate_hand_means():
    t = T0 + np.array([5, 65, 599, 600, 1250, 1799])
    temp = np.array([20.1, 20.4, 21.0, 15.0, 16.5, 17.25])
    v = np.column_stack([temp, temp * 2, temp * 3, temp * 4, temp * 5])
    out = aggregate(EnvSeries(t, v))
    expect = [(20.1 + 20.4 + 21.0) / 3, 15.0, (16.5 + 17.25) / 2]
    np.testing.assert_allclose(out.values[:, 0], expect, rtol=1e-9)
    np.testing.assert_allclose(out.values[:, 4], np.array(expect) * 5, rtol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7200), st.floats(0, 40)), min_size=1, max_size=100,
                unique_by=lambda p: p[0]))
def test_aggregate_conserves_sums(points):
    t = np.array([T0 + k for k, _ in points], dtype=np.int64)
    v = np.zeros((len(points), 5))
    v[:, 0] = [x for _, x in points]
    out = aggregate(EnvSeries(t, v))
    bucket = (t // 600) * 600
    for bt, mean in zip(out.time, out.values[:, 0]):
        members = v[bucket == bt, 0]
        assert mean * len(members) == pytest.approx(members.sum(), rel=1e-9, abs=1e-9)


# --- windows ---------------------------------------------------------------

def test_window_exactly_48_steps():
    w = build_windows(bucket_series(48))
    assert len(w) == 1
    assert w.X.shape == (1, N_FEATURES)
    assert w.y[0] == 47.0
    assert w.target_time[0] == T0 + 47 * STEP


def test_window_49_steps():
    w = build_windows(bucket_series(49))
    assert len(w) == 2
    np.testing.assert_array_equal(w.y, [47.0, 48.0])


def test_window_gap_kills_samples():
    assert len(build_windows(bucket_series(49, gaps=(20,)))) == 0


def test_window_feature_order_step_major():
    x = build_windows(bucket_series(48)).X[0]
    # step k channel c -> k + 0.1 * c
    expect = np.array([[k + 0.1 * c for c in range(5)] for k in range(24)]).ravel()
    np.testing.assert_allclose(x, expect)


@pytest.mark.parametrize("length", [47, 48, 60, 200])
def test_window_count_formula(length):
    assert len(build_windows(bucket_series(length))) == max(0, length - 47)


def test_windows_across_two_runs():
    s = bucket_series(160, gaps=(100,))
    # runs of 100 and 59 steps
    assert len(build_windows(s)) == (100 - 47) + (59 - 47)


def test_no_leakage():
    w = build_windows(bucket_series(150, gaps=(70,)))
    s = bucket_series(150, gaps=(70,))
    for sample in w:
        # the last input step carries temperature index k; its time is T0 + k * STEP
        last_step_time = T0 + int(round(sample.features[-5])) * STEP
        assert last_step_time + 24 * STEP == sample.target_time.astype(np.int64)
    # runs of 70 and 79 steps
    assert len(w) == len(s) - 2 * 47 == (70 - 47) + (79 - 47)


def test_window_rejects_raw_data():
    with pytest.raises(ValueError):
        build_windows(minute_series(100))


def test_window_csv_round_trip(tmp_path):
    w = build_windows(bucket_series(50))
    path = tmp_path / "w.csv"
    w.to_csv(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[0] == "f000" and header[119] == "f119" and header[-2:] == ["target", "target_time"]
    back = WindowDataset.from_csv(path)
    np.testing.assert_array_equal(back.X, w.X)
    np.testing.assert_array_equal(back.y, w.y)
    np.testing.assert_array_equal(back.target_time, w.target_time)


# --- split -----------------------------------------------------------------

def _dataset_at(times):
    t = np.array([np.datetime64(x, "s").astype(np.int64) for x in times])
    y = np.array([35.0, 20.0, 5.0, 20.0][: len(t)])
    return WindowDataset(np.zeros((len(t), N_FEATURES)), y, t)


def test_split_by_month():
    ds = _dataset_at(["2019-02-10T00:00:00", "2018-12-01T00:00:00", "2018-08-31T23:50:00",
                      "2018-09-01T00:00:00"])
    sp = split_by_month(ds, [(2018, 8), (2019, 2)], LossConfig())
    np.testing.assert_array_equal(year_month(sp.test.target_time), [201902, 201808])
    np.testing.assert_array_equal(year_month(sp.train.target_time), [201812, 201809])
    assert sp.band_counts_train == (0, 2, 0)
    assert len(sp.train) + len(sp.test) == len(ds)
    assert not set(sp.train.target_time) & set(sp.test.target_time)


def test_split_empty_test_months():
    ds = _dataset_at(["2019-02-10T00:00:00", "2018-12-01T00:00:00"])
    with pytest.raises(EmptySplitError):
        split_by_month(ds, [])


def test_split_everything_in_test():
    ds = _dataset_at(["2019-02-10T00:00:00"])
    with pytest.raises(EmptySplitError) as info:
        split_by_month(ds, [(2019, 2)])
    assert info.value.side == "train"
