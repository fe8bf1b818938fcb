"""Sensor CSV ingestion and the four preprocessing stages.

Series are held column-wise: ``EnvSeries.time`` is int64 seconds on the
naive wall clock of the CSV, ``EnvSeries.values`` is an ``(n, 5)`` float
array in :data:`CHANNELS` order.  Indexing a series yields ``EnvRecord``
objects for convenience.

The stages are

1. :func:`clean` - sort, deduplicate, drop out-of-range temperatures and
   segments shorter than 30 minutes;
2. :func:`aggregate` - average into wall-clock aligned 10 minute buckets;
3. :func:`build_windows` - 24 steps of history, target 24 steps after the
   last history step;
4. :func:`split_by_month` - test set by target month.
"""
from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptySplitError, ParseError
from .loss import LossConfig, band_counts

log = logging.getLogger(__name__)

CHANNELS = ("temperature", "humidity", "pressure", "illumination", "co2")
CSV_COLUMNS = ("Time", "Temperature", "Humidity", "Pressure", "Illumination", "CO2")
TIME_FORMAT = "%Y/%m/%d %H:%M:%S"

STEP = 600
HISTORY_STEPS = 24
LEAD_STEPS = 24
N_FEATURES = HISTORY_STEPS * len(CHANNELS)


@dataclass(frozen=True)
class EnvRecord:
    timestamp: np.datetime64
    temperature: float
    humidity: float
    pressure: float
    illumination: float
    co2: float


def _to_datetime(seconds):
    return np.asarray(seconds, dtype="int64").astype("datetime64[s]")


def format_times(seconds) -> np.ndarray:
    """Seconds to the ``YYYY/MM/DD HH:MM:SS`` strings of the sensor CSV."""
    iso = np.datetime_as_string(_to_datetime(seconds), unit="s")
    return np.char.replace(np.char.replace(iso, "-", "/"), "T", " ")


@dataclass
class EnvSeries:
    time: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float).reshape(-1, len(CHANNELS))
        if self.time.shape[0] != self.values.shape[0]:
            raise ValueError("time and values must have the same length")

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, len(CHANNELS))))

    @classmethod
    def from_records(cls, records):
        records = list(records)
        if not records:
            return cls.empty()
        t = np.array([np.datetime64(r.timestamp, "s").astype(np.int64) for r in records])
        v = np.array([[getattr(r, c) for c in CHANNELS] for r in records], dtype=float)
        return cls(t, v)

    def __len__(self):
        return self.time.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice) or np.ndim(i) > 0:
            return EnvSeries(self.time[i], self.values[i])
        row = self.values[i]
        return EnvRecord(_to_datetime(self.time[i]), *map(float, row))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def temperature(self):
        return self.values[:, 0]

    def to_csv(self, path_or_stream):
        """Write the sensor CSV schema (Time, Temperature, ... CO2)."""
        times = format_times(self.time)
        v = self.values
        lines = [",".join(CSV_COLUMNS)]
        lines.extend(
            f"{t},{row[0]:.2f},{row[1]:.1f},{row[2]:.1f},{row[3]:.1f},{row[4]:.1f}"
            for t, row in zip(times, v)
        )
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_stream, "write"):
            path_or_stream.write(text)
        else:
            with open(path_or_stream, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)


# --------------------------------------------------------------------------
# ingestion

@dataclass
class IngestResult:
    series: EnvSeries
    errors: list = field(default_factory=list)

    @property
    def summary(self) -> str:
        return f"{len(self.series)} records parsed, {len(self.errors)} malformed rows skipped"


def _parse_time_column(strings, lines, errors):
    """Vectorised parse; falls back to row by row to locate bad values."""
    iso = np.char.replace(np.char.replace(np.asarray(strings, dtype=str), "/", "-"), " ", "T")
    ok_shape = np.char.str_len(iso) == 19
    try:
        if not ok_shape.all():
            raise ValueError
        return iso.astype("datetime64[s]").astype(np.int64), np.ones(len(iso), dtype=bool)
    except ValueError:
        pass
    out = np.zeros(len(iso), dtype=np.int64)
    good = np.zeros(len(iso), dtype=bool)
    for k, (s, line) in enumerate(zip(iso, lines)):
        try:
            if len(s) != 19:
                raise ValueError
            out[k] = np.datetime64(s, "s").astype(np.int64)
            good[k] = True
        except ValueError:
            errors.append(ParseError(line, f"bad Time value {strings[k]!r}"))
    return out, good


def ingest_csv(source) -> IngestResult:
    """Parse a sensor CSV from a path or text stream.

    Malformed rows are skipped and returned as :class:`ParseError` objects
    in ``result.errors``; a missing or wrong header raises ``ParseError``.
    """
    if hasattr(source, "read"):
        return _ingest_stream(source)
    with open(source, encoding="utf-8", newline="") as fh:
        return _ingest_stream(fh)


def _ingest_stream(stream) -> IngestResult:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        log.warning("empty sensor CSV")
        return IngestResult(EnvSeries.empty())
    names = [h.strip() for h in header]
    try:
        idx = [names.index(c) for c in CSV_COLUMNS]
    except ValueError:
        raise ParseError(1, f"header must contain {', '.join(CSV_COLUMNS)}; got {names}") from None

    errors = []
    times, rows, lines = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(names):
            errors.append(ParseError(lineno, f"expected {len(names)} fields, got {len(row)}"))
            continue
        try:
            vals = [float(row[j]) for j in idx[1:]]
        except ValueError as exc:
            errors.append(ParseError(lineno, str(exc)))
            continue
        times.append(row[idx[0]].strip())
        rows.append(vals)
        lines.append(lineno)

    if not rows:
        if not errors:
            log.warning("sensor CSV has a header but no rows")
        return IngestResult(EnvSeries.empty(), errors)
    t, good = _parse_time_column(times, lines, errors)
    values = np.array(rows, dtype=float)
    errors.sort(key=lambda e: e.line)
    for e in errors:
        log.warning("skipping malformed row: %s", e)
    return IngestResult(EnvSeries(t[good], values[good]), errors)


# --------------------------------------------------------------------------
# cleaning

@dataclass
class CleanReport:
    n_input: int = 0
    duplicates: int = 0
    outliers: int = 0
    short_segments: int = 0
    short_segment_records: int = 0
    n_output: int = 0

    @property
    def removed(self) -> int:
        return self.duplicates + self.outliers + self.short_segment_records

    def to_dict(self):
        return asdict(self)


def segment_bounds(time, max_gap) -> list[tuple[int, int]]:
    """Half-open index ranges of runs whose consecutive gaps are <= max_gap."""
    if len(time) == 0:
        return []
    breaks = np.flatnonzero(np.diff(time) > max_gap) + 1
    starts = np.concatenate(([0], breaks))
    stops = np.concatenate((breaks, [len(time)]))
    return list(zip(starts.tolist(), stops.tolist()))


def clean(series: EnvSeries, *, t_min=0.0, t_max=40.0, max_gap=300,
          min_duration=1800) -> tuple[EnvSeries, CleanReport]:
    """Drop duplicate timestamps, out-of-range temperatures and short segments.

    Duplicates keep their first occurrence (stable sort).  A segment is a
    maximal run whose consecutive gaps are at most ``max_gap`` seconds; it is
    dropped when last minus first timestamp is under ``min_duration``.
    """
    report = CleanReport(n_input=len(series))
    order = np.argsort(series.time, kind="stable")
    t = series.time[order]
    v = series.values[order]

    keep = np.ones(len(t), dtype=bool)
    keep[1:] = t[1:] != t[:-1]
    report.duplicates = int(np.sum(~keep))
    t, v = t[keep], v[keep]

    temp = v[:, 0]
    in_range = (temp >= t_min) & (temp <= t_max)
    report.outliers = int(np.sum(~in_range))
    t, v = t[in_range], v[in_range]

    keep = np.zeros(len(t), dtype=bool)
    for start, stop in segment_bounds(t, max_gap):
        if t[stop - 1] - t[start] >= min_duration:
            keep[start:stop] = True
        else:
            report.short_segments += 1
            report.short_segment_records += stop - start
    t, v = t[keep], v[keep]
    report.n_output = len(t)
    if report.n_output == 0 and report.n_input:
        log.warning("cleaning removed every record")
    return EnvSeries(t, v), report


# --------------------------------------------------------------------------
# aggregation

def aggregate(series: EnvSeries, interval=STEP) -> EnvSeries:
    """Average every channel inside wall-clock aligned buckets.

    Output timestamps are bucket starts; empty buckets are simply absent.
    """
    if len(series) == 0:
        return EnvSeries.empty()
    order = np.argsort(series.time, kind="stable")
    t = series.time[order]
    v = series.values[order]
    bucket = (t // interval) * interval
    starts = np.flatnonzero(np.concatenate(([True], bucket[1:] != bucket[:-1])))
    counts = np.diff(np.concatenate((starts, [len(t)])))
    sums = np.add.reduceat(v, starts, axis=0)
    return EnvSeries(bucket[starts], sums / counts[:, None])


# --------------------------------------------------------------------------
# windowing

@dataclass(frozen=True)
class WindowSample:
    features: np.ndarray
    target: float
    target_time: np.datetime64


@dataclass
class WindowDataset:
    """Stack of window samples: ``X`` is ``(n, 120)`` in step-major order."""

    X: np.ndarray
    y: np.ndarray
    target_time: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, N_FEATURES)
        self.y = np.asarray(self.y, dtype=float)
        self.target_time = np.asarray(self.target_time, dtype=np.int64)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, N_FEATURES)), np.zeros(0), np.zeros(0, dtype=np.int64))

    def __len__(self):
        return self.y.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice) or np.ndim(i) > 0:
            return WindowDataset(self.X[i], self.y[i], self.target_time[i])
        return WindowSample(self.X[i], float(self.y[i]), _to_datetime(self.target_time[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def to_csv(self, path_or_stream):
        header = [f"f{j:03d}" for j in range(N_FEATURES)] + ["target", "target_time"]
        iso = np.datetime_as_string(_to_datetime(self.target_time), unit="s")
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for x, y, ts in zip(self.X, self.y, iso):
            buf.write(",".join(map(repr, x.tolist())))
            buf.write(f",{float(y)!r},{ts}\n")
        text = buf.getvalue()
        if hasattr(path_or_stream, "write"):
            path_or_stream.write(text)
        else:
            with open(path_or_stream, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)

    @classmethod
    def from_csv(cls, path_or_stream):
        if hasattr(path_or_stream, "read"):
            text = path_or_stream.read()
        else:
            with open(path_or_stream, encoding="utf-8") as fh:
                text = fh.read()
        lines = text.splitlines()
        if not lines:
            raise ParseError(1, "empty window dataset")
        header = lines[0].split(",")
        if len(header) != N_FEATURES + 2 or header[-2:] != ["target", "target_time"]:
            raise ParseError(1, "not a window dataset header")
        rows = [ln.split(",") for ln in lines[1:] if ln]
        if not rows:
            return cls.empty()
        try:
            num = np.array([r[:-1] for r in rows], dtype=float)
            times = np.array([r[-1] for r in rows], dtype="datetime64[s]").astype(np.int64)
        except ValueError as exc:
            raise ParseError(0, f"malformed window dataset: {exc}") from None
        return cls(num[:, :N_FEATURES], num[:, N_FEATURES], times)


def build_windows(series: EnvSeries, history=HISTORY_STEPS, lead=LEAD_STEPS,
                  step=STEP) -> WindowDataset:
    """Slide a window by one step over every fully contiguous stretch.

    A sample needs ``history + lead`` consecutive buckets exactly ``step``
    seconds apart.  Features come from the first ``history`` buckets and the
    target is the temperature of the last one.
    """
    span = history + lead
    t, v = series.time, series.values
    xs, ys, ts = [], [], []
    for start, stop in segment_bounds(t, step):
        # segment_bounds tolerates gaps below `step`; aggregated data has none,
        # but guard anyway so a shorter spacing never counts as contiguous
        seg_t = t[start:stop]
        if len(seg_t) > 1 and np.any(np.diff(seg_t) != step):
            raise ValueError("build_windows expects bucket-aligned aggregated data")
        n = stop - start - span + 1
        if n <= 0:
            continue
        seg_v = v[start:stop]
        win = np.lib.stride_tricks.sliding_window_view(seg_v[: n + history - 1], history, axis=0)
        # win has shape (n, channels, history); reorder to step-major
        xs.append(win.transpose(0, 2, 1).reshape(n, -1))
        ys.append(seg_v[span - 1:, 0][:n])
        ts.append(seg_t[span - 1:][:n])
    if not xs:
        return WindowDataset.empty()
    return WindowDataset(np.concatenate(xs), np.concatenate(ys), np.concatenate(ts))


# --------------------------------------------------------------------------
# split

@dataclass
class SplitDataset:
    train: WindowDataset
    test: WindowDataset
    band_counts_train: tuple[int, int, int]


def year_month(seconds) -> np.ndarray:
    """``year * 100 + month`` for each timestamp."""
    months = _to_datetime(seconds).astype("datetime64[M]").astype(np.int64)
    return (1970 + months // 12) * 100 + months % 12 + 1


def split_by_month(samples: WindowDataset, test_months, cfg: LossConfig | None = None) -> SplitDataset:
    """Samples whose target falls in one of ``test_months`` go to test.

    ``test_months`` is an iterable of ``(year, month)`` pairs.
    """
    cfg = cfg or LossConfig()
    keys = np.array([y * 100 + m for y, m in test_months], dtype=np.int64)
    is_test = np.isin(year_month(samples.target_time), keys)
    train, test = samples[~is_test], samples[is_test]
    if len(train) == 0:
        raise EmptySplitError("train")
    if len(test) == 0:
        raise EmptySplitError("test")
    return SplitDataset(train, test, band_counts(train.y, cfg))


def preprocess(series: EnvSeries, test_months, cfg: LossConfig | None = None):
    """Run clean -> aggregate -> windows -> split; returns (split, report)."""
    cleaned, report = clean(series)
    windows = build_windows(aggregate(cleaned))
    return split_by_month(windows, test_months, cfg), report


def write_split(split: SplitDataset, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    split.train.to_csv(os.path.join(out_dir, "train.csv"))
    split.test.to_csv(os.path.join(out_dir, "test.csv"))
