"""Seeded synthetic greenhouse sensor data.

The generator produces one-minute records in the sensor CSV schema with a
seasonal and diurnal temperature cycle, slow AR(1) weather noise, episodic
heat waves and cold snaps, sensor dropouts, isolated short bursts of
records and out-of-range spikes.  Every injected anomaly (spikes and short
bursts) is listed in a manifest, so cleaning can be checked exactly.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError
from .pipeline import EnvSeries

DAY = 86400
MINUTE = 60
MONTH_MINUTES = 30 * 24 * 60


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Independent generator for ``label`` derived from one top-level seed."""
    key = [int(b) for b in label.encode("utf-8")]
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


@dataclass(frozen=True)
class SynthConfig:
    start: str = "2018-06-17T00:00:00"
    end: str = "2019-08-12T00:00:00"
    seed: int = 0
    base_temp: float = 19.5
    seasonal_amplitude: float = 7.5
    # day of year of the seasonal maximum
    seasonal_peak_doy: float = 200.0
    diurnal_amplitude: float = 5.0
    # hour of the diurnal maximum
    diurnal_peak_hour: float = 12.0
    noise_std: float = 3.0
    ar_coefficient: float = 0.995
    extreme_episode_rate: float = 4.0
    extreme_amplitude: float = 5.0
    episode_hours: tuple = (2.0, 8.0)
    dropout_rate: float = 3.0
    gap_minutes: tuple = (10, 360)
    burst_rate: float = 1.0
    outlier_rate: float = 6.0
    timestamp_jitter: int = 1

    def __post_init__(self):
        if np.datetime64(self.end, "s") <= np.datetime64(self.start, "s"):
            raise ConfigError("end must be after start")
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise ConfigError("ar_coefficient must lie in [0, 1)")
        for name in ("noise_std", "extreme_episode_rate", "extreme_amplitude", "dropout_rate",
                     "burst_rate", "outlier_rate", "diurnal_amplitude", "seasonal_amplitude"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        lo, hi = self.gap_minutes
        if not 6 <= lo <= hi:
            raise ConfigError("gap_minutes must satisfy 6 <= min <= max")
        lo, hi = self.episode_hours
        if not 0 < lo <= hi:
            raise ConfigError("episode_hours must satisfy 0 < min <= max")
        if not 0 <= self.timestamp_jitter <= 10:
            raise ConfigError("timestamp_jitter must be within 0..10 seconds")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class Manifest:
    """Ground truth for every injected anomaly."""

    outlier_times: list
    burst_spans: list
    burst_times: list
    gap_spans: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    @property
    def removable_times(self) -> set:
        return set(self.outlier_times) | set(self.burst_times)


def _seasonal(t, cfg):
    doy = (t % (365.25 * DAY)) / DAY
    # 1970-01-01 is day 0 of the cycle; the error of ignoring leap days is < 1 day
    return cfg.seasonal_amplitude * np.cos(2 * np.pi * (doy - cfg.seasonal_peak_doy) / 365.25)


def diurnal(t, cfg):
    hour = (t % DAY) / 3600.0
    return cfg.diurnal_amplitude * np.cos(2 * np.pi * (hour - cfg.diurnal_peak_hour) / 24.0)


def skeleton_temperature(t, cfg: SynthConfig) -> np.ndarray:
    """Deterministic part of the temperature: base + seasonal + diurnal."""
    t = np.asarray(t, dtype=float)
    return cfg.base_temp + _seasonal(t, cfg) + diurnal(t, cfg)


def _ar1(rng, n, phi, std):
    if std == 0 or n == 0:
        return np.zeros(n)
    innov = rng.normal(0.0, std * np.sqrt(1 - phi ** 2), n)
    innov[0] = rng.normal(0.0, std)
    return lfilter([1.0], [1.0, -phi], innov)


def _episodes(rng, t, cfg, seasonal):
    n = len(t)
    out = np.zeros(n)
    count = rng.poisson(cfg.extreme_episode_rate * n / MONTH_MINUTES)
    if count == 0 or cfg.extreme_amplitude == 0:
        return out
    centers = np.sort(rng.integers(0, n, count))
    lo, hi = cfg.episode_hours
    widths = rng.uniform(lo, hi, count) * 60
    amps = cfg.extreme_amplitude * rng.uniform(0.6, 1.4, count)
    for c, w, amp in zip(centers, widths, amps):
        # warm season pushes heat waves, cold season pushes cold snaps
        sign = 1.0 if seasonal[c] >= 0 else -1.0
        half = int(3 * w)
        a, b = max(0, c - half), min(n, c + half + 1)
        k = np.arange(a, b) - c
        out[a:b] += sign * amp * np.exp(-0.5 * (k / (w / 2.0)) ** 2)
    return out


def _random_walk(rng, n, center, step, revert):
    innov = rng.normal(0.0, step, n)
    return center + lfilter([1.0], [1.0, -(1.0 - revert)], innov)


def clean_signal(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Uninterrupted one-minute series before dropouts, bursts and spikes."""
    start = np.datetime64(cfg.start, "s").astype(np.int64)
    end = np.datetime64(cfg.end, "s").astype(np.int64)
    t = np.arange(start, end, MINUTE, dtype=np.int64)
    n = len(t)
    seasonal = _seasonal(t.astype(float), cfg)
    temp = skeleton_temperature(t, cfg)
    temp = temp + _ar1(derive_rng(cfg.seed, "temperature-noise"), n, cfg.ar_coefficient, cfg.noise_std)
    temp = temp + _episodes(derive_rng(cfg.seed, "episodes"), t, cfg, seasonal)
    temp = np.clip(temp, 0.0, 40.0)

    hour = (t % DAY) / 3600.0
    rng = derive_rng(cfg.seed, "channels")
    humidity = np.clip(95.0 - 1.6 * (temp - 10.0) + _ar1(rng, n, 0.99, 3.0), 10.0, 100.0)
    daylight = np.clip(np.sin(2 * np.pi * (hour - 6.0) / 24.0), 0.0, None)
    illumination = 30000.0 * (1.0 + 0.2 * seasonal / max(cfg.seasonal_amplitude, 1e-9)) * daylight
    illumination *= np.exp(_ar1(rng, n, 0.995, 0.25))
    pressure = _random_walk(rng, n, 1000.0, 0.02, 1e-4)
    co2 = np.clip(_random_walk(rng, n, 0.0, 1.0, 1e-3) + 500.0 - 120.0 * daylight, 300.0, 2000.0)

    values = np.column_stack([temp, humidity, pressure, illumination, co2])
    return t, values


def generate(cfg: SynthConfig | None = None) -> tuple[EnvSeries, Manifest]:
    """Raw sensor series plus the manifest of injected anomalies.

    Dropouts are placed at least 90 minutes apart, so apart from the
    deliberate bursts no surviving segment is shorter than 30 minutes.
    Spikes are single records placed at least 30 minutes from any gap.
    """
    cfg = cfg or SynthConfig()
    t, values = clean_signal(cfg)
    n = len(t)
    rng = derive_rng(cfg.seed, "anomalies")
    months = n / MONTH_MINUTES

    keep = np.ones(n, dtype=bool)
    # protected marks minutes that must stay untouched by later injections
    protected = np.zeros(n, dtype=bool)
    gap_spans = []
    n_gaps = rng.poisson(cfg.dropout_rate * months)
    lo, hi = cfg.gap_minutes
    for start in np.sort(rng.integers(60, max(61, n - hi - 60), n_gaps)):
        length = int(rng.integers(lo, hi + 1))
        a, b = start - 90, start + length + 90
        if np.any(protected[max(0, a):min(n, b)]):
            continue
        keep[start:start + length] = False
        protected[max(0, start - 45):min(n, start + length + 45)] = True
        gap_spans.append([int(t[start]), int(t[min(n - 1, start + length - 1)])])

    burst_spans, burst_times = [], []
    n_bursts = rng.poisson(cfg.burst_rate * months)
    for start in np.sort(rng.integers(60, max(61, n - 200), n_bursts)):
        # 20 minute burst surrounded by 15 minute holes
        a, b = start - 15, start + 20 + 15
        if np.any(protected[max(0, a - 45):min(n, b + 45)]):
            continue
        keep[a:start] = False
        keep[start + 20:b] = False
        protected[max(0, a - 45):min(n, b + 45)] = True
        burst_spans.append([int(t[start]), int(t[start + 19])])
        burst_times.extend(int(x) for x in t[start:start + 20])

    outlier_times = []
    n_out = rng.poisson(cfg.outlier_rate * months)
    for idx in np.sort(rng.integers(0, n, n_out)):
        if protected[idx] or not keep[idx]:
            continue
        hot = rng.random() < 0.5
        values[idx, 0] = rng.uniform(45.0, 85.0) if hot else rng.uniform(-30.0, -1.0)
        protected[max(0, idx - 5):idx + 6] = True
        outlier_times.append(int(t[idx]))

    if cfg.timestamp_jitter:
        jitter = derive_rng(cfg.seed, "jitter").integers(0, cfg.timestamp_jitter + 1, n)
    else:
        jitter = np.zeros(n, dtype=np.int64)
    t_out = t + jitter
    manifest = Manifest(
        outlier_times=[int(x) + int(jitter[np.searchsorted(t, x)]) for x in outlier_times],
        burst_spans=[[a + int(jitter[np.searchsorted(t, a)]), b + int(jitter[np.searchsorted(t, b)])]
                     for a, b in burst_spans],
        burst_times=[int(x) + int(jitter[np.searchsorted(t, x)]) for x in burst_times],
        gap_spans=gap_spans,
    )
    return EnvSeries(t_out[keep], values[keep]), manifest


def write(cfg: SynthConfig, csv_path, manifest_path=None):
    series, manifest = generate(cfg)
    series.to_csv(csv_path)
    if manifest_path is not None:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            fh.write(manifest.to_json() + "\n")
    return series, manifest
