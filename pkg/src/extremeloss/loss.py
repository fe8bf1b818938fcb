"""Extreme-aware weighted squared error.

Every target falls in one of three bands.  Normal targets contribute the
plain squared residual.  Extreme targets are up-weighted by the inverse
frequency of their band in the training set and, inside the band, the
residual is scaled by ``a`` or ``1 - a`` depending on its direction:

=========  ==================  ==================
band       y > y_hat (under)   y <= y_hat (over)
=========  ==================  ==================
high       w_high * a          w_high * (1 - a)
low        w_low * (1 - a)     w_low * a
normal     1                   1
=========  ==================  ==================

With ``a > 0.5`` the heavy coefficient lands on the dangerous direction:
predicting too cold for a hot target and too warm for a cold one.  A zero
residual takes the right-hand column, which only matters for the hessian.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, EmptyBandError, LengthMismatch, NonFiniteError


class Band(enum.IntEnum):
    LOW = -1
    NORMAL = 0
    HIGH = 1


@dataclass(frozen=True)
class LossConfig:
    """Thresholds, importance factor and (optionally) frozen band weights.

    ``w_high`` and ``w_low`` stay ``None`` until :meth:`with_weights` computes
    them from training targets.
    """

    t_high: float = 30.0
    t_low: float = 10.0
    a: float = 0.9
    w_high: float | None = None
    w_low: float | None = None

    def __post_init__(self):
        for name in ("t_high", "t_low", "a"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not self.t_low < self.t_high:
            raise ConfigError(f"t_low ({self.t_low}) must be below t_high ({self.t_high})")
        if not 0.0 < self.a < 1.0:
            raise ConfigError(f"a must lie in the open interval (0, 1), got {self.a}")
        for name in ("w_high", "w_low"):
            w = getattr(self, name)
            if w is not None and not (math.isfinite(w) and w > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {w}")

    @property
    def has_weights(self) -> bool:
        return self.w_high is not None and self.w_low is not None

    def with_weights(self, targets) -> "LossConfig":
        w_high, w_low = compute_extreme_weights(targets, self)
        return replace(self, w_high=w_high, w_low=w_low)

    def to_dict(self) -> dict:
        return {"t_high": self.t_high, "t_low": self.t_low, "a": self.a,
                "w_high": self.w_high, "w_low": self.w_low}

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        unknown = set(d) - {"t_high", "t_low", "a", "w_high", "w_low"}
        if unknown:
            raise ConfigError(f"unknown loss config keys: {sorted(unknown)}")
        kw = {k: (None if v is None else float(v)) for k, v in d.items()}
        return cls(**kw)


class GradHess(NamedTuple):
    grad: float
    hess: float


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("non-finite temperature value")


def classify_band(y: float, cfg: LossConfig) -> Band:
    _check_finite(y)
    if y >= cfg.t_high:
        return Band.HIGH
    if y <= cfg.t_low:
        return Band.LOW
    return Band.NORMAL


def classify_bands(y, cfg: LossConfig) -> np.ndarray:
    """Vectorised :func:`classify_band`; returns an int8 array of Band values."""
    y = np.asarray(y, dtype=float)
    _check_finite(y)
    out = np.zeros(y.shape, dtype=np.int8)
    out[y >= cfg.t_high] = Band.HIGH
    out[y <= cfg.t_low] = Band.LOW
    return out


def band_counts(targets, cfg: LossConfig) -> tuple[int, int, int]:
    """Return ``(n_low, n_normal, n_high)``."""
    bands = classify_bands(targets, cfg)
    return (int(np.sum(bands == Band.LOW)), int(np.sum(bands == Band.NORMAL)),
            int(np.sum(bands == Band.HIGH)))


def compute_extreme_weights(targets, cfg: LossConfig) -> tuple[float, float]:
    """Inverse-frequency band weights ``(|normal|/|high|, |normal|/|low|)``.

    Only ever call this on training targets.  Raises :class:`EmptyBandError`
    when either extreme band is empty; a caller that wants unit weights in
    that case has to say so itself.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.size == 0:
        raise ValueError("targets must be non-empty")
    n_low, n_normal, n_high = band_counts(targets, cfg)
    if n_high == 0:
        raise EmptyBandError(Band.HIGH)
    if n_low == 0:
        raise EmptyBandError(Band.LOW)
    if n_normal == 0:
        raise EmptyBandError(Band.NORMAL)
    return n_normal / n_high, n_normal / n_low


def _require_weights(cfg: LossConfig):
    if not cfg.has_weights:
        raise ConfigError("band weights are not set; call LossConfig.with_weights(train_targets)")


def coefficients(y_hat, y, cfg: LossConfig) -> np.ndarray:
    """Per-sample coefficient ``c`` such that the loss is ``c * (y - y_hat)**2``."""
    _require_weights(cfg)
    y_hat = np.asarray(y_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if y_hat.shape != y.shape:
        raise LengthMismatch(f"predictions {y_hat.shape} and targets {y.shape} differ")
    _check_finite(y_hat, y)
    under = y > y_hat
    a = cfg.a
    c = np.ones(y.shape)
    high = y >= cfg.t_high
    low = y <= cfg.t_low
    c[high] = cfg.w_high * np.where(under[high], a, 1.0 - a)
    c[low] = cfg.w_low * np.where(under[low], 1.0 - a, a)
    return c


def sample_loss(y_hat: float, y: float, cfg: LossConfig) -> float:
    c = coefficients(y_hat, y, cfg)
    return float(c * (float(y) - float(y_hat)) ** 2)


def sample_losses(preds, targets, cfg: LossConfig) -> np.ndarray:
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    c = coefficients(preds, targets, cfg)
    return c * (targets - preds) ** 2


def total_loss(preds, targets, cfg: LossConfig) -> float:
    """Sum (not mean) of the per-sample losses."""
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise LengthMismatch(f"{preds.size} predictions for {targets.size} targets")
    if preds.size == 0:
        raise ValueError("total_loss needs at least one sample")
    return float(np.sum(sample_losses(preds, targets, cfg)))


def mean_loss(preds, targets, cfg: LossConfig) -> float:
    """Mean-normalised total loss, for reporting."""
    return total_loss(preds, targets, cfg) / np.size(targets)


def sample_grad_hess(y_hat: float, y: float, cfg: LossConfig) -> GradHess:
    c = float(coefficients(y_hat, y, cfg))
    return GradHess(2.0 * c * (float(y_hat) - float(y)), 2.0 * c)


def grad_hess(preds, targets, cfg: LossConfig) -> tuple[np.ndarray, np.ndarray]:
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    c = coefficients(preds, targets, cfg)
    return 2.0 * c * (preds - targets), 2.0 * c


class SquaredError:
    """Plain sum of squared residuals, the baseline objective."""

    name = "squared_error"

    def loss(self, preds, targets) -> float:
        preds = np.asarray(preds, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if preds.shape != targets.shape:
            raise LengthMismatch(f"{preds.size} predictions for {targets.size} targets")
        _check_finite(preds, targets)
        return float(np.sum((preds - targets) ** 2))

    def grad_hess(self, preds, targets):
        preds = np.asarray(preds, dtype=float)
        targets = np.asarray(targets, dtype=float)
        _check_finite(preds, targets)
        return 2.0 * (preds - targets), np.full(preds.shape, 2.0)

    def describe(self) -> dict:
        return {"name": self.name}


class ImprovedLoss:
    """The band-weighted asymmetric objective bound to a weighted config."""

    name = "improved_loss"

    def __init__(self, cfg: LossConfig):
        _require_weights(cfg)
        self.cfg = cfg

    def loss(self, preds, targets) -> float:
        return total_loss(preds, targets, self.cfg)

    def grad_hess(self, preds, targets):
        return grad_hess(preds, targets, self.cfg)

    def describe(self) -> dict:
        return {"name": self.name, **self.cfg.to_dict()}


def objective_from_dict(d: dict):
    d = dict(d)
    name = d.pop("name", None)
    if name == SquaredError.name:
        return SquaredError()
    if name == ImprovedLoss.name:
        return ImprovedLoss(LossConfig.from_dict(d))
    raise ConfigError(f"unknown objective {name!r}")
