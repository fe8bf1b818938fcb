"""Band-aware evaluation of temperature forecasts.

True bands come from the targets, predicted bands from the predictions,
both with the same thresholds.  Signed quantities use ``prediction - truth``:
a negative bias means the model runs cold.  Metrics over an empty band are
``None``, never 0.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import LengthMismatch
from .loss import Band, LossConfig, classify_bands

BIAS_CONVENTION = "bias = mean(prediction - truth); negative means underprediction"


@dataclass
class Confusion:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    @property
    def recall(self):
        pos = self.tp + self.fn
        return self.tp / pos if pos else None

    def __add__(self, other):
        return Confusion(self.tp + other.tp, self.tn + other.tn,
                         self.fp + other.fp, self.fn + other.fn)


@dataclass
class ConfusionCounts:
    high: Confusion
    low: Confusion
    combined: Confusion

    def __add__(self, other):
        return ConfusionCounts(self.high + other.high, self.low + other.low,
                               self.combined + other.combined)


@dataclass
class DiffStats:
    n: int
    median: float | None
    mean: float | None
    std: float | None


@dataclass
class EvalReport:
    n: int
    mae_high: float | None
    mae_low: float | None
    mae_normal: float | None
    bias_high: float | None
    bias_low: float | None
    recall_combined: float | None
    recall_high: float | None
    recall_low: float | None
    diff_stats: dict
    confusion: ConfusionCounts
    loss_config: dict = field(default_factory=dict)
    bias_convention: str = BIAS_CONVENTION

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def flat_row(self) -> dict:
        """One flat record for sweep tables."""
        row = {k: getattr(self, k) for k in (
            "n", "recall_combined", "recall_high", "recall_low", "mae_high", "mae_low",
            "mae_normal", "bias_high", "bias_low")}
        for band, st in self.diff_stats.items():
            for stat in ("median", "mean", "std"):
                row[f"diff_{stat}_{band}"] = getattr(st, stat)
        for view in ("high", "low", "combined"):
            c = getattr(self.confusion, view)
            for k in ("tp", "tn", "fp", "fn"):
                row[f"{k}_{view}"] = getattr(c, k)
        return row

    def to_csv_row(self) -> str:
        row = self.flat_row()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow({k: "" if v is None else v for k, v in row.items()})
        return buf.getvalue()


def _check(preds, targets):
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise LengthMismatch(f"{preds.size} predictions for {targets.size} targets")
    if preds.size == 0:
        raise ValueError("evaluation needs at least one sample")
    return preds, targets


def _mean_or_none(x):
    return float(np.mean(x)) if x.size else None


def confusion_counts(preds, targets, cfg: LossConfig) -> ConfusionCounts:
    preds, targets = _check(preds, targets)
    true = classify_bands(targets, cfg)
    pred = classify_bands(preds, cfg)

    def one_side(band):
        t, p = true == band, pred == band
        return Confusion(tp=int(np.sum(t & p)), tn=int(np.sum(~t & ~p)),
                         fp=int(np.sum(~t & p)), fn=int(np.sum(t & ~p)))

    t_ext = true != Band.NORMAL
    p_ext = pred != Band.NORMAL
    hit = t_ext & (pred == true)
    combined = Confusion(tp=int(np.sum(hit)), tn=int(np.sum(~t_ext & ~p_ext)),
                         fp=int(np.sum(~t_ext & p_ext)), fn=int(np.sum(t_ext & ~hit)))
    return ConfusionCounts(one_side(Band.HIGH), one_side(Band.LOW), combined)


def diff_distribution(preds, targets, cfg: LossConfig) -> dict:
    """Median, mean and sample std (ddof=1) of ``pred - truth`` per true band."""
    preds, targets = _check(preds, targets)
    true = classify_bands(targets, cfg)
    diff = preds - targets
    out = {}
    for band in (Band.HIGH, Band.NORMAL, Band.LOW):
        d = diff[true == band]
        out[band.name.lower()] = DiffStats(
            n=int(d.size),
            median=float(np.median(d)) if d.size else None,
            mean=_mean_or_none(d),
            std=float(np.std(d, ddof=1)) if d.size >= 2 else None,
        )
    return out


def evaluate(preds, targets, cfg: LossConfig) -> EvalReport:
    preds, targets = _check(preds, targets)
    true = classify_bands(targets, cfg)
    err = preds - targets
    by_band = {b: err[true == b] for b in Band}
    conf = confusion_counts(preds, targets, cfg)
    return EvalReport(
        n=int(preds.size),
        mae_high=_mean_or_none(np.abs(by_band[Band.HIGH])),
        mae_low=_mean_or_none(np.abs(by_band[Band.LOW])),
        mae_normal=_mean_or_none(np.abs(by_band[Band.NORMAL])),
        bias_high=_mean_or_none(by_band[Band.HIGH]),
        bias_low=_mean_or_none(by_band[Band.LOW]),
        recall_combined=conf.combined.recall,
        recall_high=conf.high.recall,
        recall_low=conf.low.recall,
        diff_stats=diff_distribution(preds, targets, cfg),
        confusion=conf,
        loss_config=cfg.to_dict(),
    )


def sweep_table(rows: list[dict]) -> str:
    """CSV text for a list of flat rows sharing the same keys."""
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if v is None else v for k, v in r.items()})
    return buf.getvalue()
