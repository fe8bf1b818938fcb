"""Histogram gradient boosted regression trees with a pluggable objective.

Any object with ``grad_hess(preds, targets)`` and ``loss(preds, targets)``
can drive training; see :class:`extremeloss.loss.SquaredError` and
:class:`extremeloss.loss.ImprovedLoss`.

Trees are grown level by level.  The split gain of a candidate is::

    G_L**2 / (H_L + lam) + G_R**2 / (H_R + lam) - G**2 / (H + lam)

and leaves take the Newton value ``-G / (H + lam)``.  The ensemble predicts
``base_score + learning_rate * sum(leaf values)``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .errors import (ConfigError, EmptyDatasetError, LengthMismatch, ModelFormatError,
                     NonFiniteError, TrainingError, VersionError)
from .loss import objective_from_dict

log = logging.getLogger(__name__)

MAGIC = b"EXTREMELOSS-GBDT"
FORMAT_VERSION = 1
# relative slack under which two split gains count as a tie
GAIN_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class GbdtParams:
    n_rounds: int = 100
    learning_rate: float = 0.05
    max_depth: int = 6
    min_samples_leaf: int = 20
    lambda_l2: float = 1.0
    max_bins: int = 256
    min_split_gain: float = 0.0
    check_monotone: bool = True

    def __post_init__(self):
        for name in ("n_rounds", "max_depth", "min_samples_leaf", "max_bins"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must lie in (0, 1]")
        if self.lambda_l2 < 0:
            raise ConfigError("lambda_l2 must be >= 0")
        if self.max_bins > 256:
            raise ConfigError("max_bins must be <= 256")


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf.

    A sample goes left when ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return self.value[node]
            go_left = X[rows, np.maximum(f, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["feature"], dtype=np.int64),
                   np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["left"], dtype=np.int64),
                   np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=float))


@dataclass
class GbdtModel:
    base_score: float
    learning_rate: float
    n_features: int
    trees: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    objective: dict = field(default_factory=dict)
    loss_trace: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise LengthMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out[0] if single else out

    def to_bytes(self) -> bytes:
        return serialize(self)


def predict(model: GbdtModel, features):
    return model.predict(features)


# --------------------------------------------------------------------------
# binning

def bin_edges(X, max_bins):
    """Per-feature sorted edge values; bin b holds (edges[b-1], edges[b]]."""
    edges = []
    for col in X.T:
        uniq = np.unique(col)
        if len(uniq) > max_bins:
            q = np.linspace(0.0, 1.0, max_bins + 1)[1:]
            uniq = np.unique(np.quantile(col, q, method="inverted_cdf"))
        edges.append(uniq)
    return edges


def apply_bins(X, edges):
    out = np.empty(X.shape, dtype=np.uint8)
    for j, e in enumerate(edges):
        out[:, j] = np.searchsorted(e, X[:, j], side="left")
    return out


@njit(cache=True)
def _histograms(binned, node_of, grad, hess, n_nodes, n_bins):
    n, n_feat = binned.shape
    hist = np.zeros((n_nodes, n_feat, n_bins, 3))
    for i in range(n):
        k = node_of[i]
        if k < 0:
            continue
        g = grad[i]
        h = hess[i]
        for j in range(n_feat):
            b = binned[i, j]
            hist[k, j, b, 0] += g
            hist[k, j, b, 1] += h
            hist[k, j, b, 2] += 1.0
    return hist


def split_gain(g_left, h_left, g_right, h_right, lam):
    g, h = g_left + g_right, h_left + h_right
    return g_left ** 2 / (h_left + lam) + g_right ** 2 / (h_right + lam) - g ** 2 / (h + lam)


def pick_best(gains, valid):
    """Index of the best valid candidate in flat (feature, bin) order.

    Gains within ``GAIN_TIE_RTOL`` of the maximum tie; the lowest index wins,
    which means lowest feature, then lowest threshold.
    """
    masked = np.where(valid, gains, -np.inf)
    best = masked.max()
    if not np.isfinite(best):
        return -1, -np.inf
    tol = GAIN_TIE_RTOL * max(1.0, abs(best))
    idx = int(np.flatnonzero(masked >= best - tol)[0])
    return idx, float(masked[idx])


def _best_splits(hist, n_bins_per_feature, params):
    """Best (feature, bin, gain) for every node of a level."""
    lam = params.lambda_l2
    cum = np.cumsum(hist, axis=2)
    total = cum[:, 0, -1, :]
    g_left, h_left, n_left = cum[..., 0], cum[..., 1], cum[..., 2]
    g_right = total[:, None, None, 0] - g_left
    h_right = total[:, None, None, 1] - h_left
    n_right = total[:, None, None, 2] - n_left
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = split_gain(g_left, h_left, g_right, h_right, lam)
    msl = params.min_samples_leaf
    n_bins = hist.shape[2]
    in_range = np.arange(n_bins)[None, :] < (n_bins_per_feature[:, None] - 1)
    valid = (n_left >= msl) & (n_right >= msl) & in_range[None] & np.isfinite(gains)
    valid &= (h_left + lam > 0) & (h_right + lam > 0)
    out = []
    for k in range(hist.shape[0]):
        idx, gain = pick_best(gains[k].ravel(), valid[k].ravel())
        if idx < 0 or not gain > params.min_split_gain:
            out.append(None)
        else:
            out.append((idx // n_bins, idx % n_bins, gain))
    return out, total


def _grow_tree(binned, edges, grad, hess, params):
    n = binned.shape[0]
    n_bins = max(len(e) for e in edges)
    nb_feat = np.array([len(e) for e in edges])
    lam = params.lambda_l2

    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
    frontier = [0]
    node_of = np.zeros(n, dtype=np.int64)
    sample_value = np.zeros(n)

    for depth in range(params.max_depth + 1):
        if not frontier:
            break
        if depth < params.max_depth:
            hist = _histograms(binned, node_of, grad, hess, len(frontier), n_bins)
            splits, total = _best_splits(hist, nb_feat, params)
        else:
            live = node_of >= 0
            m = len(frontier)
            total = np.column_stack([np.bincount(node_of[live], weights=grad[live], minlength=m),
                                     np.bincount(node_of[live], weights=hess[live], minlength=m)])
            splits = [None] * m
        new_frontier = []
        remap = np.full(len(frontier), -1, dtype=np.int64)
        remap_right = np.full(len(frontier), -1, dtype=np.int64)
        split_feat = np.zeros(len(frontier), dtype=np.int64)
        split_bin = np.zeros(len(frontier), dtype=np.int64)
        for k, node in enumerate(frontier):
            if splits[k] is None:
                v = -total[k, 0] / (total[k, 1] + lam)
                value[node] = float(v)
                sample_value[node_of == k] = v
                continue
            f, b, _ = splits[k]
            feature[node] = int(f)
            threshold[node] = float(edges[f][b])
            for side in (left, right):
                side[node] = len(feature)
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(0.0)
            remap[k] = len(new_frontier)
            remap_right[k] = len(new_frontier) + 1
            new_frontier.extend([left[node], right[node]])
            split_feat[k] = f
            split_bin[k] = b
        active = np.flatnonzero(node_of >= 0)
        k_of = node_of[active]
        go_left = binned[active, split_feat[k_of]] <= split_bin[k_of]
        node_of[active] = np.where(remap[k_of] < 0, -1, np.where(go_left, remap[k_of], remap_right[k_of]))
        frontier = new_frontier

    tree = Tree(np.array(feature, dtype=np.int64), np.array(threshold),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), np.array(value))
    return tree, sample_value


def train(X, y, objective, params: GbdtParams | None = None) -> GbdtModel:
    """Fit a boosted ensemble.

    ``objective`` supplies per-sample first and second derivatives of the
    training loss with respect to the prediction.  The training loss is
    recorded after every round in ``model.loss_trace``; with
    ``learning_rate <= 0.1`` an increase aborts training.
    """
    params = params or GbdtParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("training set is empty")
    if X.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} feature rows for {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteError("training data contains non-finite values")

    edges = bin_edges(X, params.max_bins)
    binned = apply_bins(X, edges)
    base = float(np.mean(y))
    preds = np.full(y.shape, base)
    model = GbdtModel(base_score=base, learning_rate=params.learning_rate, n_features=X.shape[1],
                      params=asdict(params), objective=objective.describe())
    prev = objective.loss(preds, y)
    model.loss_trace.append(prev)
    check = params.check_monotone and params.learning_rate <= 0.1

    for rnd in range(params.n_rounds):
        grad, hess = objective.grad_hess(preds, y)
        if np.all(np.abs(hess) < 1e-12):
            raise TrainingError("objective hessians are all ~0; Newton steps are undefined")
        tree, step = _grow_tree(binned, edges, grad, hess, params)
        model.trees.append(tree)
        preds = preds + params.learning_rate * step
        cur = objective.loss(preds, y)
        model.loss_trace.append(cur)
        if check and cur > prev + 1e-9 * max(1.0, abs(prev)):
            raise TrainingError(f"training loss rose at round {rnd + 1}: {prev!r} -> {cur!r}")
        prev = cur
        log.debug("round %d loss %.6g leaves %d", rnd + 1, cur, tree.n_leaves)
    return model


# --------------------------------------------------------------------------
# serialization

def serialize(model: GbdtModel) -> bytes:
    """Versioned text format: a magic header line followed by JSON."""
    body = {
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "n_features": model.n_features,
        "params": model.params,
        "objective": model.objective,
        "loss_trace": list(map(float, model.loss_trace)),
        "trees": [t.to_dict() for t in model.trees],
    }
    header = MAGIC + b" " + str(FORMAT_VERSION).encode() + b"\n"
    return header + json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def deserialize(data: bytes) -> GbdtModel:
    head, sep, rest = data.partition(b"\n")
    parts = head.split(b" ")
    if not sep or len(parts) != 2 or parts[0] != MAGIC:
        raise VersionError("not a GBDT model file")
    if parts[1] != str(FORMAT_VERSION).encode():
        raise VersionError(f"unsupported GBDT model version {parts[1].decode(errors='replace')}")
    try:
        body = json.loads(rest.decode("utf-8"))
        return GbdtModel(
            base_score=float(body["base_score"]),
            learning_rate=float(body["learning_rate"]),
            n_features=int(body["n_features"]),
            trees=[Tree.from_dict(t) for t in body["trees"]],
            params=body["params"],
            objective=body["objective"],
            loss_trace=body["loss_trace"],
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"corrupted or truncated GBDT model: {exc}") from None


def objective_of(model: GbdtModel):
    return objective_from_dict(model.objective)
