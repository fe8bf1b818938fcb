"""Small feed-forward regressor trained with Adam through any objective.

Architecture: standardized inputs -> tanh hidden layers -> one linear
output.  The output is mapped back to degrees through the training-target
mean and standard deviation, so an untrained network predicts the training
mean.  Backpropagation takes the per-sample derivative of the objective with
respect to the prediction as its output error signal.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (ConfigError, EmptyDatasetError, LengthMismatch, ModelFormatError,
                     NonFiniteError, TrainingError, VersionError)

MAGIC = b"EXTREMELOSS-MLP"
FORMAT_VERSION = 1
ACTIVATION = "tanh"


@dataclass(frozen=True)
class MlpParams:
    # the last entry is the output layer
    hidden_sizes: tuple = (6, 3, 1)
    learning_rate: float = 0.001
    batch_size: int = 2000
    epochs: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.hidden_sizes)
        object.__setattr__(self, "hidden_sizes", sizes)
        if not sizes or min(sizes) < 1:
            raise ConfigError("layer sizes must be >= 1")
        if sizes[-1] != 1:
            raise ConfigError("the last layer size is the scalar output and must be 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class MlpModel:
    weights: list
    biases: list
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    activation: str = ACTIVATION
    params: dict = field(default_factory=dict)
    objective: dict = field(default_factory=dict)
    loss_trace: list = field(default_factory=list)

    @property
    def n_features(self):
        return self.weights[0].shape[0]

    def standardize(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n_features:
            raise LengthMismatch(f"model expects {self.n_features} features, got {X.shape[-1]}")
        return (X - self.x_mean) / self.x_std

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Z = self.standardize(np.atleast_2d(X))
        out = self.y_mean + self.y_std * forward(self.weights, self.biases, Z)[-1][:, 0]
        return out[0] if single else out

    def to_bytes(self):
        return serialize(self)


def predict(model: MlpModel, features):
    return model.predict(features)


def forward(weights, biases, Z):
    """Activations of every layer, input first; the last is linear."""
    acts = [Z]
    h = Z
    last = len(weights) - 1
    for k, (W, b) in enumerate(zip(weights, biases)):
        pre = h @ W + b
        h = pre if k == last else np.tanh(pre)
        acts.append(h)
    return acts


def backward(weights, acts, delta):
    """Gradients of ``sum(delta * output)`` for every weight and bias.

    ``delta`` is the derivative of the loss with respect to the raw network
    output, one value per sample.
    """
    d = delta.reshape(-1, 1)
    gw = [None] * len(weights)
    gb = [None] * len(weights)
    for k in range(len(weights) - 1, -1, -1):
        gw[k] = acts[k].T @ d
        gb[k] = d.sum(axis=0)
        if k:
            d = (d @ weights[k].T) * (1.0 - acts[k] ** 2)
    return gw, gb


def batch_loss_and_grads(model: MlpModel, Z, y, objective):
    """Summed objective over a standardized batch and its parameter gradients."""
    acts = forward(model.weights, model.biases, Z)
    preds = model.y_mean + model.y_std * acts[-1][:, 0]
    loss = objective.loss(preds, y)
    grad, _ = objective.grad_hess(preds, y)
    gw, gb = backward(model.weights, acts, grad * model.y_std)
    return loss, gw, gb


def init_model(n_features, params: MlpParams, X=None, y=None) -> MlpModel:
    """Seeded uniform init in +-1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(params.seed), spawn_key=(1,)))
    sizes = (n_features,) + tuple(params.hidden_sizes)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    if X is None:
        x_mean, x_std = np.zeros(n_features), np.ones(n_features)
        y_mean, y_std = 0.0, 1.0
    else:
        x_mean = X.mean(axis=0)
        x_std = X.std(axis=0)
        x_std = np.where(x_std > 0, x_std, 1.0)
        y_mean = float(np.mean(y))
        y_std = float(np.std(y)) or 1.0
    return MlpModel(weights, biases, x_mean, x_std, y_mean, y_std, params=asdict(params))


def train(X, y, objective, params: MlpParams | None = None) -> MlpModel:
    """Mini-batch Adam on the mean objective over each batch.

    The shuffling order is drawn from ``params.seed``; the final partial
    batch is kept.  ``model.loss_trace`` holds the summed objective on the
    full training set after each epoch.
    """
    params = params or MlpParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("training set is empty")
    if X.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} feature rows for {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteError("training data contains non-finite values")

    model = init_model(X.shape[1], params, X, y)
    model.objective = objective.describe()
    Z = model.standardize(X)
    n = len(y)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(entropy=int(params.seed), spawn_key=(2,)))

    theta = model.weights + model.biases
    m = [np.zeros_like(p) for p in theta]
    v = [np.zeros_like(p) for p in theta]
    b1, b2, eps, lr = params.adam_beta1, params.adam_beta2, params.adam_eps, params.learning_rate
    step = 0
    for epoch in range(params.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, params.batch_size):
            idx = order[start:start + params.batch_size]
            loss, gw, gb = batch_loss_and_grads(model, Z[idx], y[idx], objective)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch + 1}, batch starting {start}")
            grads = [g / len(idx) for g in gw + gb]
            step += 1
            for p, g, mk, vk in zip(theta, grads, m, v):
                mk *= b1
                mk += (1 - b1) * g
                vk *= b2
                vk += (1 - b2) * g * g
                m_hat = mk / (1 - b1 ** step)
                v_hat = vk / (1 - b2 ** step)
                p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        total = objective.loss(model.predict(X), y)
        if not np.isfinite(total):
            raise TrainingError(f"non-finite training loss after epoch {epoch + 1}")
        model.loss_trace.append(float(total))
    return model


# --------------------------------------------------------------------------
# serialization

def serialize(model: MlpModel) -> bytes:
    body = {
        "activation": model.activation,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "x_mean": model.x_mean.tolist(),
        "x_std": model.x_std.tolist(),
        "y_mean": model.y_mean,
        "y_std": model.y_std,
        "params": model.params,
        "objective": model.objective,
        "loss_trace": list(map(float, model.loss_trace)),
    }
    header = MAGIC + b" " + str(FORMAT_VERSION).encode() + b"\n"
    return header + json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def deserialize(data: bytes) -> MlpModel:
    head, sep, rest = data.partition(b"\n")
    parts = head.split(b" ")
    if not sep or len(parts) != 2 or parts[0] != MAGIC:
        raise VersionError("not an MLP model file")
    if parts[1] != str(FORMAT_VERSION).encode():
        raise VersionError(f"unsupported MLP model version {parts[1].decode(errors='replace')}")
    try:
        body = json.loads(rest.decode("utf-8"))
        if body["activation"] != ACTIVATION:
            raise ValueError(f"unknown activation {body['activation']!r}")
        model = MlpModel(
            weights=[np.array(w, dtype=float) for w in body["weights"]],
            biases=[np.array(b, dtype=float) for b in body["biases"]],
            x_mean=np.array(body["x_mean"], dtype=float),
            x_std=np.array(body["x_std"], dtype=float),
            y_mean=float(body["y_mean"]),
            y_std=float(body["y_std"]),
            activation=body["activation"],
            params=body["params"],
            objective=body["objective"],
            loss_trace=body["loss_trace"],
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"corrupted or truncated MLP model: {exc}") from None
    for w in model.weights:
        if w.ndim != 2:
            # a truncated list can still parse as JSON with a ragged shape
            raise ModelFormatError("ragged weight matrix in MLP model")
    return model
