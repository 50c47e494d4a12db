"""Classifiers: logistic regression and a two-hidden-layer ReLU network.

Both expose soft scores, hard labels, and input gradients. Binary models keep
a single score row and threshold at zero (score >= 0 means label 1);
multi-class models take the argmax with ties broken toward the lowest index.
``score``, ``predict`` and ``input_gradient`` accept a single feature vector
or any batch shaped (..., d).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .data_io import Dataset

HIDDEN_WIDTH = 10


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""


def _identity_norm(d: int) -> tuple[tuple[float, float], ...]:
    return tuple((-1.0, 1.0) for _ in range(d))


@dataclass(frozen=True)
class LinearModel:
    """Affine scorer: one weight row for binary, one per class otherwise."""

    weights: np.ndarray  # (rows, d); rows == 1 for binary
    bias: np.ndarray     # (rows,)
    classes: int
    norm_params: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        b = np.atleast_1d(np.asarray(self.bias, dtype=float))
        rows = 1 if self.classes == 2 else self.classes
        if w.shape[0] != rows or b.shape[0] != rows:
            raise ValueError(f"expected {rows} score rows for {self.classes} classes")
        norm = self.norm_params or _identity_norm(w.shape[1])
        for arr, field in ((w, "weights"), (b, "bias")):
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)
        object.__setattr__(self, "norm_params", tuple(tuple(p) for p in norm))

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "classes": self.classes,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "norm_params": [list(p) for p in self.norm_params],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LinearModel":
        return cls(
            np.array(payload["weights"], dtype=float),
            np.array(payload["bias"], dtype=float),
            int(payload["classes"]),
            tuple((float(a), float(b)) for a, b in payload["norm_params"]),
        )


@dataclass(frozen=True)
class MlpModel:
    """ReLU network d -> 10 -> 10 -> L (single output row for binary)."""

    weights: tuple[np.ndarray, np.ndarray, np.ndarray]
    biases: tuple[np.ndarray, np.ndarray, np.ndarray]
    classes: int
    norm_params: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float) for b in self.biases)
        rows = 1 if self.classes == 2 else self.classes
        if ws[0].shape[0] != HIDDEN_WIDTH or ws[1].shape != (HIDDEN_WIDTH, HIDDEN_WIDTH):
            raise ValueError(f"hidden layers must have width {HIDDEN_WIDTH}")
        if ws[2].shape != (rows, HIDDEN_WIDTH):
            raise ValueError(f"expected {rows} output rows for {self.classes} classes")
        for arrs in (ws, bs):
            for a in arrs:
                a.setflags(write=False)
        norm = self.norm_params or _identity_norm(ws[0].shape[1])
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "norm_params", tuple(tuple(p) for p in norm))

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[1]

    def to_dict(self) -> dict:
        return {
            "kind": "mlp",
            "classes": self.classes,
            "weights": [w.tolist() for w in self.weights],
            "bias": [b.tolist() for b in self.biases],
            "norm_params": [list(p) for p in self.norm_params],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MlpModel":
        return cls(
            tuple(np.array(w, dtype=float) for w in payload["weights"]),
            tuple(np.array(b, dtype=float) for b in payload["bias"]),
            int(payload["classes"]),
            tuple((float(a), float(b)) for a, b in payload["norm_params"]),
        )


Model = LinearModel | MlpModel


def _forward(model: Model, x: np.ndarray) -> np.ndarray:
    """Raw score rows, shape (..., rows)."""
    if isinstance(model, LinearModel):
        return x @ model.weights.T + model.bias
    w1, w2, w3 = model.weights
    b1, b2, b3 = model.biases
    h1 = np.maximum(x @ w1.T + b1, 0.0)
    h2 = np.maximum(h1 @ w2.T + b2, 0.0)
    return h2 @ w3.T + b3


def score(model: Model, x: np.ndarray) -> np.ndarray:
    """Soft prediction: a scalar per sample for binary, a length-L vector else."""
    x = np.asarray(x, dtype=float)
    out = _forward(model, x)
    if model.classes == 2:
        return out[..., 0]
    return out


def predict(model: Model, x: np.ndarray) -> np.ndarray:
    """Hard label: indicator of score >= 0 for binary, lowest-index argmax else."""
    x = np.asarray(x, dtype=float)
    out = _forward(model, x)
    if model.classes == 2:
        return (out[..., 0] >= 0.0).astype(int)
    return np.argmax(out, axis=-1)


def input_gradient(model: Model, x: np.ndarray) -> np.ndarray:
    """Jacobian of the score rows w.r.t. the input, shape (..., rows, d).

    ReLU units at exactly zero contribute zero gradient. For a linear model
    the result is the weight matrix regardless of x.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(model, LinearModel):
        shape = x.shape[:-1] + model.weights.shape
        return np.broadcast_to(model.weights, shape).copy()
    w1, w2, w3 = model.weights
    b1, b2, b3 = model.biases
    m1 = (x @ w1.T + b1) > 0.0
    h1 = np.maximum(x @ w1.T + b1, 0.0)
    m2 = (h1 @ w2.T + b2) > 0.0
    # back-propagate each output row through the active units
    g = np.broadcast_to(w3, x.shape[:-1] + w3.shape) * m2[..., None, :]
    g = (g @ w2) * m1[..., None, :]
    return g @ w1


def _init_linear(d: int, classes: int) -> tuple[np.ndarray, np.ndarray]:
    rows = 1 if classes == 2 else classes
    return np.zeros((rows, d)), np.zeros(rows)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(z / 2.0))


def _cross_entropy(z: np.ndarray, y: np.ndarray, classes: int) -> float:
    """Mean cross-entropy; infinite when an observed label gets probability 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if classes == 2:
            p = _sigmoid(z[:, 0])
            losses = np.where(y == 1, np.log(p), np.log(1.0 - p))
        else:
            losses = np.log(_softmax(z)[np.arange(len(y)), y])
    return float(-np.mean(losses))


def train_logistic(
    train: "Dataset",
    lr: float = 0.1,
    epochs: int = 200,
    batch: int = 32,
    seed: int = 0,
) -> LinearModel:
    """Mini-batch gradient descent on the cross-entropy, multinomial when the
    label count exceeds two. Deterministic under ``seed``; zero epochs return
    the zero-initialized model unchanged."""
    x, y, classes = train.rows, train.labels, train.n_classes
    n, d = x.shape
    w, b = _init_linear(d, classes)
    rng = np.random.default_rng(seed)
    y_onehot = np.eye(classes)[y] if classes > 2 else None

    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            xb = x[idx]
            z = xb @ w.T + b
            if classes == 2:
                resid = _sigmoid(z[:, 0]) - y[idx]
                gw = resid[None, :] @ xb / len(idx)
                gb = np.array([resid.mean()])
            else:
                resid = _softmax(z) - y_onehot[idx]
                gw = resid.T @ xb / len(idx)
                gb = resid.mean(axis=0)
            w = w - lr * gw
            b = b - lr * gb
        if not np.isfinite(_cross_entropy(x @ w.T + b, y, classes)):
            raise TrainingError(f"logistic training diverged at lr={lr}")

    return LinearModel(w, b, classes, train.feature_space.norm_params)


def train_mlp(
    train: "Dataset",
    lr: float = 0.001,
    epochs: int = 300,
    batch: int = 32,
    seed: int = 0,
) -> MlpModel:
    """SGD on the cross-entropy for the d -> 10 -> 10 -> L ReLU network."""
    x, y, classes = train.rows, train.labels, train.n_classes
    n, d = x.shape
    rows = 1 if classes == 2 else classes
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(HIDDEN_WIDTH, d))
    w2 = rng.normal(0.0, np.sqrt(2.0 / HIDDEN_WIDTH), size=(HIDDEN_WIDTH, HIDDEN_WIDTH))
    w3 = rng.normal(0.0, np.sqrt(2.0 / HIDDEN_WIDTH), size=(rows, HIDDEN_WIDTH))
    b1, b2, b3 = np.zeros(HIDDEN_WIDTH), np.zeros(HIDDEN_WIDTH), np.zeros(rows)
    y_onehot = np.eye(classes)[y] if classes > 2 else None

    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            xb = x[idx]
            z1 = xb @ w1.T + b1
            h1 = np.maximum(z1, 0.0)
            z2 = h1 @ w2.T + b2
            h2 = np.maximum(z2, 0.0)
            z3 = h2 @ w3.T + b3
            if classes == 2:
                dz3 = (_sigmoid(z3[:, 0]) - y[idx])[:, None] / len(idx)
            else:
                dz3 = (_softmax(z3) - y_onehot[idx]) / len(idx)
            dh2 = dz3 @ w3
            dz2 = dh2 * (z2 > 0.0)
            dh1 = dz2 @ w2
            dz1 = dh1 * (z1 > 0.0)
            w3 = w3 - lr * dz3.T @ h2
            b3 = b3 - lr * dz3.sum(axis=0)
            w2 = w2 - lr * dz2.T @ h1
            b2 = b2 - lr * dz2.sum(axis=0)
            w1 = w1 - lr * dz1.T @ xb
            b1 = b1 - lr * dz1.sum(axis=0)
        model = MlpModel((w1, w2, w3), (b1, b2, b3), classes)
        if not np.isfinite(_cross_entropy(np.atleast_2d(_forward(model, x)), y, classes)):
            raise TrainingError(f"mlp training diverged at lr={lr}")

    return MlpModel((w1, w2, w3), (b1, b2, b3), classes, train.feature_space.norm_params)


def accuracy(model: Model, dataset: "Dataset") -> float:
    return float(np.mean(predict(model, dataset.rows) == dataset.labels))
