"""One-hidden-layer logistic network trained by resilient backpropagation.

Architecture: inputs -> ``hidden_neurons`` logistic units -> 1 logistic
output, cross-entropy error summed over the training rows, full-batch
updates.

The update is Rprop without weight backtracking: each weight keeps its own
step size, grown by ``eta_plus`` while the gradient sign is stable and
shrunk by ``eta_minus`` when it flips. After a flip the stored gradient is
zeroed, so that weight does not move this epoch and is not shrunk again
next epoch.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import DimensionMismatch, Diverged, NonBinaryLabels


@dataclass(frozen=True)
class NNConfig:
    hidden_neurons: int = 2
    eta_plus: float = 1.2
    eta_minus: float = 0.5
    delta_init: float = 0.1
    delta_max: float = 50.0
    delta_min: float = 1e-6
    max_epochs: int = 100_000
    threshold: float = 0.01
    weight_init_seed: int = 0
    init_range: float = 0.5

    def __post_init__(self):
        if not 0 < self.eta_minus < 1 < self.eta_plus:
            raise ValueError("need 0 < eta_minus < 1 < eta_plus")
        if not self.delta_min < self.delta_init < self.delta_max:
            raise ValueError("need delta_min < delta_init < delta_max")
        if self.hidden_neurons < 1:
            raise ValueError("hidden_neurons must be >= 1")


class Prediction(NamedTuple):
    score: float
    label: int


@dataclass(frozen=True)
class NNModel:
    hidden_weights: np.ndarray
    """(hidden, inputs + 1); the last column is the bias."""
    output_weights: np.ndarray
    """(hidden + 1,); the last entry is the bias."""
    training_error: float
    epochs: int
    converged: bool
    config: NNConfig
    history: tuple[float, ...] = field(default=(), repr=False, compare=False)

    @property
    def n_inputs(self) -> int:
        return self.hidden_weights.shape[1] - 1

    def scores(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_inputs:
            raise DimensionMismatch(f"expected {self.n_inputs} inputs, got {x.shape[1]}")
        _, out = _forward(self.hidden_weights, self.output_weights, x)
        return out

    def predict(self, x) -> np.ndarray:
        return (self.scores(x) >= 0.5).astype(int)

    def to_dict(self) -> dict:
        return {
            "hidden_weights": self.hidden_weights.tolist(),
            "output_weights": self.output_weights.tolist(),
            "training_error": self.training_error,
            "epochs": self.epochs,
            "converged": self.converged,
            "config": asdict(self.config),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NNModel":
        return cls(
            np.asarray(d["hidden_weights"], dtype=float),
            np.asarray(d["output_weights"], dtype=float),
            float(d["training_error"]),
            int(d["epochs"]),
            bool(d["converged"]),
            NNConfig(**d["config"]),
        )


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _forward(w1, w2, x):
    hidden = _sigmoid(x @ w1[:, :-1].T + w1[:, -1])
    out = _sigmoid(hidden @ w2[:-1] + w2[-1])
    return hidden, out


def cross_entropy(w1, w2, x, y) -> float:
    hidden = _sigmoid(x @ w1[:, :-1].T + w1[:, -1])
    z = hidden @ w2[:-1] + w2[-1]
    # sum of softplus(z) - y*z, computed without overflow
    return float((np.logaddexp(0.0, z) - y * z).sum())


def loss_and_gradient(w1, w2, x, y):
    """Cross-entropy error and its gradient with respect to both weight arrays."""
    hidden, out = _forward(w1, w2, x)
    z = hidden @ w2[:-1] + w2[-1]
    loss = float((np.logaddexp(0.0, z) - y * z).sum())
    delta_out = out - y
    g2 = np.empty_like(w2)
    g2[:-1] = delta_out @ hidden
    g2[-1] = delta_out.sum()
    delta_hidden = np.outer(delta_out, w2[:-1]) * hidden * (1.0 - hidden)
    g1 = np.empty_like(w1)
    g1[:, :-1] = delta_hidden.T @ x
    g1[:, -1] = delta_hidden.sum(axis=0)
    return loss, g1, g2


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or not np.isin(y, (0, 1)).all():
        raise NonBinaryLabels("labels must be 0 or 1")
    return y.astype(float)


def nn_train(
    x,
    y,
    cfg: NNConfig | None = None,
    callback: Callable[[int, float, np.ndarray], None] | None = None,
) -> NNModel:
    """Train the network on normalized rows ``x`` with 0/1 labels ``y``.

    Stops when every partial derivative is below ``cfg.threshold`` in
    absolute value or after ``cfg.max_epochs`` epochs. ``callback`` receives
    ``(epoch, loss, step_sizes)`` after every update.
    """
    cfg = cfg or NNConfig()
    x = np.atleast_2d(np.asarray(getattr(x, "values", x), dtype=float))
    y = _check_labels(y)
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch("x and y disagree on the number of rows")

    rng = np.random.default_rng(cfg.weight_init_seed)
    d, h = x.shape[1], cfg.hidden_neurons
    w1 = rng.uniform(-cfg.init_range, cfg.init_range, size=(h, d + 1))
    w2 = rng.uniform(-cfg.init_range, cfg.init_range, size=h + 1)
    n1 = w1.size

    weights = np.concatenate([w1.ravel(), w2])
    steps = np.full(weights.shape, cfg.delta_init)
    prev_grad = np.zeros_like(weights)
    history = []
    converged = False
    epoch = 0

    def unpack(w):
        return w[:n1].reshape(h, d + 1), w[n1:]

    loss, g1, g2 = loss_and_gradient(*unpack(weights), x, y)
    while True:
        if not np.isfinite(loss):
            raise Diverged(f"non-finite training error at epoch {epoch}")
        grad = np.concatenate([g1.ravel(), g2])
        if np.abs(grad).max() < cfg.threshold:
            converged = True
            break
        if epoch >= cfg.max_epochs:
            break
        epoch += 1
        agreement = grad * prev_grad
        grow = agreement > 0
        shrink = agreement < 0
        steps[grow] = np.minimum(steps[grow] * cfg.eta_plus, cfg.delta_max)
        steps[shrink] = np.maximum(steps[shrink] * cfg.eta_minus, cfg.delta_min)
        grad[shrink] = 0.0
        weights = weights - np.sign(grad) * steps
        prev_grad = grad
        loss, g1, g2 = loss_and_gradient(*unpack(weights), x, y)
        history.append(loss)
        if callback is not None:
            callback(epoch, loss, steps)

    w1, w2 = unpack(weights)
    return NNModel(w1.copy(), w2.copy(), float(loss), epoch, converged, cfg, tuple(history))


def nn_predict(model: NNModel, row) -> Prediction:
    """Score one normalized row; label 1 (legitimate) iff score >= 0.5."""
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or row.shape[0] != model.n_inputs:
        raise DimensionMismatch(f"expected a row of {model.n_inputs} values")
    score = float(model.scores(row[None, :])[0])
    return Prediction(score, int(score >= 0.5))
