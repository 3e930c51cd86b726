"""C-support vector classification solved by Sequential Minimal Optimization.

The dual problem

    max_a  sum(a) - 1/2 a^T Q a,   Q_ij = y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C,  sum(a_i y_i) = 0

is solved two multipliers at a time. The working pair is the maximal
violating pair (first-order selection); the solver stops once the KKT gap
between the two index sets drops below ``tol``. The dense Gram matrix is
built once, which is fine for a few hundred training rows.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateData, DimensionMismatch, SingleClass, NonBinaryLabels

RBF = "rbf"
POLYNOMIAL = "poly"


@dataclass(frozen=True)
class KernelSpec:
    kind: str = RBF
    gamma: float | str = "auto"
    coef: float = 1.0
    degree: int = 3

    def __post_init__(self):
        if self.kind not in (RBF, POLYNOMIAL):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.gamma != "auto" and not float(self.gamma) > 0:
            raise ValueError("gamma must be positive")

    @property
    def resolved(self) -> bool:
        return self.gamma != "auto"

    def resolve(self, x: np.ndarray, seed: int = 0) -> "KernelSpec":
        """Replace ``gamma='auto'``: RBF uses :func:`resolve_gamma`, polynomial 1/n_features."""
        if self.resolved:
            return self
        x = np.atleast_2d(np.asarray(x, dtype=float))
        gamma = resolve_gamma(x, seed) if self.kind == RBF else 1.0 / x.shape[1]
        return KernelSpec(self.kind, float(gamma), self.coef, self.degree)


class Prediction(NamedTuple):
    score: float
    label: int


def gram(spec: KernelSpec, a, b) -> np.ndarray:
    """Kernel matrix between the rows of ``a`` and ``b``."""
    if not spec.resolved:
        raise ValueError("resolve gamma before evaluating the kernel")
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension {a.shape[1]} vs {b.shape[1]}")
    gamma = float(spec.gamma)
    if spec.kind == RBF:
        sq = (a**2).sum(1)[:, None] + (b**2).sum(1)[None, :] - 2.0 * a @ b.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    return (gamma * (a @ b.T) + spec.coef) ** spec.degree


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatch(f"vectors of shape {x.shape} and {y.shape}")
    if spec.kind == RBF:
        return float(np.exp(-float(spec.gamma) * ((x - y) ** 2).sum()))
    return float((float(spec.gamma) * (x @ y) + spec.coef) ** spec.degree)


def resolve_gamma(x, seed: int = 0, max_pairs: int = 1000) -> float:
    """RBF width heuristic: 1 / median squared distance between distinct rows.

    All pairs are used when there are at most ``max_pairs``, otherwise a
    seeded random sample. Zero distances (duplicate rows) are ignored.
    """
    x = np.atleast_2d(np.asarray(getattr(x, "values", x), dtype=float))
    n = x.shape[0]
    if n < 2:
        raise DegenerateData("need at least two rows to estimate gamma")
    i, j = np.triu_indices(n, k=1)
    if len(i) > max_pairs:
        pick = np.random.default_rng(seed).choice(len(i), size=max_pairs, replace=False)
        i, j = i[pick], j[pick]
    d2 = ((x[i] - x[j]) ** 2).sum(axis=1)
    d2 = d2[d2 > 0]
    if d2.size == 0:
        raise DegenerateData("all sampled rows are identical")
    return float(1.0 / np.median(d2))


@dataclass(frozen=True)
class SVMModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    """alpha_i * y_i for each stored support vector."""
    bias: float
    kernel: KernelSpec
    C: float
    converged: bool = True
    iterations: int = 0
    dual_objective: float = float("nan")

    def decision_function(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.support_vectors.shape[1]:
            raise DimensionMismatch(
                f"expected {self.support_vectors.shape[1]} features, got {x.shape[1]}"
            )
        if len(self.dual_coef) == 0:
            return np.full(x.shape[0], self.bias)
        return gram(self.kernel, x, self.support_vectors) @ self.dual_coef + self.bias

    def predict(self, x) -> np.ndarray:
        return (self.decision_function(x) >= 0).astype(int)

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "kernel": asdict(self.kernel),
            "C": self.C,
            "converged": self.converged,
            "iterations": self.iterations,
            "dual_objective": self.dual_objective,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SVMModel":
        return cls(
            np.asarray(d["support_vectors"], dtype=float).reshape(len(d["dual_coef"]), -1)
            if d["dual_coef"]
            else np.zeros((0, len(d["support_vectors"][0]) if d["support_vectors"] else 0)),
            np.asarray(d["dual_coef"], dtype=float),
            float(d["bias"]),
            KernelSpec(**d["kernel"]),
            float(d["C"]),
            bool(d["converged"]),
            int(d["iterations"]),
            float(d["dual_objective"]),
        )


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray
    bias: float
    objective: float
    iterations: int
    converged: bool


def dual_objective(alpha: np.ndarray, q: np.ndarray) -> float:
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def smo_solve(
    k: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    tol: float = 1e-3,
    max_iter: int | None = None,
) -> DualSolution:
    """Solve the C-SVC dual for Gram matrix ``k`` and labels ``y`` in {-1, +1}."""
    n = len(y)
    y = y.astype(float)
    q = (y[:, None] * y[None, :]) * k
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a^T Q a - sum(a), the minimization form
    tau = 1e-12
    converged = False
    it = 0
    while it < max_iter:
        minus_yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(minus_yg[low])])
        gap = minus_yg[i] - minus_yg[j]
        if gap < tol:
            converged = True
            break
        it += 1
        # step along the feasible direction that raises alpha_i*y_i and lowers alpha_j*y_j
        curvature = q[i, i] + q[j, j] - 2.0 * y[i] * y[j] * q[i, j]
        curvature = max(curvature, tau)
        t = gap / curvature
        # bounds on t keeping both multipliers in the box
        t_i = (C - alpha[i]) if y[i] > 0 else alpha[i]
        t_j = alpha[j] if y[j] > 0 else (C - alpha[j])
        t = min(t, t_i, t_j)
        old_i, old_j = alpha[i], alpha[j]
        alpha[i] = min(max(old_i + y[i] * t, 0.0), C)
        alpha[j] = min(max(old_j - y[j] * t, 0.0), C)
        d_i = alpha[i] - old_i
        d_j = alpha[j] - old_j
        grad += q[:, i] * d_i + q[:, j] * d_j

    minus_yg = -y * grad
    interior = (alpha > 1e-12 * C) & (alpha < C * (1 - 1e-12))
    if interior.any():
        bias = float(minus_yg[interior].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = minus_yg[up].max() if up.any() else 0.0
        lo = minus_yg[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2)
    return DualSolution(alpha, bias, dual_objective(alpha, q), it, converged)


def _signed_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or not np.isin(y, (0, 1)).all():
        raise NonBinaryLabels("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise SingleClass("SVM training needs both classes")
    return np.where(y == 1, 1.0, -1.0)


def svm_train(
    x,
    y,
    spec: KernelSpec | None = None,
    C: float = 1.0,
    tol: float = 1e-3,
    max_iter: int | None = None,
    gamma_seed: int = 0,
) -> SVMModel:
    """Fit a C-SVC on normalized rows ``x`` with labels 1 (legitimate) / 0 (fake)."""
    if C <= 0:
        raise ValueError("C must be positive")
    x = np.atleast_2d(np.asarray(getattr(x, "values", x), dtype=float))
    ys = _signed_labels(y)
    if x.shape[0] != len(ys):
        raise DimensionMismatch("x and y disagree on the number of rows")
    spec = (spec or KernelSpec()).resolve(x, gamma_seed)
    sol = smo_solve(gram(spec, x, x), ys, C, tol, max_iter)
    if not sol.converged:
        warnings.warn(
            f"SMO stopped after {sol.iterations} iterations without meeting tol={tol}",
            RuntimeWarning,
            stacklevel=2,
        )
    keep = sol.alpha > 1e-12
    return SVMModel(
        x[keep].copy(),
        (sol.alpha * ys)[keep],
        sol.bias,
        spec,
        float(C),
        sol.converged,
        sol.iterations,
        sol.objective,
    )


def svm_predict(model: SVMModel, row) -> Prediction:
    """Decision value of one row; label 1 iff the value is >= 0."""
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise DimensionMismatch("expected a single row")
    score = float(model.decision_function(row[None, :])[0])
    return Prediction(score, int(score >= 0))
