"""Small dense linear algebra and sampling-adequacy statistics.

Everything here works on matrices of a few dozen rows/columns at most, so
clarity wins over speed: the symmetric eigensolver is a cyclic Jacobi
method and varimax uses Kaiser's pairwise planar rotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import NoConvergence, NotSymmetric, Singular, TooFewRows

SINGULAR_CONDITION = 1e12


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    constant_columns: tuple[int, ...] = ()

    @property
    def degenerate(self) -> bool:
        return bool(self.constant_columns)


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0


@dataclass(frozen=True)
class KMOResult:
    value: float
    per_variable: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class BartlettResult:
    chi2: float
    df: int
    p: float
    singular: bool = False


def correlation_matrix(m) -> CorrelationMatrix:
    """Pearson correlation of the columns of ``m`` (array or FeatureMatrix).

    Constant columns get a unit diagonal and zero off-diagonals and are
    reported in ``constant_columns``.
    """
    x = np.asarray(getattr(m, "values", m), dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewRows("correlation needs at least two rows")
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    constant = tuple(int(j) for j in np.flatnonzero(norms == 0))
    safe = np.where(norms > 0, norms, 1.0)
    z = centered / safe
    r = z.T @ z
    r = np.clip((r + r.T) / 2, -1.0, 1.0)
    for j in constant:
        r[j, :] = 0.0
        r[:, j] = 0.0
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(r, constant)


def _as_symmetric(a) -> np.ndarray:
    a = np.array(getattr(a, "values", a), dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.T).max(initial=0.0) > 1e-12 * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    return (a + a.T) / 2


def eigen_symmetric(a, tol: float = 1e-10, max_sweeps: int = 100) -> EigenSystem:
    """Full eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues are returned in descending order. Each eigenvector is signed
    so that its largest-magnitude entry is positive.

    Raises
    ------
    NotSymmetric
        If ``a`` is not square and symmetric.
    NoConvergence
        If the largest off-diagonal entry is still above ``tol * ||a||_F``
        after ``max_sweeps`` full sweeps.
    """
    a = _as_symmetric(a)
    n = a.shape[0]
    v = np.eye(n)
    threshold = tol * np.linalg.norm(a)
    sweeps = 0
    off = np.abs(a - np.diag(np.diag(a)))
    while n > 1 and off.max() > threshold:
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[[p, q], :] = rot.T @ a[[p, q], :]
                a[p, q] = a[q, p] = 0.0
                v[:, [p, q]] = v[:, [p, q]] @ rot
        off = np.abs(a - np.diag(np.diag(a)))

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    for k in range(n):
        if v[np.argmax(np.abs(v[:, k])), k] < 0:
            v[:, k] = -v[:, k]
    return EigenSystem(values, v, sweeps)


def varimax_criterion(loadings: np.ndarray) -> float:
    """Sum over columns of the variance of squared loadings (times rows squared)."""
    sq = np.asarray(loadings, dtype=float) ** 2
    n = sq.shape[0]
    return float((n * (sq**2).sum(axis=0) - sq.sum(axis=0) ** 2).sum() / n**2)


def varimax(
    loadings,
    normalize: bool = True,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> tuple[np.ndarray, np.ndarray]:
    """Varimax rotation by successive planar rotations of column pairs.

    Parameters
    ----------
    loadings : array-like, shape (features, components)
    normalize : bool
        Apply Kaiser row normalization before rotating and undo it after.
    tol : float
        Stop once a full sweep improves the criterion by less than ``tol``.
    max_iter : int
        Maximum number of sweeps.

    Returns
    -------
    rotated : ndarray
        Rotated loadings, columns ordered by decreasing sum of squared
        loadings and signed so each column's largest-magnitude loading is
        positive.
    rotation : ndarray
        Orthogonal matrix with ``rotated = loadings @ rotation``.
    """
    x = np.array(loadings, dtype=float)
    p, k = x.shape
    rotation = np.eye(k)
    if k < 2:
        return x, rotation

    if normalize:
        h = np.sqrt((x**2).sum(axis=1))
        h = np.where(h > 0, h, 1.0)
        x = x / h[:, None]

    crit = varimax_criterion(x)
    for _ in range(max_iter):
        for j in range(k - 1):
            for l in range(j + 1, k):
                a, b = x[:, j], x[:, l]
                u = a**2 - b**2
                w = 2 * a * b
                A, B = u.sum(), w.sum()
                C = (u**2 - w**2).sum()
                D = 2 * (u * w).sum()
                num = D - 2 * A * B / p
                den = C - (A**2 - B**2) / p
                phi = math.atan2(num, den) / 4
                if abs(phi) < 1e-15:
                    continue
                c, s = math.cos(phi), math.sin(phi)
                plane = np.array([[c, -s], [s, c]])
                x[:, [j, l]] = x[:, [j, l]] @ plane
                rotation[:, [j, l]] = rotation[:, [j, l]] @ plane
        new = varimax_criterion(x)
        gain = new - crit
        crit = new
        if gain < tol:
            break

    if normalize:
        x = x * h[:, None]
    order = np.argsort(-(x**2).sum(axis=0), kind="stable")
    x = x[:, order]
    rotation = rotation[:, order]
    for col in range(k):
        if x[np.argmax(np.abs(x[:, col])), col] < 0:
            x[:, col] = -x[:, col]
            rotation[:, col] = -rotation[:, col]
    return x, rotation


def _check_invertible(r: np.ndarray) -> None:
    if not np.all(np.isfinite(r)) or np.linalg.cond(r) > SINGULAR_CONDITION:
        raise Singular("correlation matrix is not invertible")


def kmo(r) -> KMOResult:
    """Kaiser-Meyer-Olkin sampling adequacy of a correlation matrix.

    Partial correlations come from the scaled inverse of ``r``. With no
    off-diagonal correlation at all the ratio is 0/0; this returns 0 and sets
    ``degenerate``.
    """
    r = _as_symmetric(r)
    _check_invertible(r)
    inv = np.linalg.inv(r)
    d = np.sqrt(np.diag(inv))
    partial = -inv / np.outer(d, d)
    r2 = r**2
    q2 = partial**2
    np.fill_diagonal(r2, 0.0)
    np.fill_diagonal(q2, 0.0)
    num = r2.sum()
    den = num + q2.sum()
    col_num = r2.sum(axis=0)
    col_den = col_num + q2.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_var = np.where(col_den > 0, col_num / np.where(col_den > 0, col_den, 1.0), 0.0)
    if den == 0:
        return KMOResult(0.0, per_var, degenerate=True)
    return KMOResult(float(num / den), per_var)


def bartlett(r, n: int) -> BartlettResult:
    """Bartlett's test of sphericity for a correlation matrix from ``n`` observations."""
    r = _as_symmetric(r)
    p = r.shape[0]
    if n <= p:
        raise TooFewRows(f"Bartlett needs n > {p} observations, got {n}")
    df = p * (p - 1) // 2
    if df == 0:
        return BartlettResult(0.0, 0, 1.0)
    sign, logdet = np.linalg.slogdet(r)
    if sign <= 0 or not np.isfinite(logdet):
        return BartlettResult(math.inf, df, 0.0, singular=True)
    chi2 = -(n - 1 - (2 * p + 5) / 6) * logdet
    chi2 = max(chi2, 0.0)
    return BartlettResult(float(chi2), df, float(stats.chi2.sf(chi2, df)))
