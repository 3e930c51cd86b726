"""Correlation-matrix PCA with varimax rotation, and iterative feature pruning."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AllFeaturesRemoved, DimensionMismatch, Singular, TooFewRows
from .numerics import bartlett, correlation_matrix, eigen_symmetric, kmo, varimax

LOADING_THRESHOLD = 0.5


@dataclass(frozen=True)
class PcaModel:
    feature_names: tuple[str, ...]
    eigenvalues: np.ndarray
    pct_variance: np.ndarray
    cumulative_pct: np.ndarray
    loadings: np.ndarray
    """Varimax-rotated loadings of the retained components (features x retained)."""
    unrotated_loadings: np.ndarray
    kmo: float
    bartlett_chi2: float
    bartlett_df: int
    bartlett_p: float
    flags: tuple[str, ...] = ()

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    def load_counts(self, threshold: float = LOADING_THRESHOLD) -> np.ndarray:
        """Number of retained components each feature loads on (strictly above ``threshold``)."""
        return (np.abs(self.loadings) > threshold).sum(axis=1)


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    features: tuple[str, ...]
    load_counts: tuple[int, ...]
    removed: tuple[str, ...]


@dataclass(frozen=True)
class SelectionResult:
    selected_features: tuple[str, ...]
    removed_features: tuple[tuple[str, int], ...]
    """(feature, iteration at which it was removed)."""
    model: PcaModel
    trace: tuple[IterationTrace, ...] = field(default=())
    original_features: tuple[str, ...] = ()

    def numbered(self) -> list[tuple[str, bool, int | None]]:
        """Rows of (feature, selected?, selected number) in original order."""
        rows = []
        k = 0
        for name in self.original_features:
            if name in self.selected_features:
                k += 1
                rows.append((name, True, k))
            else:
                rows.append((name, False, None))
        return rows


def pca_from_correlation(
    r: np.ndarray, feature_names, n_obs: int | None = None
) -> PcaModel:
    """Kaiser-criterion PCA of a correlation matrix.

    Components with eigenvalue >= 1 are retained, their loadings
    (eigenvector * sqrt(eigenvalue)) varimax-rotated. KMO and Bartlett are
    computed on ``r``; Bartlett is skipped when ``n_obs`` is None or too small.
    """
    r = np.asarray(r, dtype=float)
    names = tuple(feature_names)
    eig = eigen_symmetric(r)
    lam = eig.eigenvalues
    total = lam.sum()
    pct = 100.0 * lam / total
    retained = int((lam >= 1.0).sum())
    unrotated = eig.eigenvectors[:, :retained] * np.sqrt(lam[:retained])
    rotated, _ = varimax(unrotated) if retained >= 2 else (unrotated, None)

    flags = []
    try:
        kres = kmo(r)
        kmo_value = kres.value
        if kres.degenerate:
            flags.append("kmo_degenerate")
    except Singular:
        kmo_value = math.nan
        flags.append("kmo_singular")
    chi2, df, p = math.nan, len(names) * (len(names) - 1) // 2, math.nan
    if n_obs is not None and n_obs > len(names):
        bres = bartlett(r, n_obs)
        chi2, df, p = bres.chi2, bres.df, bres.p
        if bres.singular:
            flags.append("bartlett_singular")
    return PcaModel(
        names, lam, pct, np.cumsum(pct), rotated, unrotated, kmo_value, chi2, df, p, tuple(flags)
    )


def run_pca(m, n_obs: int | None = None) -> PcaModel:
    """PCA of a FeatureMatrix. ``n_obs`` for Bartlett defaults to the row count."""
    x = np.asarray(m.values, dtype=float)
    if x.shape[1] < 2:
        raise TooFewRows("PCA needs at least two features")
    if x.shape[0] < 3:
        raise TooFewRows("PCA needs at least three rows")
    corr = correlation_matrix(x)
    return pca_from_correlation(corr.values, m.feature_names, x.shape[0] if n_obs is None else n_obs)


def select_features(m, n_obs: int | None = None, threshold: float = LOADING_THRESHOLD) -> SelectionResult:
    """Iteratively drop features that do not load on exactly one retained component.

    Each round runs PCA with varimax on the surviving features, counts for
    every feature the components with ``|loading| > threshold`` and removes
    all features whose count is not 1. Stops when a round removes nothing.
    """
    x = np.asarray(m.values, dtype=float)
    if x.shape[1] < 2 or x.shape[0] < 3:
        raise TooFewRows("feature selection needs at least two features and three rows")
    n = x.shape[0] if n_obs is None else n_obs
    return select_from_correlation(correlation_matrix(x).values, m.feature_names, n, threshold)


def select_from_correlation(
    r, feature_names, n_obs: int | None = None, threshold: float = LOADING_THRESHOLD
) -> SelectionResult:
    """The selection loop of :func:`select_features` on a given correlation matrix.

    Each round works on the sub-matrix of the surviving features, which is
    what recomputing correlations from the reduced data would give.
    """
    full_corr = np.asarray(r, dtype=float)
    original = tuple(feature_names)
    if full_corr.shape != (len(original), len(original)):
        raise DimensionMismatch(f"{full_corr.shape} matrix for {len(original)} features")
    if len(original) < 2:
        raise TooFewRows("feature selection needs at least two features")
    n = n_obs

    current = list(original)
    removed: list[tuple[str, int]] = []
    trace: list[IterationTrace] = []
    model: PcaModel | None = None
    iteration = 0
    while True:
        iteration += 1
        idx = [original.index(f) for f in current]
        candidate = pca_from_correlation(full_corr[np.ix_(idx, idx)], current, n)
        if candidate.n_components == 0:
            warnings.warn(
                f"iteration {iteration}: no component with eigenvalue >= 1; "
                "keeping the previous iteration's selection",
                RuntimeWarning,
                stacklevel=2,
            )
            assert model is not None
            current = list(model.feature_names)
            removed = [(f, it) for f, it in removed if it < iteration - 1]
            trace.pop()
            break
        model = candidate
        counts = model.load_counts(threshold)
        drop = tuple(f for f, z in zip(current, counts) if z != 1)
        trace.append(IterationTrace(iteration, tuple(current), tuple(int(z) for z in counts), drop))
        if not drop:
            break
        if len(drop) == len(current):
            raise AllFeaturesRemoved(
                f"iteration {iteration} would remove every remaining feature: {', '.join(drop)}"
            )
        removed.extend((f, iteration) for f in drop)
        current = [f for f in current if f not in drop]

    assert model is not None
    return SelectionResult(tuple(current), tuple(removed), model, tuple(trace), original)
