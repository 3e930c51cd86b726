"""Weighted-average profile index classifier.

Feature weights come from legitimate profiles only: a feature that is both
common (high presence count) and large on average weighs more. A profile is
called legitimate when its weighted sum exceeds the mean weighted sum of
the reference data set (the profile index).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySet


@dataclass(frozen=True)
class FeatureWeightTable:
    feature_names: tuple[str, ...]
    counts: np.ndarray
    averages: np.ndarray
    normalized_counts: np.ndarray
    weights: np.ndarray
    all_counts_equal: bool = False

    def rows(self):
        """Yield (feature, count, average, normalized count, weight)."""
        for k, name in enumerate(self.feature_names):
            yield (
                name,
                int(self.counts[k]),
                float(self.averages[k]),
                float(self.normalized_counts[k]),
                float(self.weights[k]),
            )

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "counts": [int(c) for c in self.counts],
            "averages": self.averages.tolist(),
            "normalized_counts": self.normalized_counts.tolist(),
            "weights": self.weights.tolist(),
            "all_counts_equal": self.all_counts_equal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureWeightTable":
        return cls(
            tuple(d["feature_names"]),
            np.asarray(d["counts"], dtype=int),
            np.asarray(d["averages"], dtype=float),
            np.asarray(d["normalized_counts"], dtype=float),
            np.asarray(d["weights"], dtype=float),
            bool(d["all_counts_equal"]),
        )


@dataclass(frozen=True)
class WAModel:
    table: FeatureWeightTable
    profile_index: float

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.table.feature_names

    def profile_weights(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(getattr(x, "values", x), dtype=float))
        if x.shape[1] != len(self.table.weights):
            raise DimensionMismatch(f"expected {len(self.table.weights)} features, got {x.shape[1]}")
        return x @ self.table.weights

    def predict(self, x) -> np.ndarray:
        return (self.profile_weights(x) > self.profile_index).astype(int)

    def to_dict(self) -> dict:
        return {"table": self.table.to_dict(), "profile_index": self.profile_index}

    @classmethod
    def from_dict(cls, d: dict) -> "WAModel":
        return cls(FeatureWeightTable.from_dict(d["table"]), float(d["profile_index"]))


class Classification(NamedTuple):
    weight: float
    label: int


def feature_weights(
    counts: Sequence[float], averages: Sequence[float], feature_names: Sequence[str] | None = None
) -> FeatureWeightTable:
    """Weights ``w_f = A_f * N_f`` from presence counts and average values.

    ``N_f`` is the min-max scaled presence count, so the rarest feature gets
    weight 0 and the most common one keeps its full average.
    """
    c = np.asarray(counts, dtype=float)
    a = np.asarray(averages, dtype=float)
    if c.shape != a.shape or c.ndim != 1:
        raise DimensionMismatch("counts and averages must be equal-length vectors")
    if c.size == 0:
        raise EmptySet("no features")
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{k}" for k in range(c.size))
    span = c.max() - c.min()
    if span == 0:
        norm = np.ones_like(c)
        equal = True
    else:
        norm = (c - c.min()) / span
        equal = False
    return FeatureWeightTable(names, c.astype(int), a, norm, a * norm, equal)


def wa_feature_stats(legit) -> FeatureWeightTable:
    """Feature weight table from a FeatureMatrix holding legitimate profiles only."""
    x = np.atleast_2d(np.asarray(legit.values, dtype=float))
    if x.shape[0] == 0:
        raise EmptySet("need at least one legitimate profile")
    counts = (x > 0).sum(axis=0)
    averages = x.sum(axis=0) / x.shape[0]
    return feature_weights(counts, averages, legit.feature_names)


def wa_profile_weight(table: FeatureWeightTable, row) -> float:
    row = np.asarray(row, dtype=float)
    if row.shape != table.weights.shape:
        raise DimensionMismatch(f"expected {len(table.weights)} values, got shape {row.shape}")
    return float(row @ table.weights)


def wa_index(table: FeatureWeightTable, dataset) -> WAModel:
    """Profile index: the mean profile weight over every row of ``dataset``."""
    x = np.atleast_2d(np.asarray(getattr(dataset, "values", dataset), dtype=float))
    if x.shape[0] == 0 or x.size == 0:
        raise EmptySet("profile index needs at least one profile")
    if x.shape[1] != len(table.weights):
        raise DimensionMismatch(f"expected {len(table.weights)} features, got {x.shape[1]}")
    return WAModel(table, float((x @ table.weights).mean()))


def wa_classify(model: WAModel, row) -> Classification:
    """Legitimate (1) iff the profile weight is strictly greater than the index."""
    w = wa_profile_weight(model.table, row)
    return Classification(w, int(w > model.profile_index))
