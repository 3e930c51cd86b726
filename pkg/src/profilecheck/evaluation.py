"""Confusion metrics, McNemar tests and training/test-size sweeps.

Positive class is *legitimate* (label 1): a false positive is a fake
profile called legitimate, a false negative a legitimate profile called
fake.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import FractionTooSmall, LengthMismatch
from .methods import MethodParams, fit_method
from .profile_data import DatasetSplit, FeatureMatrix

EXACT_CUTOFF = 25
DEFAULT_FRACTIONS = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class MetricReport:
    accuracy_pct: float
    tpr: float
    tnr: float
    confusion: ConfusionMatrix
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy_pct": self.accuracy_pct,
            "tpr": self.tpr,
            "tnr": self.tnr,
            "tp": self.confusion.tp,
            "fn": self.confusion.fn,
            "fp": self.confusion.fp,
            "tn": self.confusion.tn,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    chi2: float
    p: float
    method: str


def _paired(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a).astype(int).ravel()
    b = np.asarray(b).astype(int).ravel()
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} predictions vs {len(b)} labels")
    return a, b


def compute_metrics(preds, truth) -> MetricReport:
    p, t = _paired(preds, truth)
    if len(p) == 0:
        raise LengthMismatch("no predictions to evaluate")
    tp = int(((p == 1) & (t == 1)).sum())
    fn = int(((p == 0) & (t == 1)).sum())
    fp = int(((p == 1) & (t == 0)).sum())
    tn = int(((p == 0) & (t == 0)).sum())
    flags = []
    if tp + fn:
        tpr = tp / (tp + fn)
    else:
        tpr = math.nan
        flags.append("tpr_undefined")
    if tn + fp:
        tnr = tn / (tn + fp)
    else:
        tnr = math.nan
        flags.append("tnr_undefined")
    acc = 100.0 * (tp + tn) / len(p)
    return MetricReport(acc, tpr, tnr, ConfusionMatrix(tp, fn, fp, tn), tuple(flags))


def _mcnemar_counts(b: int, c: int, method: str) -> McNemarResult:
    n = b + c
    if n == 0:
        return McNemarResult(b, c, 0.0, 1.0, "none")
    chi2 = (abs(b - c) - 1) ** 2 / n if abs(b - c) >= 1 else 0.0
    if method == "auto":
        method = "exact" if n < EXACT_CUTOFF else "chi2"
    if method == "exact":
        k = min(b, c)
        tail = sum(math.comb(n, i) for i in range(k + 1)) / 2**n
        p = min(1.0, 2.0 * tail)
    elif method == "chi2":
        p = float(stats.chi2.sf(chi2, 1))
    else:
        raise ValueError(f"unknown McNemar method {method!r}")
    return McNemarResult(b, c, float(chi2), float(p), method)


def mcnemar(model_preds, truth, method: str = "auto") -> McNemarResult:
    """McNemar test of model labels against the actual labels.

    ``b`` counts legitimate profiles called fake, ``c`` fake profiles called
    legitimate. With ``method="auto"`` the exact two-sided binomial test is
    used when ``b + c < 25``, else the continuity-corrected chi-square.
    """
    p, t = _paired(model_preds, truth)
    b = int(((t == 1) & (p == 0)).sum())
    c = int(((t == 0) & (p == 1)).sum())
    return _mcnemar_counts(b, c, method)


def mcnemar_models(preds_a, preds_b, truth, method: str = "auto") -> McNemarResult:
    """Classic two-model McNemar: ``b`` = only A correct, ``c`` = only B correct."""
    a, t = _paired(preds_a, truth)
    bb, _ = _paired(preds_b, truth)
    ok_a, ok_b = a == t, bb == t
    return _mcnemar_counts(int((ok_a & ~ok_b).sum()), int((~ok_a & ok_b).sum()), method)


@dataclass(frozen=True)
class SweepPoint:
    fraction: float
    mean_tpr: float
    mean_tnr: float
    stddev_tpr: float
    stddev_tnr: float
    runs: int


@dataclass(frozen=True)
class SweepCurve:
    axis: str
    points: tuple[SweepPoint, ...]

    def to_csv(self, schema_version: int = 1) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["fraction", "mean_tpr", "mean_tnr", "stddev_tpr", "stddev_tnr", "schema_version"])
        for pt in self.points:
            w.writerow(
                [
                    repr(pt.fraction),
                    repr(pt.mean_tpr),
                    repr(pt.mean_tnr),
                    repr(pt.stddev_tpr),
                    repr(pt.stddev_tnr),
                    schema_version,
                ]
            )
        return out.getvalue()


def stratified_subsample(labels: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Positions (into ``labels``) of a per-class random subsample, sorted."""
    if not 0 < fraction <= 1:
        raise FractionTooSmall(f"fraction must lie in (0, 1], got {fraction}")
    picked = []
    for cls in (1, 0):
        members = np.flatnonzero(labels == cls)
        if members.size == 0:
            continue
        k = int(math.floor(fraction * members.size + 0.5))
        if k == 0:
            raise FractionTooSmall(
                f"fraction {fraction} of {members.size} profiles leaves class {cls} empty"
            )
        picked.append(rng.choice(members, size=k, replace=False))
    return np.sort(np.concatenate(picked))


def evaluate_split(
    full: FeatureMatrix,
    split: DatasetSplit,
    method: str = "svm_poly",
    params: MethodParams | None = None,
    features: Sequence[str] | None = None,
    train_positions: np.ndarray | None = None,
    test_positions: np.ndarray | None = None,
) -> tuple[MetricReport, np.ndarray, "object"]:
    """Train on a split's training rows and evaluate on its test rows.

    ``train_positions``/``test_positions`` optionally restrict each side to
    a subset (positions within ``split.train_idx`` / ``split.test_idx``).
    Returns the metrics, the test predictions and the fitted method.
    """
    m = full.columns(features) if features is not None else full
    train_idx = np.asarray(split.train_idx, dtype=int)
    test_idx = np.asarray(split.test_idx, dtype=int)
    if train_positions is not None:
        train_idx = train_idx[train_positions]
    if test_positions is not None:
        test_idx = test_idx[test_positions]
    train, test = m.rows(train_idx), m.rows(test_idx)
    fitted = fit_method(method, train, params, full=m, test=test)
    preds = fitted.predict(test.values)
    return compute_metrics(preds, test.labels), preds, fitted


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        return math.nan, math.nan
    return float(arr.mean()), float(arr.std())


def robustness_sweep(
    full: FeatureMatrix,
    splits: Sequence[DatasetSplit],
    axis: str = "train",
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    repetitions: int = 20,
    seed: int = 0,
    method: str = "svm_poly",
    params: MethodParams | None = None,
    features: Sequence[str] | None = None,
) -> SweepCurve:
    """Mean TPR/TNR as the training (or test) side is subsampled.

    The other side is kept whole. Subsamples are stratified and drawn from
    a generator keyed on ``(seed, fraction index, repetition, dataset)``.
    At fraction 1.0 nothing is random, so a single repetition is run.
    """
    if axis not in ("train", "test"):
        raise ValueError("axis must be 'train' or 'test'")
    fractions = [float(f) for f in fractions]
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("fractions must be strictly increasing")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    m = full.columns(features) if features is not None else full
    points = []
    for fi, frac in enumerate(fractions):
        tprs, tnrs = [], []
        reps = 1 if frac == 1.0 else repetitions
        for rep in range(reps):
            for d, sp in enumerate(splits):
                train_pos = test_pos = None
                if frac < 1.0:
                    rng = np.random.default_rng([seed, fi, rep, d])
                    side = sp.train_idx if axis == "train" else sp.test_idx
                    pos = stratified_subsample(m.labels[np.asarray(side, dtype=int)], frac, rng)
                    if axis == "train":
                        train_pos = pos
                    else:
                        test_pos = pos
                report, _, _ = evaluate_split(m, sp, method, params, None, train_pos, test_pos)
                tprs.append(report.tpr)
                tnrs.append(report.tnr)
        mt, st = _mean_std(tprs)
        mn, sn = _mean_std(tnrs)
        points.append(SweepPoint(frac, mt, mn, st, sn, len(tprs)))
    return SweepCurve(axis, tuple(points))


def direct_evaluation(
    full: FeatureMatrix,
    splits: Sequence[DatasetSplit],
    method: str = "svm_poly",
    params: MethodParams | None = None,
    features: Sequence[str] | None = None,
) -> tuple[float, float]:
    """Mean (TPR, TNR) over plain train/test runs of every split."""
    m = full.columns(features) if features is not None else full
    reports = [evaluate_split(m, sp, method, params)[0] for sp in splits]
    return _mean_std([r.tpr for r in reports])[0], _mean_std([r.tnr for r in reports])[0]
