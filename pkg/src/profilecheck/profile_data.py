"""Profile schema, CSV ingestion, min-max normalization, splitting and
synthetic data generation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import BadValue, EmptySet, MissingColumn, SingleClass, TooFewRows

FEATURES: tuple[str, ...] = (
    "No_Languages",
    "Profile_Summary",
    "No_Edu_Qualification",
    "No_Connections",
    "No_Recommendation",
    "Web_Site_URL",
    "No_Skills",
    "No_Professions",
    "Profile_Image",
    "No_Awards",
    "Interests",
    "No_LinkedIn_Groups",
    "No_Publications",
    "No_Projects",
    "No_Certificates",
)

PRESENCE_FLAGS = frozenset({"Profile_Summary", "Web_Site_URL", "Profile_Image", "Interests"})

# Publicly visible caps enforced at ingestion.
CAPS = {"No_Connections": 500.0, "No_Skills": 50.0}

# Observed maxima of the reference data set (74 profiles).
REFERENCE_MAXIMA = {
    "No_Languages": 5,
    "Profile_Summary": 1,
    "No_Edu_Qualification": 7,
    "No_Connections": 500,
    "No_Recommendation": 37,
    "Web_Site_URL": 1,
    "No_Skills": 50,
    "No_Professions": 16,
    "Profile_Image": 1,
    "No_Awards": 10,
    "Interests": 1,
    "No_LinkedIn_Groups": 51,
    "No_Publications": 16,
    "No_Projects": 7,
    "No_Certificates": 9,
}

# Legitimate-profile statistics of the reference data set (40 profiles):
# (profiles with the feature present, mean normalized value).
REFERENCE_LEGIT_N = 40
REFERENCE_LEGIT_STATS = {
    "No_Languages": (15, 0.135),
    "Profile_Summary": (21, 0.525),
    "No_Edu_Qualification": (30, 0.275),
    "No_Connections": (39, 0.741),
    "No_Recommendation": (23, 0.101),
    "Web_Site_URL": (15, 0.375),
    "No_Skills": (30, 0.389),
    "No_Professions": (34, 0.283),
    "Profile_Image": (34, 0.85),
    "No_Awards": (11, 0.087),
    "Interests": (14, 0.35),
    "No_LinkedIn_Groups": (25, 0.232),
    "No_Publications": (8, 0.072),
    "No_Projects": (7, 0.071),
    "No_Certificates": (6, 0.056),
}

ID_COLUMN = "profile_id"
LABEL_COLUMN = "legitimacy"


@dataclass(frozen=True)
class ProfileRecord:
    profile_id: str
    values: tuple[float, ...]
    legitimacy: int


@dataclass(frozen=True)
class ProfileSet:
    records: tuple[ProfileRecord, ...]
    feature_names: tuple[str, ...] = FEATURES

    def __post_init__(self):
        ids = [r.profile_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise BadValue("profile ids must be unique")

    def __len__(self) -> int:
        return len(self.records)

    def raw_matrix(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, len(self.feature_names)))
        return np.array([r.values for r in self.records], dtype=float)

    def labels(self) -> np.ndarray:
        return np.array([r.legitimacy for r in self.records], dtype=int)

    def ids(self) -> list[str]:
        return [r.profile_id for r in self.records]

    def subset(self, indices: Iterable[int]) -> "ProfileSet":
        return ProfileSet(tuple(self.records[i] for i in indices), self.feature_names)

    def class_counts(self) -> tuple[int, int]:
        """Return ``(n_legitimate, n_fake)``."""
        y = self.labels()
        return int((y == 1).sum()), int((y == 0).sum())


@dataclass(frozen=True)
class FeatureMatrix:
    """Normalized feature values in [0, 1] with the min/max used to get there."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray
    labels: np.ndarray | None = None
    profile_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        for name in ("values", "mins", "maxs", "labels"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=int if name == "labels" else float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def columns(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(
            self.values[:, idx],
            tuple(names),
            self.mins[idx],
            self.maxs[idx],
            self.labels,
            self.profile_ids,
        )

    def rows(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = np.asarray(indices, dtype=int)
        return FeatureMatrix(
            self.values[idx],
            self.feature_names,
            self.mins,
            self.maxs,
            None if self.labels is None else self.labels[idx],
            None if self.profile_ids is None else tuple(self.profile_ids[i] for i in idx),
        )


@dataclass(frozen=True)
class DatasetSplit:
    train: ProfileSet
    test: ProfileSet
    seed: int
    train_idx: tuple[int, ...] = field(default=())
    test_idx: tuple[int, ...] = field(default=())


def _parse_number(text: str, column: str, line: int) -> float:
    text = text.strip()
    if text == "":
        return 0.0
    try:
        value = float(text)
    except ValueError:
        raise BadValue(f"line {line}: {column}={text!r} is not numeric") from None
    if not math.isfinite(value) or value < 0:
        raise BadValue(f"line {line}: {column}={text!r} must be a finite non-negative number")
    return value


def parse_profiles(csv_text: str) -> ProfileSet:
    """Parse profile CSV text into a :class:`ProfileSet`.

    Blank feature cells become 0; connections and skills are clamped to
    their public caps. Unknown extra columns are ignored.
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("empty input: no header row") from None
    required = (ID_COLUMN, *FEATURES, LABEL_COLUMN)
    missing = [c for c in required if c not in header]
    if missing:
        raise MissingColumn(f"header lacks column(s): {', '.join(missing)}")
    pos = {c: header.index(c) for c in required}

    records = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        pid = row[pos[ID_COLUMN]].strip()
        if not pid:
            raise BadValue(f"line {line}: empty profile_id")
        values = []
        for name in FEATURES:
            v = _parse_number(row[pos[name]], name, line)
            if name in PRESENCE_FLAGS and v not in (0.0, 1.0):
                raise BadValue(f"line {line}: presence flag {name} must be 0 or 1, got {v:g}")
            if name in CAPS:
                v = min(v, CAPS[name])
            values.append(v)
        label_text = row[pos[LABEL_COLUMN]].strip()
        if label_text not in ("0", "1", "0.0", "1.0"):
            raise BadValue(f"line {line}: legitimacy must be 0 or 1, got {label_text!r}")
        records.append(ProfileRecord(pid, tuple(values), int(float(label_text))))
    return ProfileSet(tuple(records))


def format_profiles(profiles: ProfileSet) -> str:
    """Inverse of :func:`parse_profiles`; integral values are written without a decimal point."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([ID_COLUMN, *profiles.feature_names, LABEL_COLUMN])
    for rec in profiles.records:
        cells = [str(int(v)) if float(v).is_integer() else repr(float(v)) for v in rec.values]
        writer.writerow([rec.profile_id, *cells, rec.legitimacy])
    return out.getvalue()


def normalize(profiles: ProfileSet) -> FeatureMatrix:
    """Min-max scale every feature column using the set's own extremes.

    Constant columns map to all zeros.
    """
    if len(profiles) == 0:
        raise EmptySet("cannot normalize an empty profile set")
    raw = profiles.raw_matrix()
    mins = raw.min(axis=0)
    maxs = raw.max(axis=0)
    return normalize_with(profiles, mins, maxs)


def normalize_with(profiles: ProfileSet, mins: np.ndarray, maxs: np.ndarray) -> FeatureMatrix:
    """Scale ``profiles`` with externally supplied extremes, clipping to [0, 1]."""
    raw = profiles.raw_matrix()
    mins = np.asarray(mins, dtype=float)
    maxs = np.asarray(maxs, dtype=float)
    span = maxs - mins
    safe = np.where(span > 0, span, 1.0)
    values = np.where(span > 0, (raw - mins) / safe, 0.0)
    values = np.clip(values, 0.0, 1.0)
    return FeatureMatrix(
        values, profiles.feature_names, mins, maxs, profiles.labels(), tuple(profiles.ids())
    )


def split(profiles: ProfileSet, seed: int) -> DatasetSplit:
    """Stratified half/half split. Odd class sizes put the extra record in train."""
    y = profiles.labels()
    if len(y) == 0 or len(np.unique(y)) < 2:
        raise SingleClass("split needs both legitimate and fake profiles")
    rng = np.random.default_rng(seed)
    train: list[int] = []
    for cls in (1, 0):
        members = np.flatnonzero(y == cls)
        perm = rng.permutation(members)
        train.extend(perm[: math.ceil(len(members) / 2)].tolist())
    train_idx = tuple(sorted(train))
    chosen = set(train_idx)
    test_idx = tuple(i for i in range(len(y)) if i not in chosen)
    return DatasetSplit(
        profiles.subset(train_idx), profiles.subset(test_idx), seed, train_idx, test_idx
    )


@dataclass(frozen=True)
class FeatureTest:
    feature: str
    levene_stat: float
    levene_p: float
    equal_var: bool
    t_stat: float
    t_df: float
    t_p: float
    degenerate: bool = False


def _levene_mean(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    za = np.abs(a - a.mean())
    zb = np.abs(b - b.mean())
    n = len(a) + len(b)
    grand = (za.sum() + zb.sum()) / n
    between = len(a) * (za.mean() - grand) ** 2 + len(b) * (zb.mean() - grand) ** 2
    within = ((za - za.mean()) ** 2).sum() + ((zb - zb.mean()) ** 2).sum()
    if within == 0:
        return (0.0, 1.0) if between == 0 else (math.inf, 0.0)
    w = (n - 2) * between / within
    return float(w), float(stats.f.sf(w, 1, n - 2))


def _two_sample_t(a: np.ndarray, b: np.ndarray, equal_var: bool) -> tuple[float, float, float]:
    n1, n2 = len(a), len(b)
    v1, v2 = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    if equal_var:
        df = n1 + n2 - 2
        pooled = ((n1 - 1) * v1 + (n2 - 1) * v2) / df
        se = math.sqrt(pooled * (1 / n1 + 1 / n2))
    else:
        q1, q2 = v1 / n1, v2 / n2
        se = math.sqrt(q1 + q2)
        df = (q1 + q2) ** 2 / (q1**2 / (n1 - 1) + q2**2 / (n2 - 1))
    t = diff / se
    return float(t), float(df), float(2 * stats.t.sf(abs(t), df))


def representativeness_test(
    subset: ProfileSet, full: ProfileSet, alpha: float = 0.05
) -> list[FeatureTest]:
    """Compare each feature (and the label) of ``subset`` against ``full``.

    Levene's test with mean-centred deviations decides between the pooled
    and Welch two-sample t-test: pooled when ``levene_p > alpha``.
    Raw (un-normalized) values are compared; the t statistic is invariant to
    the affine min-max scaling anyway.
    """
    if len(subset) == 0 or len(full) == 0:
        raise EmptySet("both profile sets must be non-empty")
    if len(subset) < 2 or len(full) < 2:
        raise TooFewRows("each group needs at least two profiles")
    a_all = np.column_stack([subset.raw_matrix(), subset.labels()])
    b_all = np.column_stack([full.raw_matrix(), full.labels()])
    names = (*subset.feature_names, "Legitimacy")
    results = []
    for j, name in enumerate(names):
        a, b = a_all[:, j], b_all[:, j]
        if np.ptp(a) == 0 and np.ptp(b) == 0:
            results.append(FeatureTest(name, 0.0, 1.0, True, 0.0, float(len(a) + len(b) - 2), 1.0, True))
            continue
        lev, lev_p = _levene_mean(a, b)
        equal_var = lev_p > alpha
        t, df, p = _two_sample_t(a, b, equal_var)
        results.append(FeatureTest(name, lev, lev_p, equal_var, t, df, p))
    return results


def _draw_present_values(
    rng: np.random.Generator, n: int, cap: int, cond_mean: float, concentration: float
) -> np.ndarray:
    # Beta-binomial on {1..cap} with mean cond_mean*cap; heavy tails keep cap reachable.
    if cap <= 1:
        return np.ones(n)
    target = min(max(cond_mean * cap, 1.0), float(cap))
    q = (target - 1.0) / (cap - 1.0)
    q = min(max(q, 1e-6), 1 - 1e-6)
    p = rng.beta(concentration * q, concentration * (1 - q), size=n)
    return 1.0 + rng.binomial(cap - 1, p).astype(float)


def synth_generate(
    n_legit: int,
    n_fake: int,
    seed: int,
    attenuation: float = 0.5,
    value_attenuation: float | None = None,
    concentration: float = 2.0,
) -> ProfileSet:
    """Generate profiles calibrated to the reference legitimate-profile statistics.

    A legitimate profile has feature ``f`` present with probability
    ``count_f / 40``; present values are drawn on ``1..max_f`` so that the
    column mean after normalization by ``max_f`` matches the reference
    feature average. Fake profiles scale the presence probability by
    ``attenuation`` and present values by ``value_attenuation`` (defaults to
    ``attenuation``).
    """
    if n_legit < 0 or n_fake < 0:
        raise BadValue("profile counts must be non-negative")
    if value_attenuation is None:
        value_attenuation = attenuation
    rng = np.random.default_rng(seed)
    n = n_legit + n_fake
    is_legit = np.r_[np.ones(n_legit, bool), np.zeros(n_fake, bool)]
    raw = np.zeros((n, len(FEATURES)))
    for j, name in enumerate(FEATURES):
        count, avg = REFERENCE_LEGIT_STATS[name]
        cap = REFERENCE_MAXIMA[name]
        presence = count / REFERENCE_LEGIT_N
        prob = np.where(is_legit, presence, presence * attenuation)
        present = rng.random(n) < prob
        values = _draw_present_values(rng, n, cap, avg / presence, concentration)
        if cap > 1:
            scaled = np.floor(values * value_attenuation + 0.5)
            values = np.where(is_legit, values, np.maximum(scaled, 1.0))
        raw[:, j] = np.where(present, values, 0.0)
    records = []
    for i in range(n):
        pid = f"L{i + 1:05d}" if is_legit[i] else f"F{i - n_legit + 1:05d}"
        records.append(ProfileRecord(pid, tuple(float(v) for v in raw[i]), int(is_legit[i])))
    return ProfileSet(tuple(records))
