"""Experiment grid: splits x feature modes x methods, plus report assembly."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ProfileCheckError
from .evaluation import evaluate_split, mcnemar
from .methods import METHODS, MethodParams
from .nn_classifier import NNConfig
from .pca_select import SelectionResult, select_features
from .profile_data import (
    FeatureMatrix,
    ProfileSet,
    normalize,
    parse_profiles,
    representativeness_test,
    split,
)

SCHEMA_VERSION = 1
FEATURE_MODES = ("all", "pca_selected")


@dataclass(frozen=True)
class ExperimentConfig:
    input: str
    seeds: tuple[int, ...] = (1, 2, 3)
    feature_modes: tuple[str, ...] = FEATURE_MODES
    methods: tuple[str, ...] = METHODS
    params: MethodParams = field(default_factory=MethodParams)
    output_dir: str = "results"
    workers: int = 4
    bartlett_n: int | None = None

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method is required")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown method(s): {', '.join(sorted(unknown))}")
        bad = set(self.feature_modes) - set(FEATURE_MODES)
        if bad or not self.feature_modes:
            raise ValueError(f"feature modes must be drawn from {FEATURE_MODES}")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ValueError("split seeds must be distinct")


# Flat config keys that map onto MethodParams / NNConfig fields.
_PARAM_KEYS = {
    "svm_c": ("svm_C", float),
    "svm_tol": ("svm_tol", float),
    "rbf_gamma": ("rbf_gamma", None),
    "poly_gamma": ("poly_gamma", None),
    "poly_degree": ("poly_degree", int),
    "poly_coef": ("poly_coef", float),
    "wa_train_only": ("wa_train_only", "bool"),
    "wa_index_on": ("wa_index_on", str),
}
_NN_KEYS = {
    "nn_hidden": ("hidden_neurons", int),
    "nn_max_epochs": ("max_epochs", int),
    "nn_threshold": ("threshold", float),
    "nn_seed": ("weight_init_seed", int),
}


def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _gamma(text: str) -> float | str:
    return "auto" if text.strip().lower() == "auto" else float(text)


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def parse_config_text(text: str) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def build_config(values: dict[str, str]) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from flat string key/values."""
    values = {k.lower(): v for k, v in values.items() if v is not None}
    if "input" not in values:
        raise ValueError("config needs an 'input' CSV path")
    kw: dict[str, Any] = {"input": values["input"]}
    if "seeds" in values:
        kw["seeds"] = tuple(int(s) for s in _csv_list(values["seeds"]))
    if "feature_modes" in values:
        kw["feature_modes"] = _csv_list(values["feature_modes"])
    if "methods" in values:
        kw["methods"] = _csv_list(values["methods"])
    if "output_dir" in values:
        kw["output_dir"] = values["output_dir"]
    if "workers" in values:
        kw["workers"] = int(values["workers"])
    if "bartlett_n" in values:
        kw["bartlett_n"] = int(values["bartlett_n"])

    nn_kw = {}
    for key, (name, conv) in _NN_KEYS.items():
        if key in values:
            nn_kw[name] = conv(values[key])
    p_kw: dict[str, Any] = {"nn": NNConfig(**nn_kw)}
    for key, (name, conv) in _PARAM_KEYS.items():
        if key in values:
            if conv is None:
                p_kw[name] = _gamma(values[key])
            elif conv == "bool":
                p_kw[name] = _to_bool(values[key])
            else:
                p_kw[name] = conv(values[key])
    kw["params"] = MethodParams(**p_kw)

    known = {"input", "seeds", "feature_modes", "methods", "output_dir", "workers", "bartlett_n"}
    unknown = set(values) - known - set(_PARAM_KEYS) - set(_NN_KEYS)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return ExperimentConfig(**kw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    # output location and thread count do not affect results; keep them out of reports
    d = asdict(cfg)
    d.pop("output_dir")
    d.pop("workers")
    d["seeds"] = list(cfg.seeds)
    d["feature_modes"] = list(cfg.feature_modes)
    d["methods"] = list(cfg.methods)
    return d


def clean_json(obj):
    """Replace NaN/inf with None and numpy scalars with Python ones, recursively."""
    if isinstance(obj, dict):
        return {k: clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_json(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(clean_json(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_profiles(path: str | os.PathLike) -> ProfileSet:
    with open(path, encoding="utf-8") as fh:
        return parse_profiles(fh.read())


def selection_to_dict(sel: SelectionResult) -> dict:
    model = sel.model
    return {
        "table": [
            {"feature": name, "selected": chosen, "number": num}
            for name, chosen, num in sel.numbered()
        ],
        "selected_features": list(sel.selected_features),
        "removed": [{"feature": f, "iteration": it} for f, it in sel.removed_features],
        "iterations": [
            {
                "iteration": t.iteration,
                "features": list(t.features),
                "load_counts": list(t.load_counts),
                "removed": list(t.removed),
            }
            for t in sel.trace
        ],
        "final": pca_model_to_dict(model),
    }


def pca_model_to_dict(model) -> dict:
    return {
        "features": list(model.feature_names),
        "eigenvalues": model.eigenvalues,
        "pct_variance": model.pct_variance,
        "cumulative_pct": model.cumulative_pct,
        "retained_components": model.n_components,
        "loadings": [
            {"feature": f, "loadings": model.loadings[k]} for k, f in enumerate(model.feature_names)
        ],
        "kmo": model.kmo,
        "bartlett": {"chi2": model.bartlett_chi2, "df": model.bartlett_df, "p": model.bartlett_p},
        "flags": list(model.flags),
    }


def _run_job(full: FeatureMatrix, sp, mode, method, features, params) -> dict:
    row: dict[str, Any] = {"feature_mode": mode, "method": method}
    try:
        report, preds, fitted = evaluate_split(full, sp, method, params, features)
        truth = full.labels[np.asarray(sp.test_idx, dtype=int)]
        mc = mcnemar(preds, truth)
        row.update(status="ok", **report.to_dict())
        row["mcnemar"] = {"b": mc.b, "c": mc.c, "chi2": mc.chi2, "p": mc.p, "method": mc.method}
        row["info"] = fitted.info
    except (ProfileCheckError, ValueError, FloatingPointError) as exc:
        row.update(status="FAILED", error=f"{type(exc).__name__}: {exc}")
    return row


def run_experiment(cfg: ExperimentConfig, profiles: ProfileSet | None = None) -> dict:
    """Run every (split, feature mode, method) cell and return the report dict.

    Jobs run on a thread pool; the report is assembled in grid order so it
    does not depend on completion order.
    """
    profiles = profiles if profiles is not None else load_profiles(cfg.input)
    full = normalize(profiles)
    splits = [split(profiles, s) for s in cfg.seeds]
    selection = select_features(full, cfg.bartlett_n) if "pca_selected" in cfg.feature_modes else None
    feature_sets = {
        "all": list(full.feature_names),
        "pca_selected": list(selection.selected_features) if selection else None,
    }

    grid = [
        (d, mode, method)
        for d in range(len(splits))
        for mode in cfg.feature_modes
        for method in cfg.methods
    ]
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        futures = {
            key: pool.submit(
                _run_job, full, splits[key[0]], key[1], key[2], feature_sets[key[1]], cfg.params
            )
            for key in grid
        }
        results = {key: fut.result() for key, fut in futures.items()}

    rows = []
    for d, mode, method in grid:
        row = {"dataset": d + 1, "seed": cfg.seeds[d], **results[(d, mode, method)]}
        rows.append(row)

    averages = []
    for mode in cfg.feature_modes:
        for method in cfg.methods:
            cell = [r for r in rows if r["feature_mode"] == mode and r["method"] == method]
            ok = [r for r in cell if r["status"] == "ok"]
            avg: dict[str, Any] = {
                "feature_mode": mode,
                "method": method,
                "datasets": len(ok),
                "status": "ok" if len(ok) == len(cell) else "FAILED",
            }
            for key in ("accuracy_pct", "tpr", "tnr"):
                vals = [r[key] for r in ok if r[key] is not None and not math.isnan(r[key])]
                avg[key] = float(np.mean(vals)) if vals else math.nan
            for key in ("training_error", "profile_index"):
                vals = [r["info"][key] for r in ok if key in r["info"]]
                if vals:
                    avg[key] = float(np.mean(vals))
            averages.append(avg)

    representativeness = []
    for d, sp in enumerate(splits):
        tests = representativeness_test(sp.test, profiles)
        representativeness.append(
            {
                "dataset": d + 1,
                "seed": cfg.seeds[d],
                "features": [
                    {
                        "feature": t.feature,
                        "levene_p": t.levene_p,
                        "t": t.t_stat,
                        "t_p": t.t_p,
                        "equal_var": t.equal_var,
                        "degenerate": t.degenerate,
                    }
                    for t in tests
                ],
            }
        )

    n_legit, n_fake = profiles.class_counts()
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(cfg),
        "profiles": {"total": len(profiles), "legitimate": n_legit, "fake": n_fake},
        "splits": [
            {"dataset": d + 1, "seed": sp.seed, "train": len(sp.train), "test": len(sp.test)}
            for d, sp in enumerate(splits)
        ],
        "pca": selection_to_dict(selection) if selection else None,
        "representativeness": representativeness,
        "rows": rows,
        "averages": averages,
        "failed": any(r["status"] != "ok" for r in rows),
    }


def report_csv(report: dict) -> str:
    """Flat CSV of per-dataset rows followed by the averages."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(
        ["dataset", "feature_mode", "method", "status", "tpr", "tnr", "accuracy_pct",
         "mcnemar_p", "schema_version"]
    )

    def fmt(v):
        return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))

    for r in report["rows"]:
        ok = r["status"] == "ok"
        w.writerow(
            [
                r["dataset"],
                r["feature_mode"],
                r["method"],
                r["status"],
                fmt(r.get("tpr")) if ok else "",
                fmt(r.get("tnr")) if ok else "",
                fmt(r.get("accuracy_pct")) if ok else "",
                fmt(r["mcnemar"]["p"]) if ok else "",
                report["schema_version"],
            ]
        )
    for a in report["averages"]:
        w.writerow(
            ["average", a["feature_mode"], a["method"], a["status"], fmt(a["tpr"]), fmt(a["tnr"]),
             fmt(a["accuracy_pct"]), "", report["schema_version"]]
        )
    return out.getvalue()


def write_report(report: dict, output_dir: str | os.PathLike) -> tuple[Path, Path]:
    out = Path(output_dir)
    json_path, csv_path = out / "report.json", out / "report.csv"
    write_atomic(json_path, dumps(report))
    write_atomic(csv_path, report_csv(report))
    return json_path, csv_path
