"""Command-line front end.

Exit codes: 0 success, 1 data/module error (diagnostic on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .errors import ProfileCheckError
from .evaluation import compute_metrics, mcnemar, robustness_sweep
from .experiment import (
    SCHEMA_VERSION,
    build_config,
    dumps,
    load_profiles,
    parse_config_text,
    pca_model_to_dict,
    run_experiment,
    selection_to_dict,
    write_atomic,
    write_report,
)
from .methods import METHODS, FittedMethod, MethodParams, fit_method
from .nn_classifier import NNConfig
from .pca_select import run_pca, select_features
from .profile_data import (
    format_profiles,
    normalize,
    normalize_with,
    representativeness_test,
    split,
    synth_generate,
)
from .wa_classifier import wa_feature_stats


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _feature_subset(full, mode: str, bartlett_n=None) -> list[str]:
    if mode == "all":
        return list(full.feature_names)
    return list(select_features(full, bartlett_n).selected_features)


def cmd_ingest(args) -> int:
    profiles = load_profiles(args.input)
    raw = profiles.raw_matrix()
    n_legit, n_fake = profiles.class_counts()
    summary = {
        "schema_version": SCHEMA_VERSION,
        "profiles": len(profiles),
        "legitimate": n_legit,
        "fake": n_fake,
        "features": [
            {
                "feature": name,
                "maximum": float(raw[:, j].max()) if len(profiles) else None,
                "average": float(raw[:, j].mean()) if len(profiles) else None,
            }
            for j, name in enumerate(profiles.feature_names)
        ],
    }
    if args.normalized_out and len(profiles):
        m = normalize(profiles)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["profile_id", *m.feature_names, "legitimacy"])
        for pid, row, y in zip(m.profile_ids, m.values, m.labels):
            w.writerow([pid, *(repr(float(v)) for v in row), int(y)])
        write_atomic(args.normalized_out, buf.getvalue())
    _emit(dumps(summary), args.out)
    return 0


def cmd_synth(args) -> int:
    profiles = synth_generate(args.legit, args.fake, args.seed, attenuation=args.attenuation)
    _emit(format_profiles(profiles), args.out)
    return 0


def cmd_pca(args) -> int:
    full = normalize(load_profiles(args.input))
    initial = run_pca(full, args.bartlett_n)
    sel = select_features(full, args.bartlett_n)
    report = {
        "schema_version": SCHEMA_VERSION,
        "initial": pca_model_to_dict(initial),
        "selection": selection_to_dict(sel),
    }
    _emit(dumps(report), args.out)
    return 0


def _params(args) -> MethodParams:
    nn = NNConfig(
        hidden_neurons=args.nn_hidden, max_epochs=args.nn_max_epochs, weight_init_seed=args.nn_seed
    )
    return MethodParams(
        nn=nn,
        svm_C=args.svm_c,
        poly_degree=args.poly_degree,
        poly_coef=args.poly_coef,
        wa_train_only=args.wa_train_only,
    )


def cmd_train(args) -> int:
    profiles = load_profiles(args.input)
    full = normalize(profiles)
    features = _feature_subset(full, args.features, args.bartlett_n)
    m = full.columns(features)
    sp = split(profiles, args.seed)
    train = m.rows(sp.train_idx)
    test = m.rows(sp.test_idx)
    fitted = fit_method(args.method, train, _params(args), full=m, test=test)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "feature_mode": args.features,
        "feature_names": features,
        "normalization": {
            "feature_names": list(full.feature_names),
            "mins": full.mins,
            "maxs": full.maxs,
        },
        "split_seed": args.seed,
        **fitted.to_dict(),
    }
    _emit(dumps(doc), args.out)
    return 0


def cmd_eval(args) -> int:
    with open(args.model, encoding="utf-8") as fh:
        doc = json.load(fh)
    fitted = FittedMethod.from_dict(doc)
    profiles = load_profiles(args.input)
    norm = doc["normalization"]
    if list(norm["feature_names"]) != list(profiles.feature_names):
        raise ProfileCheckError("model was trained on a different feature schema")
    m = normalize_with(profiles, np.asarray(norm["mins"]), np.asarray(norm["maxs"]))
    m = m.columns(doc["feature_names"])
    if not args.all_rows:
        m = m.rows(split(profiles, doc["split_seed"]).test_idx)
    preds = fitted.predict(m.values)
    metrics = compute_metrics(preds, m.labels)
    mc = mcnemar(preds, m.labels, args.mcnemar)
    out = {
        "schema_version": SCHEMA_VERSION,
        "method": fitted.name,
        "rows": int(len(preds)),
        **metrics.to_dict(),
        "mcnemar": {"b": mc.b, "c": mc.c, "chi2": mc.chi2, "p": mc.p, "method": mc.method},
    }
    _emit(dumps(out), args.out)
    return 0


def cmd_sweep(args) -> int:
    profiles = load_profiles(args.input)
    full = normalize(profiles)
    features = _feature_subset(full, args.features, args.bartlett_n)
    splits = [split(profiles, s) for s in args.seeds]
    curve = robustness_sweep(
        full,
        splits,
        axis=args.axis,
        repetitions=args.repetitions,
        seed=args.sweep_seed,
        method=args.method,
        params=_params(args),
        features=features,
    )
    _emit(curve.to_csv(SCHEMA_VERSION), args.out)
    return 0


def cmd_report(args) -> int:
    profiles = load_profiles(args.input)
    full = normalize(profiles)
    features = _feature_subset(full, args.features, args.bartlett_n)
    m = full.columns(features)
    if args.train_only:
        m = m.rows(split(profiles, args.seed).train_idx)
    table = wa_feature_stats(m.rows(np.flatnonzero(m.labels == 1)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "feature_count", "feature_average", "normalized_count", "feature_weight",
                "schema_version"])
    for name, count, avg, norm, weight in table.rows():
        w.writerow([name, count, repr(avg), repr(norm), repr(weight), SCHEMA_VERSION])
    _emit(buf.getvalue(), args.out)

    if args.representativeness:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "seed", "feature", "levene_p", "equal_var", "t", "t_p", "degenerate",
                    "schema_version"])
        for d, seed in enumerate(args.seeds, start=1):
            for t in representativeness_test(split(profiles, seed).test, profiles):
                w.writerow([d, seed, t.feature, repr(t.levene_p), int(t.equal_var), repr(t.t_stat),
                            repr(t.t_p), int(t.degenerate), SCHEMA_VERSION])
        write_atomic(args.representativeness, buf.getvalue())
    return 0


def cmd_run_experiment(args) -> int:
    values: dict[str, str] = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    for key in ("input", "output_dir", "seeds", "methods", "feature_modes", "workers"):
        override = getattr(args, key)
        if override is not None:
            values[key] = str(override)
    for item in args.set or ():
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip().lower()] = v.strip()
    try:
        cfg = build_config(values)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    report = run_experiment(cfg)
    json_path, csv_path = write_report(report, cfg.output_dir)
    print(f"wrote {json_path} and {csv_path}")
    if report["failed"]:
        print("FAILED: one or more grid cells failed; see report.json", file=sys.stderr)
        return 1
    return 0


def _add_common_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", choices=("all", "pca_selected"), default="pca_selected")
    p.add_argument("--bartlett-n", type=int, default=None)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--poly-degree", type=int, default=3)
    p.add_argument("--poly-coef", type=float, default=1.0)
    p.add_argument("--nn-hidden", type=int, default=2)
    p.add_argument("--nn-max-epochs", type=int, default=100_000)
    p.add_argument("--nn-seed", type=int, default=0)
    p.add_argument("--wa-train-only", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="profilecheck", description="Fake-profile identification from static profile features."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a profile CSV and summarize it")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--normalized-out", help="also write the min-max normalized matrix as CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic profile CSV")
    p.add_argument("--legit", type=int, required=True)
    p.add_argument("--fake", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attenuation", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pca", help="PCA report and iterative feature selection (JSON)")
    p.add_argument("--input", required=True)
    p.add_argument("--bartlett-n", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("train", help="train one method on the training half of a split")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--seed", type=int, default=1, help="split seed")
    p.add_argument("--out")
    _add_common_model_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--all-rows", action="store_true", help="evaluate every row, not the test half")
    p.add_argument("--mcnemar", choices=("auto", "exact", "chi2"), default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="TPR/TNR versus training or test size (CSV)")
    p.add_argument("--input", required=True)
    p.add_argument("--axis", choices=("train", "test"), default="train")
    p.add_argument("--method", choices=METHODS, default="svm_poly")
    p.add_argument("--seeds", type=_seeds, default=(1, 2, 3), help="split seeds, comma-separated")
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--sweep-seed", type=int, default=0)
    p.add_argument("--out")
    _add_common_model_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="feature weight table (CSV) and split representativeness")
    p.add_argument("--input", required=True)
    p.add_argument("--features", choices=("all", "pca_selected"), default="all")
    p.add_argument("--bartlett-n", type=int, default=None)
    p.add_argument("--train-only", action="store_true")
    p.add_argument("--seed", type=int, default=1, help="split seed for --train-only")
    p.add_argument("--seeds", type=_seeds, default=(1, 2, 3))
    p.add_argument("--representativeness", metavar="CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run-experiment", help="full grid: 3 splits x feature modes x methods")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--input")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seeds")
    p.add_argument("--methods")
    p.add_argument("--feature-modes", dest="feature_modes")
    p.add_argument("--workers", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.set_defaults(func=cmd_run_experiment)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))  # exits 2
    except (ProfileCheckError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
