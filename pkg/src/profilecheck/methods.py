"""Uniform fit/predict wrapper over the three classifier families."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .nn_classifier import NNConfig, NNModel, nn_train
from .profile_data import FeatureMatrix
from .svm_classifier import POLYNOMIAL, RBF, KernelSpec, SVMModel, svm_train
from .wa_classifier import WAModel, wa_feature_stats, wa_index

METHODS = ("nn", "svm_rbf", "svm_poly", "wa")


@dataclass(frozen=True)
class MethodParams:
    nn: NNConfig = field(default_factory=NNConfig)
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    rbf_gamma: float | str = "auto"
    poly_gamma: float | str = "auto"
    poly_degree: int = 3
    poly_coef: float = 1.0
    # Weighted average: weights from the training half only instead of all legitimate profiles.
    wa_train_only: bool = False
    # Rows that define the profile index: "test", "train" or "full".
    wa_index_on: str = "test"

    def with_updates(self, **kw) -> "MethodParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class FittedMethod:
    name: str
    model: Any
    info: dict

    def predict(self, x) -> np.ndarray:
        return self.model.predict(np.asarray(getattr(x, "values", x), dtype=float))

    def to_dict(self) -> dict:
        return {"method": self.name, "model": self.model.to_dict(), "info": self.info}

    @classmethod
    def from_dict(cls, d: dict) -> "FittedMethod":
        name = d["method"]
        loader = {"nn": NNModel, "svm_rbf": SVMModel, "svm_poly": SVMModel, "wa": WAModel}[name]
        return cls(name, loader.from_dict(d["model"]), dict(d.get("info", {})))


def fit_method(
    name: str,
    train: FeatureMatrix,
    params: MethodParams | None = None,
    *,
    full: FeatureMatrix | None = None,
    test: FeatureMatrix | None = None,
) -> FittedMethod:
    """Fit ``name`` on ``train`` (labels taken from the matrix).

    The weighted-average method also looks at ``full`` (source of the
    legitimate-profile statistics) and ``test`` (default index rows).
    """
    params = params or MethodParams()
    y = train.labels
    if y is None:
        raise ValueError("training matrix carries no labels")
    if name == "nn":
        model = nn_train(train.values, y, params.nn)
        return FittedMethod(name, model, {"training_error": model.training_error, "epochs": model.epochs})
    if name in ("svm_rbf", "svm_poly"):
        if name == "svm_rbf":
            spec = KernelSpec(RBF, params.rbf_gamma)
        else:
            spec = KernelSpec(POLYNOMIAL, params.poly_gamma, params.poly_coef, params.poly_degree)
        model = svm_train(train.values, y, spec, C=params.svm_C, tol=params.svm_tol)
        return FittedMethod(
            name,
            model,
            {"support_vectors": int(len(model.dual_coef)), "gamma": float(model.kernel.gamma)},
        )
    if name == "wa":
        source = train if params.wa_train_only or full is None else full
        legit = source.rows(np.flatnonzero(source.labels == 1))
        table = wa_feature_stats(legit)
        index_rows = {"test": test, "train": train, "full": full}.get(params.wa_index_on)
        if index_rows is None:
            index_rows = train if test is None else test
        model = wa_index(table, index_rows)
        return FittedMethod(name, model, {"profile_index": model.profile_index})
    raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
