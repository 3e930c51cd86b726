import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from profilecheck.errors import DegenerateData, DimensionMismatch, NonBinaryLabels, SingleClass
from profilecheck.numerics import eigen_symmetric
from profilecheck.svm_classifier import (
    POLYNOMIAL,
    RBF,
    KernelSpec,
    SVMModel,
    gram,
    kernel_eval,
    resolve_gamma,
    smo_solve,
    svm_predict,
    svm_train,
)
from reference import kkt_report, oracle_svm_dual, random_svm_instance


class TestKernel:
    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(0.01, 10))
    def test_rbf_self_is_one(self, x, gamma):
        assert kernel_eval(KernelSpec(RBF, gamma), x, x) == 1.0

    def test_polynomial_arithmetic(self):
        assert kernel_eval(KernelSpec(POLYNOMIAL, 1.0, 0.0, 2), [1, 1], [1, 1]) == 4.0

    def test_rbf_arithmetic(self):
        val = kernel_eval(KernelSpec(RBF, 0.5), [0, 0], [2, 0])
        assert val == pytest.approx(math.exp(-2), rel=1e-15)
        assert val == pytest.approx(0.13534, abs=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            kernel_eval(KernelSpec(RBF, 1.0), [0, 0], [1, 1, 1])

    def test_gram_matches_pointwise(self):
        rng = np.random.default_rng(0)
        a, b = rng.uniform(size=(4, 3)), rng.uniform(size=(5, 3))
        for spec in (KernelSpec(RBF, 0.7), KernelSpec(POLYNOMIAL, 0.3, 1.0, 3)):
            g = gram(spec, a, b)
            for i in range(4):
                for j in range(5):
                    assert g[i, j] == pytest.approx(kernel_eval(spec, a[i], b[j]), rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 100_000), st.integers(2, 25))
    def test_gram_psd(self, seed, n):
        x = np.random.default_rng(seed).uniform(size=(n, 4))
        for spec in (KernelSpec(RBF, 2.0), KernelSpec(POLYNOMIAL, 0.25, 1.0, 3)):
            lam = eigen_symmetric(gram(spec, x, x)).eigenvalues
            assert lam.min() >= -1e-8 * max(1.0, lam.max())

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            KernelSpec(RBF, -1.0)
        with pytest.raises(ValueError):
            KernelSpec(POLYNOMIAL, 1.0, 1.0, 0)


class TestGamma:
    def test_two_rows(self):
        assert resolve_gamma(np.array([[0.0, 0.0], [1.0, 0.0]])) == 1.0

    def test_three_rows(self):
        # squared distances {1, 1, 4}: median 1
        assert resolve_gamma(np.array([[0.0], [1.0], [2.0]])) == 1.0

    def test_scale_covariance(self):
        x = np.random.default_rng(3).uniform(size=(100, 4))
        g = resolve_gamma(x, seed=5)
        assert g > 0
        assert resolve_gamma(2 * x, seed=5) == pytest.approx(g / 4, rel=1e-14)

    def test_identical_rows(self):
        with pytest.raises(DegenerateData):
            resolve_gamma(np.ones((5, 2)))

    def test_polynomial_auto_gamma(self):
        spec = KernelSpec(POLYNOMIAL).resolve(np.zeros((3, 8)))
        assert spec.gamma == 1 / 8


class TestTraining:
    @pytest.mark.parametrize("C", [1.0, 100.0])
    def test_two_points_midpoint(self, C):
        x = np.array([[0.2, 0.2], [0.8, 0.8]])
        model = svm_train(x, [0, 1], KernelSpec(POLYNOMIAL, "auto", 0.0, 1), C=C)
        assert svm_predict(model, x[1]).score > 0 > svm_predict(model, x[0]).score
        np.testing.assert_array_equal(model.predict(x), [0, 1])
        assert abs(svm_predict(model, [0.5, 0.5]).score) < 1e-12

    def test_xor_rbf(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = np.array([1, 1, 0, 0])
        model = svm_train(x, y, KernelSpec(RBF, 1.0), C=10.0)
        np.testing.assert_array_equal(model.predict(x), y)

    def test_tie_is_legitimate(self):
        model = SVMModel(np.zeros((0, 2)), np.zeros(0), 0.0, KernelSpec(RBF, 1.0), 1.0)
        pred = svm_predict(model, [0.3, 0.3])
        assert pred.score == 0.0 and pred.label == 1

    def test_single_class(self):
        with pytest.raises(SingleClass):
            svm_train(np.eye(3), [1, 1, 1])

    def test_non_binary(self):
        with pytest.raises(NonBinaryLabels):
            svm_train(np.eye(3), [0, 1, 2])

    def test_iteration_cap_flags(self):
        x = np.random.default_rng(0).uniform(size=(20, 2))
        y = (x[:, 0] > 0.5).astype(int)
        with pytest.warns(RuntimeWarning):
            model = svm_train(x, y, KernelSpec(RBF, 1.0), max_iter=1)
        assert not model.converged and model.iterations == 1

    def test_stored_support_vectors(self):
        x = np.random.default_rng(1).uniform(size=(30, 3))
        y = (x.sum(1) > 1.5).astype(int)
        model = svm_train(x, y, KernelSpec(RBF, "auto"))
        alpha = np.abs(model.dual_coef)
        assert (alpha > 1e-12).all() and (alpha <= model.C + 1e-12).all()
        signs = np.sign(model.dual_coef)
        assert abs(alpha @ signs) < 1e-8

    def test_json_round_trip(self):
        x = np.random.default_rng(2).uniform(size=(25, 3))
        y = (x[:, 1] > 0.4).astype(int)
        model = svm_train(x, y, KernelSpec(POLYNOMIAL))
        again = SVMModel.from_dict(json.loads(json.dumps(model.to_dict())))
        np.testing.assert_array_equal(again.decision_function(x), model.decision_function(x))

    def test_dimension_mismatch(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0]])
        model = svm_train(x, [0, 1], KernelSpec(RBF, 1.0))
        with pytest.raises(DimensionMismatch):
            svm_predict(model, [0.0, 0.0, 0.0])


class TestSMO:
    @pytest.mark.parametrize("seed", [0, 1, 2, 7, 20])
    def test_oracle_equivalence(self, seed):
        k, y, C = random_svm_instance(seed)
        _, best = oracle_svm_dual(k, y, C)
        sol = smo_solve(k, y, C)
        assert sol.converged
        assert abs(sol.objective - best) <= 1e-4 * max(1.0, abs(best))

    def test_separable_20_points(self):
        rng = np.random.default_rng(20)
        x = np.r_[rng.normal(-1.5, 0.5, size=(10, 2)), rng.normal(1.5, 0.5, size=(10, 2))]
        y = np.r_[-np.ones(10), np.ones(10)]
        spec = KernelSpec(RBF, 0.5)
        k = gram(spec, x, x)
        _, best = oracle_svm_dual(k, y, 1.0)
        assert smo_solve(k, y, 1.0).objective == pytest.approx(best, rel=1e-4)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 100_000))
    def test_feasibility_and_kkt(self, seed):
        k, y, C = random_svm_instance(seed)
        sol = smo_solve(k, y, C, tol=1e-3)
        report = kkt_report(sol.alpha, y, k, sol.bias, C, tol=1e-3)
        assert report["box"] == 0
        assert report["equality"] < 1e-8
        assert report["zero"] == 0 and report["interior"] == 0 and report["bound"] == 0

    def test_deterministic(self):
        k, y, C = random_svm_instance(11)
        a, b = smo_solve(k, y, C), smo_solve(k, y, C)
        np.testing.assert_array_equal(a.alpha, b.alpha)
        assert a.bias == b.bias
