import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from profilecheck.errors import AllFeaturesRemoved, TooFewRows
from profilecheck.pca_select import (
    pca_from_correlation,
    run_pca,
    select_features,
    select_from_correlation,
)
from profilecheck.profile_data import FeatureMatrix
from reference import (
    PLANTED_NAMES,
    PLANTED_R,
    LOADING_FEATURES,
    PUBLISHED_LOADINGS,
    LOADING_TYPO_CELL,
    canonical_columns,
    oracle_varimax,
    published_correlation,
)


def matrix(x, names=None):
    x = np.asarray(x, dtype=float)
    names = names or tuple(f"f{j}" for j in range(x.shape[1]))
    return FeatureMatrix(x, tuple(names), x.min(0), x.max(0))


def latent_data(seed, n=80, blocks=3, per_block=3, noise=0.5):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, blocks))
    cols = [z[:, b] + noise * rng.normal(size=n) for b in range(blocks) for _ in range(per_block)]
    return np.column_stack(cols)


class TestRunPca:
    def test_perfectly_correlated_pair(self):
        x = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.2, 0.2]])
        model = run_pca(matrix(x))
        assert model.n_components == 1
        assert model.cumulative_pct[0] == pytest.approx(100.0)

    def test_published_variance(self):
        model = pca_from_correlation(published_correlation(), LOADING_FEATURES, n_obs=74)
        assert model.n_components == 4
        assert model.cumulative_pct[3] == pytest.approx(66.15, abs=2)
        assert model.kmo == pytest.approx(0.655, abs=0.02)
        assert model.bartlett_p < 0.05

    def test_published_loadings(self):
        model = pca_from_correlation(published_correlation(), LOADING_FEATURES)
        ours = model.loadings
        mask = np.ones_like(ours, dtype=bool)
        mask[LOADING_TYPO_CELL] = False
        # printed loadings come from a 3-decimal correlation matrix
        np.testing.assert_allclose(ours[mask], PUBLISHED_LOADINGS[mask], atol=0.003)
        assert ours[LOADING_TYPO_CELL] == pytest.approx(-0.177, abs=0.003)

    def test_invariants(self):
        model = run_pca(matrix(latent_data(1)))
        lam = model.eigenvalues
        np.testing.assert_allclose(model.pct_variance, 100 * lam / lam.sum())
        np.testing.assert_allclose(model.cumulative_pct, np.cumsum(model.pct_variance))
        assert model.n_components == int((lam >= 1).sum())
        np.testing.assert_allclose(
            (model.loadings**2).sum(1), (model.unrotated_loadings**2).sum(1), atol=1e-8
        )
        # rotated loadings agree with an independent varimax up to column order/sign
        np.testing.assert_allclose(
            canonical_columns(model.loadings), canonical_columns(oracle_varimax(model.unrotated_loadings)), atol=1e-4
        )

    def test_preconditions(self):
        with pytest.raises(TooFewRows):
            run_pca(matrix(np.ones((5, 1))))
        with pytest.raises(TooFewRows):
            run_pca(matrix([[0, 1], [1, 0]]))

    def test_singular_kmo_flagged(self):
        x = latent_data(2, per_block=1)
        x = np.column_stack([x, x[:, 0]])
        model = run_pca(matrix(x))
        assert math.isnan(model.kmo) and "kmo_singular" in model.flags


class TestSelection:
    def test_planted_cross_loading_hand_trace(self):
        # By hand: (1,-1,0,0)/sqrt2 is an eigenvector with eigenvalue 0.2. In the
        # basis u=(1,1,0,0)/sqrt2, c, d the rest is [[1.8,0,.8485],[0,1,.6],[.8485,.6,1]],
        # with roots 2.418, 1.237, 0.144. Two components survive; after rotation
        # a, b load on the first, c on the second and d on both.
        # det(sub - x I) = (1.8 - x)((1 - x)^2 - 0.36) - 0.72 (1 - x)
        #                = -(x^3 - 3.8 x^2 + 3.52 x - 0.432)
        cubic = np.sort(np.roots([1.0, -3.8, 3.52, -0.432]).real)[::-1]
        expected_lam = np.sort(np.r_[cubic, 0.2])[::-1]

        res = select_from_correlation(PLANTED_R, PLANTED_NAMES)
        first, second = res.trace
        np.testing.assert_allclose(
            pca_from_correlation(PLANTED_R, PLANTED_NAMES).eigenvalues, expected_lam, atol=1e-10
        )
        assert first.load_counts == (1, 1, 1, 2)
        assert first.removed == ("d",)
        assert second.load_counts == (1, 1, 1) and second.removed == ()
        assert res.selected_features == ("a", "b", "c")
        assert res.removed_features == (("d", 1),)
        # second round by hand: eigenvalues 1.8, 1, 0.2; loadings sqrt(0.9) and 1
        np.testing.assert_allclose(res.model.eigenvalues, [1.8, 1.0, 0.2], atol=1e-12)
        np.testing.assert_allclose(
            res.model.loadings, [[math.sqrt(0.9), 0], [math.sqrt(0.9), 0], [0, 1]], atol=1e-10
        )

    def test_published_is_a_fixed_point(self):
        res = select_from_correlation(published_correlation(), LOADING_FEATURES, 74)
        assert res.selected_features == LOADING_FEATURES
        assert len(res.trace) == 1 and res.removed_features == ()

    def test_simple_structure_no_removals(self):
        res = select_features(matrix(latent_data(3, noise=0.3)))
        assert len(res.trace) == 1
        assert res.removed_features == ()

    def test_all_removed_is_an_error(self):
        r = np.full((10, 10), 0.1)
        np.fill_diagonal(r, 1)
        with pytest.raises(AllFeaturesRemoved):
            select_from_correlation(r, [f"f{j}" for j in range(10)])

    def test_threshold_is_strict(self):
        model = pca_from_correlation(PLANTED_R, PLANTED_NAMES)
        edge = replace(model, loadings=np.array([[0.5, 0.9], [0.51, 0.0], [-0.5, 0.2], [0.0, -0.6]]))
        assert tuple(edge.load_counts()) == (1, 1, 0, 1)

    def test_numbered_rows(self):
        res = select_from_correlation(PLANTED_R, PLANTED_NAMES)
        assert res.numbered() == [("a", True, 1), ("b", True, 2), ("c", True, 3), ("d", False, None)]

    def test_data_path_matches_correlation_path(self):
        x = latent_data(5)
        x = np.column_stack([x, x[:, 0] + x[:, 4]])
        from profilecheck.numerics import correlation_matrix

        a = select_features(matrix(x))
        b = select_from_correlation(correlation_matrix(x).values, a.original_features, x.shape[0])
        assert a.selected_features == b.selected_features
        assert a.removed_features == b.removed_features

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 100_000), st.integers(2, 4), st.integers(2, 4))
    def test_invariants(self, seed, blocks, per_block):
        rng = np.random.default_rng(seed)
        x = latent_data(seed, blocks=blocks, per_block=per_block, noise=rng.uniform(0.3, 1.5))
        x = np.column_stack([x, x[:, 0] + x[:, -1] + rng.normal(size=len(x))])
        m = matrix(x)
        try:
            res = select_features(m)
        except AllFeaturesRemoved:
            return
        removed = [f for f, _ in res.removed_features]
        assert sorted(res.selected_features + tuple(removed)) == sorted(m.feature_names)
        assert not set(removed) & set(res.selected_features)
        assert len(res.trace) <= len(m.feature_names)
        sizes = [len(t.features) for t in res.trace]
        assert all(b < a for a, b in zip(sizes, sizes[1:]))
        assert all(z == 1 for z in res.trace[-1].load_counts)
        again = select_features(m)
        assert again.selected_features == res.selected_features
        np.testing.assert_array_equal(again.model.loadings, res.model.loadings)
