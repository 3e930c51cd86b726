import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from profilecheck.errors import NotSymmetric, Singular, TooFewRows
from profilecheck.numerics import (
    bartlett,
    correlation_matrix,
    eigen_symmetric,
    kmo,
    varimax,
    varimax_criterion,
)
from reference import (
    canonical_columns,
    oracle_eigenvalues_charpoly,
    oracle_kmo,
    oracle_power_iteration,
    oracle_varimax,
    published_correlation,
)


def random_symmetric(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    return (a + a.T) / 2


def random_correlation(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n + 20, n)) @ rng.normal(size=(n, n))
    return np.corrcoef(x, rowvar=False)


class TestCorrelation:
    def test_identical_columns(self):
        x = np.array([[1.0, 1.0], [2, 2], [5, 5]])
        assert correlation_matrix(x).values[0, 1] == pytest.approx(1.0)

    def test_negated_columns(self):
        x = np.array([[1.0, -1.0], [2, -2], [5, -5]])
        assert correlation_matrix(x).values[0, 1] == pytest.approx(-1.0)

    def test_constant_column_flagged(self):
        x = np.array([[1.0, 3.0, 0.0], [2, 3, 1], [4, 3, 0]])
        c = correlation_matrix(x)
        assert c.degenerate and c.constant_columns == (1,)
        assert c.values[1, 1] == 1 and c.values[0, 1] == 0 and c.values[1, 2] == 0

    def test_matches_numpy(self):
        x = np.random.default_rng(1).normal(size=(30, 5))
        np.testing.assert_allclose(correlation_matrix(x).values, np.corrcoef(x, rowvar=False), atol=1e-14)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            correlation_matrix(np.ones((1, 3)))


class TestEigen:
    def test_identity(self):
        np.testing.assert_array_equal(eigen_symmetric(np.eye(5)).eigenvalues, np.ones(5))

    def test_two_by_two(self):
        es = eigen_symmetric(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(es.eigenvalues, [3.0, 1.0], atol=1e-14)
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(es.eigenvectors[:, 0], [s, s], atol=1e-14)
        # largest-magnitude entry positive; ties resolve to the first entry
        np.testing.assert_allclose(np.abs(es.eigenvectors[:, 1]), [s, s], atol=1e-14)
        assert es.eigenvectors[np.argmax(np.abs(es.eigenvectors[:, 1])), 1] > 0

    def test_published_against_independent_oracles(self):
        r = published_correlation()
        lam = eigen_symmetric(r).eigenvalues
        np.testing.assert_allclose(lam, oracle_eigenvalues_charpoly(r), atol=1e-8)
        assert lam[0] == pytest.approx(oracle_power_iteration(r), abs=1e-10)
        retained = lam[lam >= 1]
        assert len(retained) == 4
        assert 100 * retained.sum() / lam.sum() == pytest.approx(66.15, abs=2)

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            eigen_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000), st.integers(1, 12))
    def test_properties(self, seed, n):
        a = random_symmetric(seed, n)
        es = eigen_symmetric(a)
        lam, v = es.eigenvalues, es.eigenvectors
        scale = np.linalg.norm(a)
        assert np.all(np.diff(lam) <= 0)
        np.testing.assert_allclose(a @ v, v * lam, atol=1e-8 * scale)
        np.testing.assert_allclose(v @ np.diag(lam) @ v.T, a, atol=1e-8 * scale)
        np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-10)
        assert lam.sum() == pytest.approx(np.trace(a), rel=1e-6, abs=1e-10)
        sign, logdet = np.linalg.slogdet(a)
        if sign != 0 and np.all(np.abs(lam) > 1e-8):
            assert np.prod(np.sign(lam)) == sign
            assert np.log(np.abs(lam)).sum() == pytest.approx(logdet, rel=1e-6, abs=1e-8)
        for j in range(n):
            assert v[np.argmax(np.abs(v[:, j])), j] > 0
        np.testing.assert_allclose(lam, np.linalg.eigvalsh(a)[::-1], atol=1e-9 * max(scale, 1))


class TestVarimax:
    def test_simple_structure_fixed_point(self):
        lo = np.array([[0.9, 0.0], [0.8, 0.0], [0.0, 0.7], [0.0, 0.6]])
        rotated, q = varimax(lo)
        np.testing.assert_allclose(rotated, lo, atol=1e-8)

    def test_recovers_rotated_structure(self):
        simple = np.array([[0.9, 0.0], [0.8, 0.0], [0.7, 0.0], [0.0, 0.85], [0.0, 0.75]])
        t = math.pi / 4
        rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        rotated, _ = varimax(simple @ rot)
        np.testing.assert_allclose(rotated, simple, atol=1e-6)

    def test_single_component_unchanged(self):
        lo = np.array([[0.5], [0.3]])
        rotated, q = varimax(lo)
        np.testing.assert_array_equal(rotated, lo)
        np.testing.assert_array_equal(q, np.eye(1))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 100_000), st.integers(3, 12), st.integers(2, 4))
    def test_rotation_properties(self, seed, p, k):
        rng = np.random.default_rng(seed)
        lo = rng.uniform(-1, 1, size=(p, k)) / math.sqrt(k)
        rotated, q = varimax(lo)
        np.testing.assert_allclose(q.T @ q, np.eye(k), atol=1e-8)
        np.testing.assert_allclose(lo @ q, rotated, atol=1e-12)
        np.testing.assert_allclose((rotated**2).sum(1), (lo**2).sum(1), atol=1e-8)
        # Kaiser-normalized criterion does not decrease
        h = np.sqrt((lo**2).sum(1))[:, None]
        assert varimax_criterion(rotated / h) >= varimax_criterion(lo / h) - 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 100_000))
    def test_matches_svd_oracle(self, seed):
        # well-separated structure so the optimum is unique
        rng = np.random.default_rng(seed)
        simple = np.zeros((9, 3))
        for i in range(9):
            simple[i, i % 3] = rng.uniform(0.6, 0.9)
            simple[i, (i + 1) % 3] = rng.uniform(0.0, 0.2)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        lo = simple @ q
        ours = canonical_columns(varimax(lo)[0])
        oracle = canonical_columns(oracle_varimax(lo))
        np.testing.assert_allclose(ours, oracle, atol=1e-4)


class TestKMO:
    def test_identity_degenerate(self):
        res = kmo(np.eye(4))
        assert res.value == 0 and res.degenerate

    def test_three_by_three_cofactor_oracle(self):
        r = np.full((3, 3), 0.5)
        np.fill_diagonal(r, 1)
        # inverse = 2(I - J/4): diagonal 1.5, off-diagonal -0.5, so every
        # partial correlation is 1/3
        assert kmo(r).value == pytest.approx(oracle_kmo(r), abs=1e-12)
        assert kmo(r).value == pytest.approx(1.5 / (1.5 + 6 / 9), abs=1e-12)

    def test_published_matrix(self):
        r = published_correlation()
        assert kmo(r).value == pytest.approx(0.655, abs=0.02)
        assert kmo(r).value == pytest.approx(oracle_kmo(r), abs=1e-10)

    def test_singular(self):
        r = np.ones((3, 3))
        with pytest.raises(Singular):
            kmo(r)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 100_000), st.integers(2, 8))
    def test_in_unit_interval(self, seed, n):
        res = kmo(random_correlation(seed, n))
        assert 0 <= res.value <= 1
        assert np.all((0 <= res.per_variable) & (res.per_variable <= 1))


class TestBartlett:
    def test_identity(self):
        res = bartlett(np.eye(4), 50)
        assert res.chi2 == 0 and res.p == 1 and res.df == 6

    def test_two_by_two_by_hand(self):
        r = np.array([[1.0, 0.9], [0.9, 1.0]])
        res = bartlett(r, 30)
        expected = -(30 - 1 - (2 * 2 + 5) / 6) * math.log(1 - 0.81)
        assert res.chi2 == pytest.approx(expected, rel=1e-12)
        assert res.df == 1
        # chi-square with 1 df: p = erfc(sqrt(x/2))
        assert res.p == pytest.approx(math.erfc(math.sqrt(expected / 2)), rel=1e-9)

    def test_published_matrix(self):
        res = bartlett(published_correlation(), 74)
        assert res.df == 55 and res.p < 0.05

    def test_needs_more_rows(self):
        with pytest.raises(TooFewRows):
            bartlett(np.eye(4), 4)

    def test_singular_flagged(self):
        res = bartlett(np.ones((3, 3)), 10)
        assert res.singular and res.p == 0
