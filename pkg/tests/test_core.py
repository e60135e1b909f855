import itertools

import numpy as np
import pytest

from distlasso import (
    CovarianceSpec,
    Dataset,
    GroundTruth,
    InvalidCovarianceError,
    InvalidInputError,
    empirical_covariance,
    error_norms,
    generalized_coherence,
    norm_inf_l,
)


# ---------------------------------------------------------------- oracles

def cov_bruteforce(x):
    """Entry-by-entry double loop for the sample second-moment matrix."""
    n, p = x.shape
    out = np.zeros((p, p))
    for j in range(p):
        for k in range(p):
            acc = 0.0
            for i in range(n):
                acc += x[i, j] * x[i, k]
            out[j, k] = acc / n
    return out


def norms_bruteforce(a, b):
    l1 = l2 = linf = 0.0
    for aj, bj in zip(a, b):
        d = abs(aj - bj)
        l1 += d
        l2 += d * d
        linf = max(linf, d)
    return l1, l2**0.5, linf


def inf_l_bruteforce(x, l):
    """Exhaustive max over all coordinate subsets of size >= l."""
    p = len(x)
    best = 0.0
    for size in range(l, p + 1):
        for subset in itertools.combinations(range(p), size):
            v = np.linalg.norm(x[list(subset)]) / np.sqrt(size)
            best = max(best, v)
    return best


# ------------------------------------------------------------------ types

class TestDataset:
    def test_accepts_well_formed(self):
        d = Dataset(x=np.ones((3, 2)), y=np.zeros(3))
        assert d.n == 3 and d.p == 2

    def test_rejects_row_mismatch(self):
        with pytest.raises(InvalidInputError):
            Dataset(x=np.ones((3, 2)), y=np.zeros(4))

    def test_rejects_non_finite(self):
        x = np.ones((3, 2))
        x[1, 1] = np.nan
        with pytest.raises(InvalidInputError):
            Dataset(x=x, y=np.zeros(3))

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            Dataset(x=np.ones((0, 2)), y=np.zeros(0))


class TestGroundTruth:
    def test_support_derived_from_nonzeros(self):
        t = GroundTruth(beta_star=np.array([0.0, 2.0, 0.0, -1.0]), sigma_y=1.0)
        assert t.support == (1, 3)
        assert t.s == 2

    def test_rejects_negative_noise(self):
        with pytest.raises(InvalidInputError):
            GroundTruth(beta_star=np.zeros(2), sigma_y=-0.1)


class TestCovarianceSpec:
    def test_ar1_matrix_entries(self):
        spec = CovarianceSpec("ar1", 4, rho=0.5)
        sigma = spec.matrix()
        for i in range(4):
            for j in range(4):
                assert sigma[i, j] == pytest.approx(0.5 ** abs(i - j))

    def test_ar1_positive_definite(self):
        for rho in (-0.9, -0.5, 0.0, 0.5, 0.9):
            spec = CovarianceSpec("ar1", 12, rho=rho)
            assert spec.lambda_min() > 0

    def test_identity_condition_number(self):
        assert CovarianceSpec("identity", 7).condition_number() == 1.0

    def test_rejects_rho_out_of_range(self):
        with pytest.raises(InvalidCovarianceError):
            CovarianceSpec("ar1", 4, rho=1.0)


# ------------------------------------------------------- empirical_covariance

class TestEmpiricalCovariance:
    def test_identity_design_scaled_by_n(self):
        got = empirical_covariance(np.eye(2))
        np.testing.assert_allclose(got, np.eye(2) / 2.0)

    def test_single_column_of_ones(self):
        got = empirical_covariance(np.ones((3, 1)))
        np.testing.assert_allclose(got, [[1.0]])

    def test_matches_double_loop_oracle(self, rng):
        x = rng.standard_normal((20, 5))
        got = empirical_covariance(x)
        np.testing.assert_allclose(got, cov_bruteforce(x), atol=1e-12)

    def test_exactly_symmetric_and_psd(self, rng):
        for _ in range(5):
            x = rng.standard_normal((15, 8))
            s = empirical_covariance(x)
            assert np.array_equal(s, s.T)
            assert np.linalg.eigvalsh(s).min() >= -1e-10

    def test_rejects_non_finite(self):
        x = np.ones((3, 2))
        x[0, 0] = np.inf
        with pytest.raises(InvalidInputError):
            empirical_covariance(x)


# ------------------------------------------------------ generalized_coherence

class TestGeneralizedCoherence:
    def test_exact_inverse_gives_zero(self, rng):
        x = rng.standard_normal((60, 6))
        sigma = empirical_covariance(x)
        assert generalized_coherence(sigma, np.linalg.inv(sigma)) <= 1e-10

    def test_identity_pair(self):
        assert generalized_coherence(np.eye(3), np.eye(3)) == 0.0

    def test_direct_arithmetic_2x2(self):
        sigma = np.array([[1.0, 0.5], [0.5, 1.0]])
        assert generalized_coherence(sigma, np.eye(2)) == pytest.approx(0.5)

    def test_well_conditioned_random_inverse(self, rng):
        for p in (5, 20, 50):
            a = rng.standard_normal((3 * p, p))
            sigma = empirical_covariance(a)
            assert generalized_coherence(sigma, np.linalg.inv(sigma)) <= 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            generalized_coherence(np.eye(3), np.eye(4))


# ---------------------------------------------------------------- error_norms

class TestErrorNorms:
    def test_identical_vectors_all_zero(self):
        r = error_norms(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert (r.l1, r.l2, r.linf) == (0.0, 0.0, 0.0)
        assert r.support_recovered

    def test_three_four_five(self):
        r = error_norms(np.array([3.0, 4.0]), np.zeros(2))
        assert (r.l1, r.l2, r.linf) == (7.0, 5.0, 4.0)

    def test_matches_naive_loop(self, rng):
        a, b = rng.standard_normal(10), rng.standard_normal(10)
        r = error_norms(a, b)
        l1, l2, linf = norms_bruteforce(a, b)
        assert r.l1 == pytest.approx(l1, abs=1e-12)
        assert r.l2 == pytest.approx(l2, abs=1e-12)
        assert r.linf == pytest.approx(linf, abs=1e-12)

    def test_norm_ordering(self, rng):
        for _ in range(25):
            r = error_norms(rng.standard_normal(12), rng.standard_normal(12))
            assert r.linf <= r.l2 <= r.l1

    def test_support_recovery_compares_patterns(self):
        assert not error_norms(np.array([1.0, 0.0]), np.array([1.0, 2.0])).support_recovered
        assert error_norms(np.array([1.0, 0.0]), np.array([3.0, 0.0])).support_recovered

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            error_norms(np.zeros(2), np.zeros(3))


# ----------------------------------------------------------------- norm_inf_l

class TestNormInfL:
    def test_l1_is_linf(self):
        assert norm_inf_l(np.array([3.0, 4.0, 0.0, 0.0]), 1) == 4.0

    def test_lp_is_scaled_l2(self):
        assert norm_inf_l(np.array([3.0, 4.0, 0.0, 0.0]), 4) == pytest.approx(2.5)

    def test_midrange_matches_subset_enumeration(self, rng):
        x = np.array([3.0, 4.0, 0.0, 0.0])
        assert norm_inf_l(x, 2) == pytest.approx(inf_l_bruteforce(x, 2))

    def test_random_vectors_match_enumeration(self, rng):
        for _ in range(100):
            p = int(rng.integers(2, 11))
            x = rng.standard_normal(p)
            l = int(rng.integers(1, p + 1))
            assert norm_inf_l(x, l) == pytest.approx(inf_l_bruteforce(x, l), rel=1e-12)

    def test_larger_p_spot_checks(self, rng):
        for _ in range(3):
            x = rng.standard_normal(16)
            for l in (1, 7, 16):
                assert norm_inf_l(x, l) == pytest.approx(inf_l_bruteforce(x, l), rel=1e-12)

    def test_reductions_and_monotonicity(self, rng):
        for _ in range(100):
            p = int(rng.integers(2, 13))
            x = rng.standard_normal(p)
            assert norm_inf_l(x, 1) == pytest.approx(np.abs(x).max())
            assert norm_inf_l(x, p) == pytest.approx(np.linalg.norm(x) / np.sqrt(p))
            vals = [norm_inf_l(x, l) for l in range(1, p + 1)]
            assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_l_out_of_range(self):
        with pytest.raises(InvalidInputError):
            norm_inf_l(np.ones(3), 0)
        with pytest.raises(InvalidInputError):
            norm_inf_l(np.ones(3), 4)
