import numpy as np
import pytest

from distlasso import CovarianceSpec, InvalidInputError, SynthConfig, make_dataset
from distlasso.synth import _polar_normals, _substream, gen_design, gen_response, gen_sparse_beta


def cfg_identity(n=200, p=10, s=3, seed=7, **kw):
    return SynthConfig(n=n, p=p, s=s, cov=CovarianceSpec("identity", p), seed=seed, **kw)


class TestPolarNormals:
    def test_moments(self):
        z = _polar_normals(_substream(0, "design"), 200000)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01
        # tail mass sanity: P(|Z| > 3) ~ 0.0027
        frac = np.mean(np.abs(z) > 3)
        assert 0.001 < frac < 0.005

    def test_deterministic(self):
        a = _polar_normals(_substream(42, "design"), 1000)
        b = _polar_normals(_substream(42, "design"), 1000)
        np.testing.assert_array_equal(a, b)

    def test_prefix_stability(self):
        # growing the draw keeps the prefix: pairs are consumed in order
        a = _polar_normals(_substream(3, "noise"), 100)
        b = _polar_normals(_substream(3, "noise"), 50)
        np.testing.assert_array_equal(a[:50], b)


class TestGenDesign:
    def test_identity_covariance_concentrates(self):
        cfg = cfg_identity(n=2000, p=20, seed=11)
        x = gen_design(cfg)
        sigma_hat = x.T @ x / cfg.n
        off = sigma_hat - np.eye(20)
        bound = 4 * np.sqrt(np.log(20) / 2000)
        assert np.abs(off).max() <= bound

    def test_same_seed_bit_identical(self):
        cfg = cfg_identity(seed=5)
        np.testing.assert_array_equal(gen_design(cfg), gen_design(cfg))

    def test_ar1_adjacent_correlation(self):
        p = 10
        cfg = SynthConfig(n=5000, p=p, s=2, cov=CovarianceSpec("ar1", p, rho=0.5), seed=2)
        x = gen_design(cfg)
        for j in range(p - 1):
            r = np.corrcoef(x[:, j], x[:, j + 1])[0, 1]
            assert 0.45 <= r <= 0.55

    def test_ar1_matches_explicit_cholesky(self):
        # the column recursion is the closed-form triangular factor action
        p = 6
        cfg = SynthConfig(n=50, p=p, s=2, cov=CovarianceSpec("ar1", p, rho=0.7), seed=9)
        x = gen_design(cfg)
        z = _polar_normals(_substream(9, "design"), 50 * p).reshape(50, p)
        chol = np.linalg.cholesky(cfg.cov.matrix())
        np.testing.assert_allclose(x, z @ chol.T, atol=1e-12)


class TestGenSparseBeta:
    def test_zero_sparsity(self):
        truth = gen_sparse_beta(cfg_identity(s=0))
        assert truth.s == 0
        assert np.all(truth.beta_star == 0)

    def test_full_support(self):
        truth = gen_sparse_beta(cfg_identity(s=10, amplitude=2.5))
        assert truth.s == 10
        np.testing.assert_array_equal(np.abs(truth.beta_star), np.full(10, 2.5))

    def test_exact_count_and_magnitude(self):
        for seed in range(20):
            truth = gen_sparse_beta(cfg_identity(s=3, seed=seed))
            nz = truth.beta_star[truth.beta_star != 0]
            assert len(nz) == 3
            np.testing.assert_array_equal(np.abs(nz), np.ones(3))

    def test_support_uniformity_smoke(self):
        # each coordinate should land in the support a plausible number of times
        counts = np.zeros(10)
        trials = 2000
        for seed in range(trials):
            truth = gen_sparse_beta(cfg_identity(s=3, seed=seed))
            counts[list(truth.support)] += 1
        expected = trials * 3 / 10
        assert np.all(np.abs(counts - expected) < 5 * np.sqrt(expected))

    def test_beta_independent_of_n(self):
        a = gen_sparse_beta(cfg_identity(n=100, seed=13))
        b = gen_sparse_beta(cfg_identity(n=10000, seed=13))
        np.testing.assert_array_equal(a.beta_star, b.beta_star)


class TestGenResponse:
    def test_noiseless_is_exact(self):
        cfg = cfg_identity(sigma_y=0.0)
        truth = gen_sparse_beta(cfg)
        x = gen_design(cfg)
        y = gen_response(x, truth, cfg)
        np.testing.assert_array_equal(y, x @ truth.beta_star)

    def test_logistic_null_rate(self):
        cfg = cfg_identity(n=2000, s=0, response="logistic")
        truth = gen_sparse_beta(cfg)
        x = gen_design(cfg)
        y = gen_response(x, truth, cfg)
        assert set(np.unique(y)) <= {0.0, 1.0}
        assert 0.45 <= y.mean() <= 0.55

    def test_same_seed_identical(self):
        cfg = cfg_identity(seed=21)
        truth = gen_sparse_beta(cfg)
        x = gen_design(cfg)
        np.testing.assert_array_equal(
            gen_response(x, truth, cfg), gen_response(x, truth, cfg)
        )

    def test_design_noise_streams_decoupled(self):
        # changing the response kind must not disturb the design stream
        lin = cfg_identity(seed=33)
        logi = cfg_identity(seed=33, response="logistic")
        np.testing.assert_array_equal(gen_design(lin), gen_design(logi))


class TestMakeDataset:
    def test_shapes_and_reproducibility(self):
        cfg = cfg_identity(n=50, p=8, s=2, seed=3)
        d1, t1 = make_dataset(cfg)
        d2, t2 = make_dataset(cfg)
        assert d1.n == 50 and d1.p == 8
        np.testing.assert_array_equal(d1.x, d2.x)
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(t1.beta_star, t2.beta_star)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            SynthConfig(n=10, p=5, s=6, cov=CovarianceSpec("identity", 5))
        with pytest.raises(InvalidInputError):
            SynthConfig(n=10, p=5, s=2, cov=CovarianceSpec("identity", 4))
        with pytest.raises(InvalidInputError):
            SynthConfig(n=10, p=5, s=2, cov=CovarianceSpec("identity", 5), amplitude=0.0)
