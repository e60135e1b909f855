import numpy as np
import pytest

from distlasso import (
    CovarianceSpec,
    Dataset,
    InvalidInputError,
    InvalidLossError,
    LossModel,
    SynthConfig,
    average_glm,
    debias,
    distributed_debias,
    logistic_loss,
    make_dataset,
    naive_average,
    solve_l1_mestimator,
    solve_lasso,
    split,
    squared_loss,
    weighted_design,
)
from distlasso.glm import (
    LOSSES,
    default_glm_lambda,
    loss_gradient,
    loss_value,
    mestimator_kkt,
    naive_average_mestimator,
    penalized_objective,
    sigmoid,
)
from distlasso.threshold import default_threshold, hard_threshold


def logistic_problem(seed=0, n=200, p=8, s=2):
    cfg = SynthConfig(
        n=n, p=p, s=s, cov=CovarianceSpec("identity", p), seed=seed, response="logistic"
    )
    return make_dataset(cfg)


class TestLossModels:
    @pytest.mark.parametrize("name", sorted(LOSSES))
    def test_first_derivative_matches_finite_differences(self, name, rng):
        loss = LOSSES[name]()
        y = rng.integers(0, 2, 100).astype(float)
        a = rng.uniform(-4, 4, 100)
        h = 1e-6
        fd = (loss.rho(y, a + h) - loss.rho(y, a - h)) / (2 * h)
        np.testing.assert_allclose(loss.rho_dot(y, a), fd, atol=1e-6)

    @pytest.mark.parametrize("name", sorted(LOSSES))
    def test_second_derivative_matches_finite_differences(self, name, rng):
        loss = LOSSES[name]()
        y = rng.integers(0, 2, 100).astype(float)
        a = rng.uniform(-4, 4, 100)
        h = 1e-6
        fd = (loss.rho_dot(y, a + h) - loss.rho_dot(y, a - h)) / (2 * h)
        np.testing.assert_allclose(loss.rho_ddot(y, a), fd, atol=1e-6)

    @pytest.mark.parametrize("name", sorted(LOSSES))
    def test_convexity_at_evaluation_sites(self, name, rng):
        loss = LOSSES[name]()
        y = rng.integers(0, 2, 200).astype(float)
        a = rng.uniform(-30, 30, 200)
        assert np.all(loss.rho_ddot(y, a) >= 0)

    def test_logistic_curvature_bounded_by_quarter(self, rng):
        loss = logistic_loss()
        a = rng.uniform(-20, 20, 500)
        vals = loss.rho_ddot(np.zeros(500), a)
        assert np.all(vals > 0)
        assert np.all(vals <= 0.25)

    def test_logistic_stable_at_extremes(self):
        loss = logistic_loss()
        y = np.array([0.0, 1.0])
        a = np.array([700.0, -700.0])
        assert np.all(np.isfinite(loss.rho(y, a)))
        assert np.all(np.isfinite(loss.rho_dot(y, a)))

    @pytest.mark.parametrize("name", sorted(LOSSES))
    def test_full_gradient_matches_finite_differences(self, name, rng):
        loss = LOSSES[name]()
        data, _ = logistic_problem(seed=3, n=40, p=5)
        for _ in range(50):
            beta = rng.uniform(-1, 1, 5)
            g = loss_gradient(data, loss, beta)
            fd = np.empty(5)
            h = 1e-6
            for j in range(5):
                e = np.zeros(5)
                e[j] = h
                fd[j] = (loss_value(data, loss, beta + e) - loss_value(data, loss, beta - e)) / (2 * h)
            np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6)


class TestWeightedDesign:
    def test_squared_loss_leaves_design_unchanged(self, rng):
        x = rng.standard_normal((20, 4))
        d = Dataset(x=x, y=rng.standard_normal(20))
        wd = weighted_design(d, np.zeros(4), squared_loss())
        np.testing.assert_array_equal(wd.x_beta, x)
        np.testing.assert_array_equal(wd.weights, np.ones(20))

    def test_logistic_at_zero_halves_rows(self, rng):
        x = rng.standard_normal((15, 3))
        d = Dataset(x=x, y=rng.integers(0, 2, 15).astype(float))
        wd = weighted_design(d, np.zeros(3), logistic_loss())
        np.testing.assert_allclose(wd.weights, 0.5)
        np.testing.assert_allclose(wd.x_beta, 0.5 * x)

    def test_weights_match_finite_difference_curvature(self, rng):
        data, _ = logistic_problem(seed=5, n=30, p=4)
        beta = rng.uniform(-1, 1, 4)
        wd = weighted_design(data, beta, logistic_loss())
        a = data.x @ beta
        h = 1e-5
        loss = logistic_loss()
        fd = (loss.rho_dot(data.y, a + h) - loss.rho_dot(data.y, a - h)) / (2 * h)
        np.testing.assert_allclose(wd.weights, np.sqrt(fd), atol=1e-5)

    def test_negative_curvature_rejected(self, rng):
        bad = LossModel(
            name="concave",
            rho=lambda y, a: -(a**2),
            rho_dot=lambda y, a: -2 * a,
            rho_ddot=lambda y, a: -2 * np.ones_like(a),
        )
        d = Dataset(x=rng.standard_normal((10, 2)), y=np.zeros(10))
        with pytest.raises(InvalidLossError):
            weighted_design(d, np.zeros(2), bad)


class TestSolveMEstimator:
    def test_squared_loss_delegates_to_lasso(self, rng):
        x = rng.standard_normal((40, 6))
        y = x @ np.array([1.0, -1, 0, 0, 0, 0]) + 0.2 * rng.standard_normal(40)
        d = Dataset(x=x, y=y)
        fit_m = solve_l1_mestimator(d, squared_loss(), 0.1)
        fit_l = solve_lasso(d, 0.1)
        np.testing.assert_array_equal(fit_m.beta_hat, fit_l.beta_hat)

    def test_generic_path_agrees_with_lasso(self, rng):
        # a half-squared-error loss without the exact-model flag exercises
        # the full outer loop; it must land on the same optimum
        plain_quadratic = LossModel(
            name="squared_generic",
            rho=lambda y, a: 0.5 * (y - a) ** 2,
            rho_dot=lambda y, a: a - y,
            rho_ddot=lambda y, a: np.ones_like(np.asarray(a, dtype=np.float64)),
        )
        for seed in range(5):
            r = np.random.default_rng(seed)
            x = r.standard_normal((50, 7))
            y = x @ (np.arange(7) < 2).astype(float) + 0.3 * r.standard_normal(50)
            d = Dataset(x=x, y=y)
            fit_m = solve_l1_mestimator(d, plain_quadratic, 0.15)
            fit_l = solve_lasso(d, 0.15)
            np.testing.assert_allclose(fit_m.beta_hat, fit_l.beta_hat, atol=1e-8)

    def test_null_model_at_large_penalty(self):
        data, _ = logistic_problem(seed=2)
        g0 = loss_gradient(data, logistic_loss(), np.zeros(data.p))
        fit = solve_l1_mestimator(data, logistic_loss(), np.abs(g0).max() * 1.01)
        assert np.all(fit.beta_hat == 0.0)

    def test_logistic_1d_matches_grid(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((50, 1))
        prob = sigmoid(1.4 * x[:, 0])
        y = (rng.random(50) < prob).astype(float)
        d = Dataset(x=x, y=y)
        lam = 0.05
        fit = solve_l1_mestimator(d, logistic_loss(), lam)
        grid = np.arange(-5.0, 5.0 + 5e-5, 1e-4)
        a = x[:, 0][:, None] * grid[None, :]
        obj = np.mean(np.logaddexp(0.0, a) - y[:, None] * a, axis=0) + lam * np.abs(grid)
        ref = grid[np.argmin(obj)]
        assert fit.beta_hat[0] == pytest.approx(ref, abs=1e-3)

    def test_logistic_kkt_at_exit(self):
        data, _ = logistic_problem(seed=11, n=300, p=10, s=3)
        lam = default_glm_lambda(300, 10)
        fit = solve_l1_mestimator(data, logistic_loss(), lam)
        assert mestimator_kkt(data, logistic_loss(), fit.beta_hat, lam) <= 1e-7

    def test_objective_never_increased(self):
        # re-run the outer loop manually and confirm monotonicity of the
        # reported optimum versus the trivial start
        data, _ = logistic_problem(seed=13, n=150, p=6, s=2)
        lam = 0.02
        fit = solve_l1_mestimator(data, logistic_loss(), lam)
        start = penalized_objective(data, logistic_loss(), np.zeros(6), lam)
        final = penalized_objective(data, logistic_loss(), fit.beta_hat, lam)
        assert final <= start

    def test_invalid_loss_curvature_rejected(self, rng):
        bad = LossModel(
            name="flat",
            rho=lambda y, a: np.abs(a),
            rho_dot=lambda y, a: np.sign(a),
            rho_ddot=lambda y, a: np.zeros_like(a),
        )
        d = Dataset(x=rng.standard_normal((10, 2)), y=rng.standard_normal(10))
        with pytest.raises(InvalidLossError):
            solve_l1_mestimator(d, bad, 0.1)

    def test_rejects_nonpositive_lambda(self):
        data, _ = logistic_problem()
        with pytest.raises(InvalidInputError):
            solve_l1_mestimator(data, logistic_loss(), -0.1)


class TestAverageGlm:
    def test_squared_loss_reduces_to_linear_protocol(self):
        # the whole two-round pipeline collapses to the linear one
        for seed in range(20):
            cfg = SynthConfig(
                n=240, p=16, s=3, cov=CovarianceSpec("identity", 16),
                sigma_y=0.6, seed=400 + seed,
            )
            data, _ = make_dataset(cfg)
            shards = split(data, 4)
            lam = 0.15
            lin = distributed_debias(shards, lam)
            glm = average_glm(shards, squared_loss(), lam)
            np.testing.assert_allclose(glm.beta, lin.beta, atol=1e-10)
            assert glm.ledger == lin.ledger

    def test_single_machine_squared_with_exact_inverse_is_ols(self, rng):
        x = rng.standard_normal((120, 10))
        y = x @ (np.arange(10) < 2).astype(float) + 0.4 * rng.standard_normal(120)
        d = Dataset(x=x, y=y)
        fit = solve_lasso(d, 0.05)
        theta = np.linalg.inv(x.T @ x / 120)
        ols = np.linalg.solve(x.T @ x, x.T @ y)
        np.testing.assert_allclose(debias(fit, theta, d).beta_d, ols, atol=1e-8)

    def test_ledger_matches_two_round_form(self):
        data, truth = logistic_problem(seed=6, n=160, p=20, s=2)
        agg = average_glm(split(data, 4), logistic_loss(), 0.05)
        assert agg.ledger.rounds == 2
        assert agg.ledger.floats_up == 2 * 4 * 20 + 20
        assert agg.ledger.floats_down == 2 * 4 * 20
        assert agg.variant == "distributed_debias"

    def test_naive_mestimator_average_matches_linear_for_squared(self):
        cfg = SynthConfig(
            n=120, p=10, s=2, cov=CovarianceSpec("identity", 10), sigma_y=0.5, seed=17
        )
        data, _ = make_dataset(cfg)
        shards = split(data, 3)
        a = naive_average_mestimator(shards, squared_loss(), 0.1)
        b = naive_average(shards, 0.1)
        np.testing.assert_array_equal(a.beta, b.beta)
        assert a.ledger == b.ledger

    def test_logistic_debias_beats_naive_average(self):
        # thresholded two-round aggregate against plain averaging
        p, n, s, m = 40, 150, 3, 3
        thr_errs, naive_errs = [], []
        for seed in range(6):
            cfg = SynthConfig(
                n=m * n, p=p, s=s, cov=CovarianceSpec("identity", p),
                seed=700 + seed, response="logistic",
            )
            data, truth = make_dataset(cfg)
            shards = split(data, m)
            lam = default_glm_lambda(n, p)
            agg = average_glm(shards, logistic_loss(), lam)
            naive = naive_average_mestimator(shards, logistic_loss(), lam)
            t = default_threshold(m * n, p, 0.5)
            thr = hard_threshold(agg.beta, t)
            thr_errs.append(np.abs(thr - truth.beta_star).max())
            naive_errs.append(np.abs(naive.beta - truth.beta_star).max())
        assert np.mean(thr_errs) <= np.mean(naive_errs)

    def test_m_above_p_rejected(self):
        data, _ = logistic_problem(n=30, p=3)
        with pytest.raises(InvalidInputError):
            average_glm(split(data, 5), logistic_loss(), 0.1)
