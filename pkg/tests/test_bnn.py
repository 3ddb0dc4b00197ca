import math
import pickle

import numpy as np
import pytest
from scipy.optimize import minimize

from simplex_eval._validation import DimensionError
from simplex_eval.evaluators import (
    BnnConfig,
    BnnLogTarget,
    BNNEvaluator,
    PerSplitEvaluator,
    bnn_fit,
    bnn_forward,
    bnn_sample,
    grad_log_target,
    log_target,
)
from simplex_eval.hmc import HmcConfig, InsufficientDrawsError

GRID = [(3, 2), (3, 4), (3, 5), (5, 2), (5, 4), (5, 5)]
QUICK = HmcConfig(n_chains=2, n_adapt=1000, convergence_window=10_000, check_interval=1000,
                  max_iterations=60_000, seed=0)


def dataset(rng, n, k, noise=0.05):
    y = rng.dirichlet(np.full(k, 3.0), n)
    yhat = y + rng.normal(0, noise, (n, k))
    yhat = np.abs(yhat)
    return y, yhat / yhat.sum(1, keepdims=True)


class TestConfig:
    @pytest.mark.parametrize("k,h", GRID)
    def test_param_count(self, k, h):
        cfg = BnnConfig(k, h)
        assert cfg.n_params == 2 * (k - 1) * h + h + (k - 1)
        parts = cfg.unpack(np.arange(cfg.n_params, dtype=float))
        assert [p.shape for p in parts] == [(k - 1, h), (h,), (h, k - 1), (k - 1,)]

    def test_defaults(self):
        cfg = BnnConfig(4)
        assert cfg.hidden_units == 3 and cfg.sigma2 == 0.1

    def test_invalid(self):
        with pytest.raises(ValueError):
            BnnConfig(3, 2, sigma2=0.0)
        with pytest.raises(DimensionError):
            BnnConfig(3, 2).unpack(np.zeros(3))


class TestForward:
    def test_zero_weights(self):
        out = bnn_forward(BnnConfig(3, 2), np.zeros(BnnConfig(3, 2).n_params), [0.2, 0.3, 0.5])
        e = math.e
        np.testing.assert_allclose(out, [e / (e + 2), 1 / (e + 2), 1 / (e + 2)], atol=1e-12)
        np.testing.assert_allclose(out, [0.5761, 0.2119, 0.2119], atol=1e-4)

    def test_normalized_positive_deterministic(self, rng):
        cfg = BnnConfig(5, 4)
        psi = rng.normal(0, 3, cfg.n_params)
        y = rng.dirichlet(np.ones(5), 100)
        a, b = bnn_forward(cfg, psi, y), bnn_forward(cfg, psi, y)
        np.testing.assert_array_equal(a, b)
        assert np.all(a > 0)
        assert np.max(np.abs(a.sum(1) - 1)) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            bnn_forward(BnnConfig(3), np.zeros(BnnConfig(3).n_params), [0.5, 0.5])


class TestLogTarget:
    def test_at_mode(self, rng):
        cfg = BnnConfig(3, 2, sigma2=0.01)
        psi = rng.normal(size=cfg.n_params)
        y = np.array([[0.2, 0.3, 0.5]])
        yhat = bnn_forward(cfg, psi, y)
        assert log_target(cfg, psi, y, yhat) == pytest.approx(-1.5 * math.log(2 * math.pi * 0.01))

    def test_explicit_likelihood(self, rng):
        cfg = BnnConfig(4, 3, sigma2=0.2)
        psi = rng.normal(size=cfg.n_params)
        y, yhat = dataset(rng, 30, 4)
        r = bnn_forward(cfg, psi, y) - yhat
        expected = np.sum(-0.5 * r**2 / 0.2 - 0.5 * math.log(2 * math.pi * 0.2))
        assert log_target(cfg, psi, y, yhat) == pytest.approx(expected, rel=1e-12)

    def test_sum_over_pairs(self, rng):
        cfg = BnnConfig(3, 2)
        psi = rng.normal(size=cfg.n_params)
        y, yhat = dataset(rng, 20, 3)
        one = log_target(cfg, psi, y, yhat)
        two = log_target(cfg, psi, np.vstack([y, y]), np.vstack([yhat, yhat]))
        assert two == pytest.approx(2 * one, rel=1e-12)

    def test_sigma_monotone_for_large_mismatch(self, rng):
        psi = np.zeros(BnnConfig(3, 2).n_params)
        y = np.array([[0.0, 0.0, 1.0]] * 5)
        vals = [log_target(BnnConfig(3, 2, sigma2=s), psi, y, y) for s in (0.05, 0.01, 0.001)]
        assert vals[0] > vals[1] > vals[2]

    def test_weight_bound(self):
        cfg = BnnConfig(3, 2, weight_bound=1.0)
        t = BnnLogTarget(cfg, np.full((1, 3), 1 / 3), np.full((1, 3), 1 / 3))
        psi = np.zeros(cfg.n_params)
        assert np.isfinite(t.logp(psi))
        psi[0] = 1.5
        assert t.logp(psi) == -np.inf


def finite_difference(f, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestGradient:
    def test_finite_differences(self, rng):
        for trial in range(20):
            k, h = GRID[trial % len(GRID)]
            cfg = BnnConfig(k, h, sigma2=float(rng.choice([0.1, 1e-3])))
            y, yhat = dataset(rng, 25, k)
            psi = rng.normal(0, 1, cfg.n_params)
            t = BnnLogTarget(cfg, y, yhat)
            fd = finite_difference(t.logp, psi)
            g = grad_log_target(cfg, psi, y, yhat)
            assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)

    def test_zero_at_local_maximum(self, rng):
        # near-identity data put the flat-prior maximum at infinite weights;
        # data from a saturating teacher network have a finite mode
        cfg = BnnConfig(3, 2, sigma2=0.1)
        teacher = np.array([6.0, -2, -4, 5, 1, -1.5, 3, -2, -1, 2.5, 0.5, -0.3])
        y = rng.dirichlet(np.ones(3), 200)
        yhat = bnn_forward(cfg, teacher, y) + rng.normal(0, 1e-3, (200, 3)) @ (np.eye(3) - 1 / 3)
        t = BnnLogTarget(cfg, y, yhat)
        res = minimize(lambda p: -t.logp(p), teacher + rng.normal(0, 0.3, cfg.n_params),
                       jac=lambda p: -t.grad(p), method="BFGS", options={"gtol": 1e-9, "maxiter": 5000})
        x = res.x
        for _ in range(5):
            # Newton polish with a finite-difference Hessian of the analytic gradient
            hess = np.column_stack([
                (t.grad(x + e) - t.grad(x - e)) / 2e-6 for e in 1e-6 * np.eye(x.size)
            ])
            x = x - np.linalg.solve(0.5 * (hess + hess.T), t.grad(x))
        assert np.all(np.linalg.eigvalsh(0.5 * (hess + hess.T)) < 0)
        assert np.linalg.norm(t.grad(x)) < 1e-6

    def test_pickle_and_threads_cache(self, rng):
        cfg = BnnConfig(3, 2)
        y, yhat = dataset(rng, 10, 3)
        t = pickle.loads(pickle.dumps(BnnLogTarget(cfg, y, yhat)))
        psi = rng.normal(size=cfg.n_params)
        np.testing.assert_array_equal(t.grad(psi), grad_log_target(cfg, psi, y, yhat))


class TestFitSample:
    def test_repeated_pair_concentrates(self):
        y = np.tile([0.2, 0.3, 0.5], (50, 1))
        yhat = np.tile([0.25, 0.3, 0.45], (50, 1))
        cfg = BnnConfig(3, 2, sigma2=0.01)
        res = bnn_fit(cfg, y, yhat, QUICK, n_draws=200)
        assert res.diagnostics["converged"]
        out = bnn_sample(cfg, res, y[:3], 200)
        assert out.shape == (3, 200, 3)
        np.testing.assert_allclose(out.mean(1), yhat[:3], atol=0.01)
        assert np.all(out > 0)

    def test_same_seed_identical(self):
        y = np.tile([0.2, 0.3, 0.5], (20, 1))
        cfg = BnnConfig(3, 1, sigma2=0.01)
        a = bnn_fit(cfg, y, y, QUICK, n_draws=10)
        b = bnn_fit(cfg, y, y, QUICK, n_draws=10)
        for ca, cb in zip(a.chains, b.chains):
            assert ca.logp_trace == cb.logp_trace

    def test_evaluator_and_insufficient_draws(self):
        y = np.tile([0.2, 0.3, 0.5], (30, 1))
        est = BNNEvaluator(hidden_units=1, sigma2=0.01, hmc=QUICK, n_draws=50, random_state=2)
        est.fit(y, y)
        assert est.weights_.shape == (50, est.config_.n_params)
        assert est.sample(y[:2]).shape == (2, 50, 3)
        with pytest.raises(InsufficientDrawsError) as info:
            est.sample(y[:2], n_draws=51)
        assert info.value.required_length == est.required_chain_length(51)

    def test_per_split_states_independent(self):
        y = np.tile([0.2, 0.3, 0.5], (40, 1))
        yhat = np.vstack([np.tile([0.2, 0.3, 0.5], (20, 1)), np.tile([0.3, 0.3, 0.4], (20, 1))])
        splits = np.array(["train"] * 20 + ["test"] * 20)
        est = PerSplitEvaluator(BNNEvaluator(hidden_units=1, sigma2=0.01, hmc=QUICK, n_draws=20))
        est.fit(y, yhat, splits)
        tr, te = est.estimators_["train"], est.estimators_["test"]
        assert tr is not te and not np.shares_memory(tr.weights_, te.weights_)
        m = est.sample(y, splits).mean(1)
        np.testing.assert_allclose(m[:20], yhat[:20], atol=0.02)
        np.testing.assert_allclose(m[20:], yhat[20:], atol=0.02)
