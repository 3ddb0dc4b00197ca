"""Bayesian neural network evaluator sampled with HMC.

Architecture, for labels ``y`` with K classes and H hidden units::

    z = rotate(y)                 # K -> K-1 hull coordinates
    h = sigmoid(z @ W1 + b1)      # W1: (K-1, H)
    u = h @ W2 + b2               # W2: (H, K-1)
    out = softmax(unrotate(u))    # K-1 -> K, then softmax

The weights get a flat prior and the likelihood is an isotropic Gaussian
with variance ``sigma2`` on ``out - y_hat`` in the full K-space.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit
from sklearn.utils.validation import check_is_fitted

from .._validation import DimensionError
from ..hmc import (
    HmcConfig,
    InsufficientDrawsError,
    draw_samples,
    required_length,
    run_chains,
)
from ..simplex import build_rotation
from .base import DEFAULT_DRAWS, BaseEvaluator


@dataclass(frozen=True)
class BnnConfig:
    k: int
    hidden_units: int | None = None
    sigma2: float = 0.1
    weight_bound: float | None = None

    def __post_init__(self):
        if self.k < 2:
            raise DimensionError("k must be >= 2")
        if self.hidden_units is None:
            object.__setattr__(self, "hidden_units", self.k - 1)
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def n_params(self):
        d, h = self.k - 1, self.hidden_units
        return d * h + h + h * d + d

    def unpack(self, psi):
        """Split the flat parameter vector into (W1, b1, W2, b2) views."""
        psi = np.asarray(psi, dtype=np.float64)
        if psi.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got shape {psi.shape}")
        d, h = self.k - 1, self.hidden_units
        i = 0
        w1 = psi[i : i + d * h].reshape(d, h)
        i += d * h
        b1 = psi[i : i + h]
        i += h
        w2 = psi[i : i + h * d].reshape(h, d)
        i += h * d
        b2 = psi[i:]
        return w1, b1, w2, b2


class _Network:
    """Forward and backward passes with the rotation precomputed."""

    def __init__(self, cfg):
        self.cfg = cfg
        rot = build_rotation(cfg.k)
        self.rot = rot
        self.basis = rot.basis_
        self.shift = rot.offset_ * rot.q_[:, -1] + rot.anchor_

    def reduce(self, Y):
        return (np.asarray(Y, dtype=np.float64) - self.rot.anchor_) @ self.basis

    def forward(self, psi, Z):
        w1, b1, w2, b2 = self.cfg.unpack(psi)
        h = expit(Z @ w1 + b1)
        v = (h @ w2 + b2) @ self.basis.T + self.shift
        v -= v.max(axis=-1, keepdims=True)
        e = np.exp(v)
        return e / e.sum(axis=-1, keepdims=True), h

    def value_and_grad(self, psi, Z, Yhat):
        cfg = self.cfg
        w1, b1, w2, b2 = cfg.unpack(psi)
        out, h = self.forward(psi, Z)
        resid = out - Yhat
        n, k = Yhat.shape
        value = -0.5 * np.sum(resid * resid) / cfg.sigma2 - 0.5 * n * k * math.log(
            2 * math.pi * cfg.sigma2
        )
        g_out = -resid / cfg.sigma2
        g_v = out * (g_out - np.sum(g_out * out, axis=1, keepdims=True))
        g_u = g_v @ self.basis
        g_a = (g_u @ w2.T) * h * (1.0 - h)
        grad = np.concatenate(
            [(Z.T @ g_a).ravel(), g_a.sum(axis=0), (h.T @ g_u).ravel(), g_u.sum(axis=0)]
        )
        return value, grad


def bnn_forward(cfg, psi, y):
    """Network output for one label of shape (K,) or many of shape (N, K)."""
    net = _Network(cfg)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != cfg.k:
        raise DimensionError(f"labels have {y.shape[-1]} classes, network expects {cfg.k}")
    out, _ = net.forward(psi, net.reduce(y))
    return out


class BnnLogTarget:
    """Log posterior (flat prior) over the weights for one dataset.

    The last evaluated point is cached per thread so the HMC engine's paired
    ``logp``/``grad`` calls at a proposal cost one pass.
    """

    def __init__(self, cfg, labels, predictions):
        self.cfg = cfg
        self.net = _Network(cfg)
        labels = np.asarray(labels, dtype=np.float64)
        self.predictions = np.asarray(predictions, dtype=np.float64)
        if labels.shape != self.predictions.shape or labels.shape[-1] != cfg.k:
            raise DimensionError("labels and predictions must both have shape (N, k)")
        if labels.shape[0] < 1:
            raise ValueError("the dataset must not be empty")
        self.Z = self.net.reduce(labels)
        self._local = threading.local()

    def _evaluate(self, psi):
        psi = np.asarray(psi, dtype=np.float64)
        key = psi.tobytes()
        local = self._local
        if getattr(local, "key", None) != key:
            bound = self.cfg.weight_bound
            if bound is not None and np.any(np.abs(psi) > bound):
                local.value = (-np.inf, np.zeros_like(psi))
            else:
                local.value = self.net.value_and_grad(psi, self.Z, self.predictions)
            local.key = key
        return local.value

    def logp(self, psi):
        return self._evaluate(psi)[0]

    def grad(self, psi):
        return self._evaluate(psi)[1]

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_local"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._local = threading.local()


def log_target(cfg, psi, labels, predictions):
    """Sum of Gaussian log-likelihoods of the residuals; the flat prior adds 0."""
    return BnnLogTarget(cfg, labels, predictions).logp(psi)


def grad_log_target(cfg, psi, labels, predictions):
    """Analytic gradient of :func:`log_target` with respect to ``psi``."""
    return BnnLogTarget(cfg, labels, predictions).grad(psi)


def _uniform_init(cfg):
    def init(rng):
        return rng.uniform(-0.5, 0.5, cfg.n_params)

    return init


def bnn_fit(cfg, labels, predictions, hmc_config=None, rng=None, n_draws=DEFAULT_DRAWS):
    """Run HMC chains on the BNN posterior until they converge.

    Returns the :class:`~simplex_eval.hmc.HmcResult`, with chains extended
    far enough to supply ``n_draws`` thinned weight sets. Raises
    :class:`~simplex_eval.hmc.ConvergenceError` (diagnostics include the
    last window of every log-target trace) when the budget runs out.
    """
    hmc_config = hmc_config or HmcConfig()
    target = BnnLogTarget(cfg, labels, predictions)
    return run_chains(target.logp, target.grad, hmc_config, _uniform_init(cfg), rng, n_draws=n_draws)


def bnn_sample(cfg, fitted, labels, n_draws):
    """Feed every label through ``n_draws`` posterior weight sets.

    ``fitted`` is an :class:`~simplex_eval.hmc.HmcResult` or an array of
    weight sets of shape (n_sets, n_params). No likelihood noise is added.
    """
    if isinstance(fitted, np.ndarray):
        if fitted.shape[0] < n_draws:
            raise InsufficientDrawsError(
                f"{n_draws} draws requested but only {fitted.shape[0]} weight sets are stored",
                n_draws,
            )
        weights = fitted[:n_draws]
    else:
        weights = draw_samples(fitted.chains, fitted.burn_in, fitted.lag, n_draws)
    net = _Network(cfg)
    Z = net.reduce(labels)
    out = np.empty((Z.shape[0], n_draws, cfg.k))
    for b, psi in enumerate(weights):
        out[:, b, :], _ = net.forward(psi, Z)
    return out


class BNNEvaluator(BaseEvaluator):
    """Two-dense-layer BNN with a flat weight prior, fitted by HMC.

    Parameters
    ----------
    hidden_units : int, optional
        Width of the hidden layer; defaults to K - 1.
    sigma2 : float
        Likelihood variance, the lower bound on the evaluator's spread.
    hmc : HmcConfig, optional
        Sampler settings. Its ``seed`` is replaced by ``random_state`` when
        the latter is given.
    n_draws : int
        Weight sets kept after fitting and the default draw count.
    weight_bound : float, optional
        Box bound on every weight, making the prior proper. Off by default.

    Attributes
    ----------
    weights_ : ndarray of shape (n_draws, n_params)
        Thinned posterior weight sets, round-robin over chains.
    diagnostics_ : dict
        Convergence record from the HMC engine.
    """

    def __init__(
        self,
        hidden_units=None,
        sigma2=0.1,
        hmc=None,
        n_draws=DEFAULT_DRAWS,
        weight_bound=None,
        random_state=None,
    ):
        self.hidden_units = hidden_units
        self.sigma2 = sigma2
        self.hmc = hmc
        self.n_draws = n_draws
        self.weight_bound = weight_bound
        self.random_state = random_state

    def _config(self, k):
        return BnnConfig(k, self.hidden_units, self.sigma2, self.weight_bound)

    def fit(self, X, y):
        X, y = self._check_fit_data(X, y, min_samples=1)
        cfg = self._config(X.shape[1])
        hmc = self.hmc or HmcConfig()
        if self.random_state is not None:
            hmc = replace(hmc, seed=self.random_state)
        result = bnn_fit(cfg, X, y, hmc, hmc.seed, self.n_draws)
        self.config_ = cfg
        self.weights_ = draw_samples(result.chains, result.burn_in, result.lag, self.n_draws)
        self.diagnostics_ = result.diagnostics
        self.lag_ = result.lag
        self.burn_in_ = result.burn_in
        return self

    def required_chain_length(self, n_draws):
        check_is_fitted(self, "weights_")
        return required_length(self.burn_in_, self.lag_, n_draws, len(self.diagnostics_["step_sizes"]))

    def _sample(self, X, n_draws, random_state):
        if n_draws > self.weights_.shape[0]:
            need = self.required_chain_length(n_draws)
            raise InsufficientDrawsError(
                f"{n_draws} draws requested but the fit kept {self.weights_.shape[0]}; "
                f"refit with n_draws >= {n_draws} (chains of length {need})",
                need,
            )
        return bnn_sample(self.config_, self.weights_, X, n_draws)

    def mean_function(self, X):
        """Network output averaged over the stored weight sets."""
        check_is_fitted(self, "weights_")
        return bnn_sample(self.config_, self.weights_, X, self.weights_.shape[0]).mean(axis=1)
