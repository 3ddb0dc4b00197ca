"""Dirichlet and multivariate normal primitives.

Includes the mean/precision Dirichlet fit used by the MLE baseline: the mean
is fixed to the sample mean and only the (log) precision is optimized with
ADAM.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, xlogy

from ._validation import check_generator, check_prob_vectors

MEAN_CLIP = 1e-6
PRECISION_MAX = 1e6


class BoundaryError(ValueError):
    """The Dirichlet density is unbounded at the requested boundary point."""


class PrecisionCapWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DirichletParams:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if alpha.ndim != 1 or alpha.size < 2 or not np.all(alpha > 0):
            raise ValueError(f"alpha must be a vector of >= 2 positive values, got {alpha}")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class DirichletMeanPrecision:
    mean: np.ndarray
    precision: float
    capped: bool = False
    n_iter: int = 0

    @property
    def alpha(self):
        return self.precision * self.mean

    def to_params(self):
        return DirichletParams(self.alpha)


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iter: int = 10_000
    tol: float = 1e-6


@dataclass(frozen=True)
class MvnParams:
    mu: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (mu.size, mu.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean of length {mu.size}")
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0):
            raise ValueError("cov must be symmetric")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)


def dirichlet_sample(params, rng=None, size=None):
    """Draw from Dirichlet(alpha) by normalizing independent Gamma draws.

    ``size`` follows numpy conventions; the class axis is appended last.
    """
    rng = check_generator(rng)
    alpha = params.alpha if isinstance(params, DirichletParams) else DirichletParams(params).alpha
    shape = (() if size is None else tuple(np.atleast_1d(size))) + alpha.shape
    g = rng.standard_gamma(np.broadcast_to(alpha, shape))
    total = g.sum(axis=-1, keepdims=True)
    # all-zero rows need every component to underflow; redraw them
    zero = total[..., 0] == 0
    while np.any(zero):
        g[zero] = rng.standard_gamma(np.broadcast_to(alpha, g[zero].shape))
        total = g.sum(axis=-1, keepdims=True)
        zero = total[..., 0] == 0
    return g / total


def dirichlet_log_pdf(params, p, on_boundary="raise"):
    """Log density of Dirichlet(alpha) at ``p`` (one vector or rows).

    On the boundary the density is infinite where a zero component has
    ``alpha < 1``. With ``on_boundary="raise"`` that case raises
    :class:`BoundaryError`; with ``"inf"`` the IEEE value is returned
    (``+inf``, or ``-inf`` where the density vanishes).
    """
    alpha = params.alpha if isinstance(params, DirichletParams) else DirichletParams(params).alpha
    p = np.asarray(p, dtype=np.float64)
    norm = gammaln(alpha.sum()) - gammaln(alpha).sum()
    with np.errstate(divide="ignore"):
        val = norm + xlogy(alpha - 1.0, p).sum(axis=-1)
    if on_boundary == "raise" and np.any(val == np.inf):
        raise BoundaryError("Dirichlet density is unbounded at a boundary point with alpha < 1")
    if on_boundary not in ("raise", "inf"):
        raise ValueError(f"on_boundary must be 'raise' or 'inf', got {on_boundary!r}")
    return float(val) if val.ndim == 0 else val


def _precision_objective(log_precision, mean, mean_log_p):
    """Mean log-likelihood and its derivative with respect to log precision."""
    a = math.exp(log_precision)
    am = a * mean
    value = gammaln(a) - gammaln(am).sum() + ((am - 1.0) * mean_log_p).sum()
    dvalue_da = digamma(a) - (mean * digamma(am)).sum() + (mean * mean_log_p).sum()
    return float(value), float(a * dvalue_da)


def fit_dirichlet_mean_precision(
    data, adam=None, precision_max=PRECISION_MAX, init_precision=1.0, return_trace=False
):
    """Fit a mean/precision Dirichlet to the rows of ``data``.

    The mean is the sample mean (clipped to ``[1e-6, 1 - 1e-6]`` and
    renormalized) and stays fixed. The log precision is found with ADAM on
    the mean log-likelihood, stopping when the gradient magnitude drops
    below ``adam.tol``. If the precision would exceed ``precision_max`` the
    data are treated as degenerate: the precision is capped and a
    :class:`PrecisionCapWarning` is issued.
    """
    adam = adam or AdamConfig()
    data = check_prob_vectors(data, name="data", ensure_min_samples=2)
    mean = np.clip(data.mean(axis=0), MEAN_CLIP, 1.0 - MEAN_CLIP)
    mean /= mean.sum()
    # zero components would make the likelihood improper; floor them
    mean_log_p = np.log(np.clip(data, np.finfo(float).tiny, None)).mean(axis=0)

    s = math.log(init_precision)
    s_max = math.log(precision_max)
    m = v = 0.0
    trace = []
    capped = False
    n_iter = 0
    for t in range(1, adam.max_iter + 1):
        value, grad = _precision_objective(s, mean, mean_log_p)
        trace.append(value)
        n_iter = t
        if abs(grad) < adam.tol:
            break
        # ascent on the log-likelihood
        m = adam.beta1 * m + (1 - adam.beta1) * grad
        v = adam.beta2 * v + (1 - adam.beta2) * grad * grad
        m_hat = m / (1 - adam.beta1**t)
        v_hat = v / (1 - adam.beta2**t)
        s += adam.learning_rate * m_hat / (math.sqrt(v_hat) + adam.eps)
        if s >= s_max:
            s = s_max
            capped = True
            break
    if capped:
        warnings.warn(
            f"precision reached the cap {precision_max:g}; data look degenerate",
            PrecisionCapWarning,
            stacklevel=2,
        )
    precision = precision_max if capped else math.exp(s)
    fit = DirichletMeanPrecision(mean=mean, precision=precision, capped=capped, n_iter=n_iter)
    if return_trace:
        return fit, np.asarray(trace)
    return fit


def _cholesky_jittered(cov):
    d = cov.shape[0]
    if not np.any(cov):
        return np.zeros_like(cov)
    scale = max(np.trace(cov) / d, np.finfo(float).tiny)
    jitter = 0.0
    for level in [0.0] + [1e-12 * 10**i for i in range(7)]:
        jitter = level * scale
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(
        f"covariance is not positive semidefinite even with jitter {jitter:g}"
    )


def mvn_cholesky(params):
    """Lower Cholesky factor of ``params.cov`` with escalating diagonal jitter.

    Jitter starts at ``1e-12 * trace / D`` and grows tenfold up to
    ``1e-6 * trace / D`` before giving up.
    """
    return _cholesky_jittered(params.cov)


def mvn_sample(params, rng=None, size=None, chol=None):
    rng = check_generator(rng)
    chol = mvn_cholesky(params) if chol is None else chol
    shape = (() if size is None else tuple(np.atleast_1d(size))) + params.mu.shape
    z = rng.standard_normal(shape)
    return params.mu + z @ chol.T


def estimate_mean_cov(data, zero_mean=False):
    """Unbiased mean and covariance (n - 1 denominator) of the rows of ``data``.

    With ``zero_mean`` the mean is fixed at zero and the covariance is the
    second moment about zero, still divided by ``n - 1``.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"data must be 2-D, got shape {data.shape}")
    n = data.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 observations to estimate a covariance, got {n}")
    if zero_mean:
        mu = np.zeros(data.shape[1])
    else:
        mu = data.mean(axis=0)
    centered = data - mu
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return MvnParams(mu=mu, cov=cov)
