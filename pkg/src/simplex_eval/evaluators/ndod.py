"""Normal distribution over the differences (NDoD).

Differences between prediction and label are modeled as a multivariate
normal in the reduced simplex coordinates. Draws that leave the simplex are
rejected and redrawn.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .._validation import SIMPLEX_TOL, simplex_mask, spawn_generators, worker_count
from ..distributions import MvnParams, estimate_mean_cov, mvn_cholesky
from ..simplex import build_rotation
from .base import DEFAULT_DRAWS, BaseEvaluator


class ResamplingTimeoutError(RuntimeError):
    """A label could not produce an in-simplex draw within the attempt cap."""

    def __init__(self, message, label_index):
        super().__init__(message)
        self.label_index = label_index


@dataclass(frozen=True)
class NDoDParams:
    mu: np.ndarray
    cov: np.ndarray
    zero_mean: bool = False
    max_attempts: int = 10_000

    def __post_init__(self):
        MvnParams(self.mu, self.cov)
        if self.zero_mean and np.any(self.mu != 0):
            raise ValueError("zero-mean NDoD requires mu == 0")


def ndod_fit(labels, predictions, zero_mean=False, max_attempts=10_000):
    """Estimate the NDoD parameters from paired labels and predictions."""
    labels = np.asarray(labels, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    rot = build_rotation(labels.shape[1])
    diffs = rot.transform(predictions) - rot.transform(labels)
    est = estimate_mean_cov(diffs, zero_mean=zero_mean)
    return NDoDParams(est.mu, est.cov, zero_mean, max_attempts)


def _sample_label(index, label, rot, mu, chol, n_draws, rng, max_attempts, tol):
    k = label.size
    out = np.empty((n_draws, k))
    z0 = rot.transform(label) + mu
    pending = np.arange(n_draws)
    attempts = 0
    while pending.size:
        attempts += 1
        if attempts > max_attempts:
            raise ResamplingTimeoutError(
                f"label {index} ({label}) produced no valid draw for "
                f"{pending.size} slots after {max_attempts} attempts",
                index,
            )
        z = z0 + rng.standard_normal((pending.size, k - 1)) @ chol.T
        v = rot.inverse_transform(z)
        ok = simplex_mask(v, tol)
        out[pending[ok]] = v[ok]
        pending = pending[~ok]
    # accepted draws may sit up to tol outside; pull them onto the simplex
    np.clip(out, 0.0, None, out=out)
    out /= out.sum(axis=1, keepdims=True)
    return out


def ndod_sample(params, labels, n_draws, random_state=None, tol=SIMPLEX_TOL):
    """Rejection-sample ``n_draws`` predictions for every label.

    Each label uses its own random stream derived from ``random_state`` and
    its index, so the output does not depend on how labels are split
    across worker threads.
    """
    labels = np.asarray(labels, dtype=np.float64)
    n, k = labels.shape
    if not np.any(params.cov) and not np.any(params.mu):
        return np.repeat(labels[:, None, :], n_draws, axis=1)
    rot = build_rotation(k)
    chol = mvn_cholesky(MvnParams(params.mu, params.cov))
    streams = spawn_generators(random_state, n)

    def one(i):
        return _sample_label(
            i, labels[i], rot, params.mu, chol, n_draws, streams[i], params.max_attempts, tol
        )

    workers = worker_count(n)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, range(n)))
    else:
        parts = [one(i) for i in range(n)]
    return np.stack(parts)


class NDoDEvaluator(BaseEvaluator):
    """Label plus a Gaussian difference, resampled to stay in the simplex.

    Parameters
    ----------
    zero_mean : bool
        Fix the mean difference at zero; the covariance then becomes the
        second moment of the differences about zero.
    max_attempts : int
        Resampling rounds allowed per draw before
        :class:`ResamplingTimeoutError` is raised.
    """

    def __init__(self, zero_mean=False, max_attempts=10_000, n_draws=DEFAULT_DRAWS, random_state=None):
        self.zero_mean = zero_mean
        self.max_attempts = max_attempts
        self.n_draws = n_draws
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._check_fit_data(X, y)
        self.params_ = ndod_fit(X, y, self.zero_mean, self.max_attempts)
        return self

    @property
    def mean_(self):
        check_is_fitted(self, "params_")
        return self.params_.mu

    @property
    def covariance_(self):
        check_is_fitted(self, "params_")
        return self.params_.cov

    def _sample(self, X, n_draws, random_state):
        return ndod_sample(self.params_, X, n_draws, random_state)
