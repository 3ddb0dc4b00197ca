"""Common estimator interface for Bayesian evaluators of P(Y_hat | Y).

Evaluators follow the scikit-learn convention with the human-frequency
labels as ``X`` and the predictor's outputs as ``y``: ``fit(X, y)`` learns
a generative model of predictions given labels and ``sample(X, n_draws)``
returns a tensor of shape ``(n_samples, n_draws, n_classes)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .._validation import DimensionError, check_prob_vectors, simplex_mask

DEFAULT_DRAWS = 14_000


@dataclass
class EvaluatorSamples:
    """Draws of predictions for N labels: ``data`` has shape (N, B, K)."""

    data: np.ndarray
    sample_ids: list = field(default=None)
    split_tag: str = "combined"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or 0 in self.data.shape[:2]:
            raise DimensionError(f"samples must have shape (N>=1, B>=1, K), got {self.data.shape}")
        if self.sample_ids is None:
            self.sample_ids = [str(i) for i in range(self.data.shape[0])]
        if len(self.sample_ids) != self.data.shape[0]:
            raise DimensionError("one sample id is needed per label")

    @property
    def shape(self):
        return self.data.shape

    def validate(self, tol=1e-6):
        if not np.all(simplex_mask(self.data, tol)):
            raise ValueError("evaluator samples contain vectors outside the simplex")
        return self


def as_sample_array(samples):
    if isinstance(samples, EvaluatorSamples):
        return samples.data
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"samples must have shape (N, B, K), got {arr.shape}")
    return arr


class BaseEvaluator(BaseEstimator):
    """Shared validation and defaults; subclasses implement ``_sample``."""

    def _check_fit_data(self, X, y, min_samples=2):
        X = check_prob_vectors(X, name="X", ensure_min_samples=min_samples, renormalize=True)
        y = check_prob_vectors(
            y, name="y", n_classes=X.shape[1], ensure_min_samples=min_samples, renormalize=True
        )
        if X.shape[0] != y.shape[0]:
            raise DimensionError(
                f"X and y have different numbers of samples: {X.shape[0]} != {y.shape[0]}"
            )
        self.n_classes_ = X.shape[1]
        self.n_features_in_ = X.shape[1]
        return X, y

    def sample(self, X, n_draws=None, random_state=None):
        """Draw predictions for each label in ``X``.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_classes)
            Labels to condition on.
        n_draws : int, optional
            Draws per label; defaults to the estimator's ``n_draws``.
        random_state : int, Generator, optional
            Overrides the estimator's ``random_state`` for this call.

        Returns
        -------
        ndarray of shape (n_samples, n_draws, n_classes)
        """
        check_is_fitted(self, "n_classes_")
        X = check_prob_vectors(X, name="X", n_classes=self.n_classes_, renormalize=True)
        n_draws = self.n_draws if n_draws is None else int(n_draws)
        if n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        rs = self.random_state if random_state is None else random_state
        return self._sample(X, n_draws, rs)

    def predict(self, X):
        """Mean of the sampled predictions for each label."""
        return self.sample(X).mean(axis=1)


class PerSplitEvaluator(BaseEstimator):
    """One independent clone of ``estimator`` per data split.

    Useful when train and test predictions may follow different conditional
    distributions (e.g. an overfit predictor).
    """

    def __init__(self, estimator):
        self.estimator = estimator

    def fit(self, X, y, splits):
        splits = np.asarray(splits)
        if splits.shape[0] != np.shape(X)[0]:
            raise DimensionError("one split tag is needed per sample")
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.estimators_ = {}
        for tag in sorted(set(splits.tolist())):
            mask = splits == tag
            self.estimators_[tag] = clone(self.estimator).fit(X[mask], y[mask])
        return self

    def sample(self, X, splits, n_draws=None, random_state=None):
        check_is_fitted(self, "estimators_")
        X = np.asarray(X, dtype=np.float64)
        splits = np.asarray(splits)
        parts = {}
        for tag in sorted(set(splits.tolist())):
            if tag not in self.estimators_:
                raise KeyError(f"no evaluator was fitted for split {tag!r}")
            mask = splits == tag
            parts[tag] = (mask, self.estimators_[tag].sample(X[mask], n_draws, random_state))
        b = next(iter(parts.values()))[1].shape[1]
        out = np.empty((X.shape[0], b, X.shape[1]))
        for mask, draws in parts.values():
            out[mask] = draws
        return out
