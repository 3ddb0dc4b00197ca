"""Evaluators that assume predictions are independent of the labels."""

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .._validation import check_generator
from ..distributions import AdamConfig, dirichlet_sample, fit_dirichlet_mean_precision
from .base import DEFAULT_DRAWS, BaseEvaluator


class UniformDirichletEvaluator(BaseEvaluator):
    """Random guessing: every draw comes from Dirichlet(1, ..., 1)."""

    def __init__(self, n_draws=DEFAULT_DRAWS, random_state=None):
        self.n_draws = n_draws
        self.random_state = random_state

    def fit(self, X, y=None):
        if y is None:
            self.n_classes_ = np.shape(X)[1]
            self.n_features_in_ = self.n_classes_
        else:
            self._check_fit_data(X, y, min_samples=1)
        return self

    def _sample(self, X, n_draws, random_state):
        rng = check_generator(random_state)
        return dirichlet_sample(np.ones(self.n_classes_), rng, (X.shape[0], n_draws))


class MLEDirichletEvaluator(BaseEvaluator):
    """Mean/precision Dirichlet fitted to the predictions alone.

    The mean is the sample mean of ``y`` and the precision is chosen by
    ADAM to maximize the likelihood of ``y``. Labels are ignored.

    Attributes
    ----------
    mean_ : ndarray of shape (n_classes,)
    precision_ : float
    capped_ : bool
        True when the precision hit ``precision_max`` (degenerate data).
    """

    def __init__(
        self,
        learning_rate=0.01,
        max_iter=10_000,
        tol=1e-6,
        precision_max=1e6,
        n_draws=DEFAULT_DRAWS,
        random_state=None,
    ):
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.tol = tol
        self.precision_max = precision_max
        self.n_draws = n_draws
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._check_fit_data(X, y)
        adam = AdamConfig(learning_rate=self.learning_rate, max_iter=self.max_iter, tol=self.tol)
        fit = fit_dirichlet_mean_precision(y, adam, precision_max=self.precision_max)
        self.mean_ = fit.mean
        self.precision_ = fit.precision
        self.capped_ = fit.capped
        self.n_iter_ = fit.n_iter
        return self

    @property
    def alpha_(self):
        check_is_fitted(self, "precision_")
        return self.precision_ * self.mean_

    def _sample(self, X, n_draws, random_state):
        rng = check_generator(random_state)
        return dirichlet_sample(self.alpha_, rng, (X.shape[0], n_draws))
