"""Bayesian evaluators of a predictor's outputs given the labels."""

from .base import DEFAULT_DRAWS, BaseEvaluator, EvaluatorSamples, PerSplitEvaluator
from .baselines import MLEDirichletEvaluator, UniformDirichletEvaluator
from .bnn import BnnConfig, BnnLogTarget, BNNEvaluator, bnn_fit, bnn_forward, bnn_sample
from .bnn import grad_log_target, log_target
from .ndod import NDoDEvaluator, NDoDParams, ResamplingTimeoutError, ndod_fit, ndod_sample

__all__ = [
    "DEFAULT_DRAWS",
    "BaseEvaluator",
    "BNNEvaluator",
    "BnnConfig",
    "BnnLogTarget",
    "EvaluatorSamples",
    "MLEDirichletEvaluator",
    "NDoDEvaluator",
    "NDoDParams",
    "PerSplitEvaluator",
    "ResamplingTimeoutError",
    "UniformDirichletEvaluator",
    "bnn_fit",
    "bnn_forward",
    "bnn_sample",
    "grad_log_target",
    "log_target",
    "ndod_fit",
    "ndod_sample",
]
