"""Bayesian evaluation of a classifier's outputs against probability-vector labels.

Labels and predictions live on the probability simplex. An evaluator models
the predictor's conditional distribution of outputs given the labels, and
sampled measure distributions summarize how well a predictor matches it.
"""

from .evaluators import (
    BNNEvaluator,
    MLEDirichletEvaluator,
    NDoDEvaluator,
    PerSplitEvaluator,
    UniformDirichletEvaluator,
)
from .hmc import ConvergenceError, HmcConfig, run_chains
from .intervals import hpdi, rtci, summary_stats
from .measures import auc_macro, kl_divergence, normalized_euclidean
from .simplex import SimplexRotation

__version__ = "0.1.0"

__all__ = [
    "BNNEvaluator",
    "ConvergenceError",
    "HmcConfig",
    "MLEDirichletEvaluator",
    "NDoDEvaluator",
    "PerSplitEvaluator",
    "SimplexRotation",
    "UniformDirichletEvaluator",
    "auc_macro",
    "hpdi",
    "kl_divergence",
    "normalized_euclidean",
    "rtci",
    "run_chains",
    "summary_stats",
]
