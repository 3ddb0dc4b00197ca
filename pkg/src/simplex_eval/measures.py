"""Measures between labels and predictions and their sampled distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ._validation import DimensionError
from .evaluators.base import as_sample_array

SQRT2 = np.sqrt(2.0)
KL_EPS = 1e-10


class UndefinedAUCError(ValueError):
    """AUC needs at least two distinct true classes."""


@dataclass
class MeasureDistribution:
    values: np.ndarray
    measure_name: str
    per_sample: np.ndarray | None = None
    n_infinite: int = 0


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"vectors differ in length: {a.shape[-1]} != {b.shape[-1]}")
    return a, b


def normalized_euclidean(a, b):
    """Euclidean distance divided by the simplex edge length sqrt(2).

    Broadcasts over leading axes; lies in [0, 1] for simplex points.
    """
    a, b = _pair(a, b)
    d = np.sqrt(np.sum((a - b) ** 2, axis=-1)) / SQRT2
    return float(d) if d.ndim == 0 else d


def kl_divergence(p, q, eps=KL_EPS):
    """KL(p || q) in bits, sum p log2(p / q), after additive smoothing.

    ``eps`` is added to every component of both vectors, which are then
    renormalized. With ``eps=0`` a zero in ``q`` where ``p`` is positive
    gives ``inf``.
    """
    p, q = _pair(p, q)
    if eps > 0:
        p = (p + eps) / (1.0 + eps * p.shape[-1])
        q = (q + eps) / (1.0 + eps * q.shape[-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log2(p) - np.log2(q)), 0.0)
    d = np.maximum(np.sum(terms, axis=-1), 0.0)
    return float(d) if d.ndim == 0 else d


def _binary_auc(is_positive, scores):
    """Mann-Whitney AUC with midranks for ties."""
    n_pos = int(is_positive.sum())
    n_neg = is_positive.size - n_pos
    ranks = rankdata(scores)
    return (ranks[is_positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_macro(labels, scores):
    """Macro one-vs-rest ROC AUC with argmax true classes.

    The true class of a sample is the argmax of its label; each class
    present among the true classes is scored by the prediction's
    probability for that class, and per-class AUCs are averaged.
    """
    labels, scores = _pair(labels, scores)
    if labels.shape[0] != scores.shape[0]:
        raise DimensionError("labels and scores need the same number of samples")
    if labels.shape[0] < 2:
        raise UndefinedAUCError("AUC needs at least 2 samples")
    truth = labels.argmax(axis=1)
    classes = np.unique(truth)
    if classes.size < 2:
        raise UndefinedAUCError(f"all labels have argmax class {classes[0]}; AUC is undefined")
    return float(np.mean([_binary_auc(truth == c, scores[:, c]) for c in classes]))


MEASURES = {
    "l2": normalized_euclidean,
    "normalized_euclidean": normalized_euclidean,
    "kl": kl_divergence,
    "kl_divergence": kl_divergence,
}


def measure_distribution(measure, labels, samples, reference=None):
    """Evaluate a per-sample measure over every draw of an evaluator.

    ``values[i * B + b] = m(reference[i], samples[i, b])`` where the
    reference defaults to the labels. Passing the actual predictor outputs
    as ``reference`` gives the distance from evaluator draws to the
    predictions.
    """
    if measure not in MEASURES:
        raise KeyError(f"unknown measure {measure!r}; known: {sorted(MEASURES)}")
    data = as_sample_array(samples)
    ref = np.asarray(labels if reference is None else reference, dtype=np.float64)
    if ref.shape[0] != data.shape[0]:
        raise DimensionError(
            f"{ref.shape[0]} reference vectors for {data.shape[0]} sampled labels"
        )
    per = MEASURES[measure](ref[:, None, :], data)
    per = np.asarray(per, dtype=np.float64).reshape(data.shape[:2])
    values = per.ravel()
    return MeasureDistribution(
        values=values,
        measure_name=MEASURES[measure].__name__,
        per_sample=per,
        n_infinite=int(np.isinf(values).sum()),
    )


def auc_distribution(labels, samples):
    """One macro AUC per draw, computed over all N labels of that draw."""
    data = as_sample_array(samples)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape[0] != data.shape[0]:
        raise DimensionError("one label is needed per sampled row")
    if data.shape[0] < 2:
        raise UndefinedAUCError("AUC needs at least 2 samples")
    values = np.array([auc_macro(labels, data[:, b, :]) for b in range(data.shape[1])])
    return MeasureDistribution(values=values, measure_name="auc")


def compute_measure(name, labels, samples, reference=None):
    """Dispatch used by the CLI: ``auc`` or any per-sample measure."""
    if name == "auc":
        return auc_distribution(labels if reference is None else reference, samples)
    return measure_distribution(name, labels, samples, reference)
