"""Simulated subjective-annotation datasets.

Labels are Dirichlet draws; the simulated predictor is the identity plus
small Gaussian noise, resampled until the output is a probability vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import SIMPLEX_TOL, check_generator, simplex_mask
from .distributions import DirichletParams, dirichlet_sample

MAX_RESAMPLES = 10_000


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    alpha: tuple = (10.0, 10.0, 10.0)
    n_train: int = 1000
    n_test: int = 1000
    noise_var: float = 1e-4
    seed: int | None = 0

    def __post_init__(self):
        DirichletParams(np.asarray(self.alpha, dtype=np.float64))
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be >= 1")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")


@dataclass
class SimulatedDataset:
    sample_ids: list
    splits: np.ndarray
    labels: np.ndarray
    predictions: np.ndarray


def simulate_labels(cfg, rng=None):
    """``n_train + n_test`` Dirichlet labels and their split tags."""
    rng = check_generator(cfg.seed if rng is None else rng)
    n = cfg.n_train + cfg.n_test
    labels = dirichlet_sample(DirichletParams(np.asarray(cfg.alpha, dtype=np.float64)), rng, n)
    splits = np.array(["train"] * cfg.n_train + ["test"] * cfg.n_test)
    return labels, splits


def zero_sum_projection(k):
    """Orthogonal projector onto the subspace of vectors summing to zero."""
    return np.eye(k) - np.full((k, k), 1.0 / k)


def simulate_predictor(labels, noise_var, rng=None, max_resamples=MAX_RESAMPLES):
    """Identity plus N(0, noise_var I) noise projected onto the zero-sum plane.

    Each output is redrawn until it lies in the simplex; tiny negative
    components allowed by the membership tolerance are clipped.
    """
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    rng = check_generator(rng)
    labels = np.asarray(labels, dtype=np.float64)
    n, k = labels.shape
    proj = zero_sum_projection(k)
    std = np.sqrt(noise_var)
    out = np.empty_like(labels)
    pending = np.arange(n)
    for _ in range(max_resamples):
        noise = rng.normal(0.0, std, (pending.size, k)) @ proj
        cand = labels[pending] + noise
        ok = simplex_mask(cand, SIMPLEX_TOL)
        out[pending[ok]] = cand[ok]
        pending = pending[~ok]
        if pending.size == 0:
            break
    else:
        raise SimulationError(
            f"{pending.size} predictions stayed outside the simplex after {max_resamples} draws"
        )
    np.clip(out, 0.0, None, out=out)
    out /= out.sum(axis=1, keepdims=True)
    return out


def simulate(cfg):
    """Labels and noisy-identity predictions for one simulation config."""
    rng = check_generator(cfg.seed)
    labels, splits = simulate_labels(cfg, rng)
    predictions = simulate_predictor(labels, cfg.noise_var, rng)
    ids = [f"sim{i:06d}" for i in range(labels.shape[0])]
    return SimulatedDataset(ids, splits, labels, predictions)


UNCERTAIN = SimConfig(alpha=(10.0, 10.0, 10.0))
CERTAIN = SimConfig(alpha=(0.2, 0.2, 0.2))
