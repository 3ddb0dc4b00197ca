"""Input validation helpers shared by the estimators and functions."""

import numbers
import os

import numpy as np
from sklearn.utils import check_array

SIMPLEX_TOL = 1e-9
THREADS_ENV = "SIMPLEX_EVAL_THREADS"


class DimensionError(ValueError):
    """Raised when array shapes or class counts are inconsistent."""


def check_generator(random_state=None):
    """Turn ``random_state`` into a :class:`numpy.random.Generator`.

    Accepts ``None``, an integer seed, a ``SeedSequence`` or an existing
    ``Generator`` (returned as is).
    """
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(
        random_state, (numbers.Integral, np.random.SeedSequence)
    ):
        return np.random.default_rng(random_state)
    raise ValueError(f"{random_state!r} cannot be used to seed a numpy Generator")


def spawn_generators(random_state, n):
    """Derive ``n`` independent generators from one master stream.

    The children depend only on the master seed and their index, so the
    same seed yields the same children whatever order they are consumed in.
    """
    if isinstance(random_state, np.random.Generator):
        seed = int(random_state.integers(2**63))
        ss = np.random.SeedSequence(seed)
    elif isinstance(random_state, np.random.SeedSequence):
        ss = random_state
    else:
        ss = np.random.SeedSequence(random_state)
    return [np.random.default_rng(child) for child in ss.spawn(n)]


def check_prob_vectors(
    X, *, name="X", tol=1e-6, n_classes=None, ensure_min_samples=1, renormalize=False
):
    """Validate a 2-D array whose rows are probability vectors.

    Returns a float64 array of shape (n_samples, n_classes). With
    ``renormalize`` the rows are divided by their sums, which removes the
    small drift of e.g. float32 softmax outputs.
    """
    X = check_array(
        X,
        dtype=np.float64,
        ensure_min_samples=ensure_min_samples,
        input_name=name,
    )
    if X.shape[1] < 2:
        raise DimensionError(f"{name} needs at least 2 classes, got {X.shape[1]}")
    if n_classes is not None and X.shape[1] != n_classes:
        raise DimensionError(
            f"{name} has {X.shape[1]} classes, expected {n_classes}"
        )
    bad = ~simplex_mask(X, tol)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ValueError(f"{name} row {row} is not a probability vector: {X[row]}")
    if renormalize:
        X = np.clip(X, 0.0, None)
        X = X / X.sum(axis=1, keepdims=True)
    return X


def check_prob_vector(p, *, name="p", tol=1e-6):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {p.shape}")
    return check_prob_vectors(p[None, :], name=name, tol=tol)[0]


def simplex_mask(V, tol=SIMPLEX_TOL):
    """Row-wise simplex membership test for an array of shape (..., K)."""
    V = np.asarray(V, dtype=np.float64)
    return (
        np.all(V >= -tol, axis=-1)
        & np.all(V <= 1.0 + tol, axis=-1)
        & (np.abs(V.sum(axis=-1) - 1.0) <= tol)
    )


def worker_count(n_tasks):
    """Worker threads to use: capped by SIMPLEX_EVAL_THREADS and the CPU count."""
    env = os.environ.get(THREADS_ENV)
    limit = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n_tasks, limit))
