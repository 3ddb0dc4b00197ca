"""Rotation between the K-dimensional probability simplex and K-1 coordinates.

The simplex is translated so that the first one-hot vertex sits at the
origin, then rotated with the orthogonal factor of::

    [[-1, -1, ..., -1],
     [ 1,  0, ...,  0],
     [ 0,  1, ...,  0],
     ...
     [ 0,  0, ...,  1]]

whose columns are the edges leaving that vertex. After rotation every
simplex point has the same last coordinate, which is dropped.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import SIMPLEX_TOL, DimensionError, simplex_mask

# Points whose dropped coordinate deviates by more than this are not on the
# simplex's affine hull.
HULL_TOL = 1e-9


def edge_matrix(k):
    """The K x (K-1) matrix of edge vectors leaving the first vertex."""
    return np.vstack([-np.ones((1, k - 1)), np.eye(k - 1)])


class SimplexRotation(TransformerMixin, BaseEstimator):
    """Isometric map from probability vectors to K-1 hull coordinates.

    Parameters
    ----------
    n_classes : int, optional
        Class count K. When omitted it is read from the data given to
        :meth:`fit`.

    Attributes
    ----------
    q_ : ndarray of shape (K, K)
        Orthogonal rotation, with the R factor's diagonal made nonnegative.
    anchor_vertex_ : int
        Index of the one-hot vertex moved to the origin (always 0).
    offset_ : float
        Value of the dropped (last) rotated coordinate for simplex points.
    """

    def __init__(self, n_classes=None):
        self.n_classes = n_classes

    def fit(self, X=None, y=None):
        if self.n_classes is not None:
            k = int(self.n_classes)
        elif X is not None:
            k = np.asarray(X).shape[-1]
        else:
            raise DimensionError("n_classes must be given when fitting without data")
        if k < 2:
            raise DimensionError(f"the simplex needs k >= 2 classes, got {k}")
        q, r = np.linalg.qr(edge_matrix(k), mode="complete")
        signs = np.ones(k)
        diag = np.diag(r)
        signs[: k - 1] = np.where(diag < 0, -1.0, 1.0)
        # the last column is +-(1,...,1)/sqrt(k); point it along the ones vector
        if q[:, -1].sum() < 0:
            signs[-1] = -1.0
        self.q_ = q * signs
        self.anchor_vertex_ = 0
        self.n_classes_ = k
        anchor = np.zeros(k)
        anchor[0] = 1.0
        self.anchor_ = anchor
        centroid = np.full(k, 1.0 / k)
        self.offset_ = float(self.q_[:, -1] @ (centroid - anchor))
        return self

    def transform(self, X):
        """Rotate probability vectors of shape (..., K) to shape (..., K-1)."""
        check_is_fitted(self, "q_")
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n_classes_:
            raise DimensionError(
                f"expected vectors of length {self.n_classes_}, got {X.shape[-1]}"
            )
        rotated = (X - self.anchor_) @ self.q_
        dropped = rotated[..., -1]
        if np.any(np.abs(dropped - self.offset_) > HULL_TOL):
            raise ValueError("input does not lie on the simplex's affine hull (sum != 1)")
        return rotated[..., :-1]

    def inverse_transform(self, Z):
        """Map hull coordinates of shape (..., K-1) back to K-space.

        The result sums to one but may have negative components when ``Z``
        lies outside the image of the simplex.
        """
        check_is_fitted(self, "q_")
        Z = np.asarray(Z, dtype=np.float64)
        if Z.shape[-1] != self.n_classes_ - 1:
            raise DimensionError(
                f"expected {self.n_classes_ - 1} reduced coordinates, got {Z.shape[-1]}"
            )
        q = self.q_
        return Z @ q[:, :-1].T + (self.offset_ * q[:, -1] + self.anchor_)

    @property
    def basis_(self):
        """The K x (K-1) block of ``q_`` spanning the hull directions."""
        return self.q_[:, :-1]


def build_rotation(k):
    """Return the fitted :class:`SimplexRotation` for ``k`` classes."""
    return SimplexRotation(n_classes=k).fit()


def to_reduced(rot, p):
    return rot.transform(p)


def from_reduced(rot, z):
    return rot.inverse_transform(z)


def is_in_simplex(v, tol=SIMPLEX_TOL):
    """True iff ``v`` is within ``tol`` of the probability simplex.

    Works on a single vector or row-wise on an array of shape (..., K).
    """
    result = simplex_mask(v, tol)
    return bool(result) if np.ndim(result) == 0 else result
