"""Sample-based credible intervals and summaries of measure distributions.

``+inf`` values (e.g. KL divergences against a zero probability) are kept
in the right tail: they only pull an interval bound to infinity when more
than the allowed tail mass is infinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CredibleInterval:
    lower: float
    upper: float
    mass: float
    kind: str

    @property
    def width(self):
        return self.upper - self.lower


def _sorted_values(values):
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot summarize an empty sample")
    if np.isnan(v).any():
        raise ValueError("values contain NaN")
    return np.sort(v)


def _check_mass(mass):
    if not 0.0 < mass < 1.0:
        raise ValueError(f"mass must lie in (0, 1), got {mass}")


def tie_tolerance(sorted_values):
    finite = sorted_values[np.isfinite(sorted_values)]
    scale = float(np.max(np.abs(finite))) if finite.size else 0.0
    return 8 * np.finfo(np.float64).eps * scale


def hpdi(values, mass=0.95):
    """Narrowest window of ``ceil(mass * n)`` consecutive sorted values.

    Ties in width go to the window with the smallest lower bound; widths
    within a few ulps of the minimum count as ties so rounding in the
    subtraction does not pick an arbitrary window.
    """
    _check_mass(mass)
    v = _sorted_values(values)
    n = v.size
    w = min(n, max(1, math.ceil(mass * n - 1e-12)))
    with np.errstate(invalid="ignore"):
        widths = v[w - 1 :] - v[: n - w + 1]
    # inf - inf windows are infinitely wide, not undefined
    widths = np.where(np.isnan(widths), np.inf, widths)
    i = int(np.argmax(widths <= widths.min() + tie_tolerance(v)))
    return CredibleInterval(float(v[i]), float(v[i + w - 1]), mass, "hpdi")


def rtci(values, mass=0.95):
    """Right-tailed interval: [min, type-7 quantile at ``mass``]."""
    _check_mass(mass)
    v = _sorted_values(values)
    h = (v.size - 1) * mass
    lo = math.floor(h)
    hi = min(lo + 1, v.size - 1)
    frac = h - lo
    if frac == 0.0 or v[lo] == v[hi]:
        upper = v[lo]
    else:
        upper = v[lo] + frac * (v[hi] - v[lo])
    return CredibleInterval(float(v[0]), float(upper), mass, "rtci")


@dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    min: float
    max: float
    count: int
    excluded: int


def summary_stats(values):
    """Mean, median, min, max and count; infinities are left out of the mean."""
    v = _sorted_values(values)
    finite = v[np.isfinite(v)]
    mean = float(finite.mean()) if finite.size else float("nan")
    return Summary(
        mean=mean,
        median=float(np.median(v)),
        min=float(v[0]),
        max=float(v[-1]),
        count=int(v.size),
        excluded=int(v.size - finite.size),
    )
