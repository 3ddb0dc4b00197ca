"""Report records for measure distributions and standalone SVG histograms."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .intervals import hpdi, rtci, summary_stats


def histogram(values, bins=40):
    """Counts over the finite values; a constant sample gets one unit-wide bin."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return np.array([0.0, 1.0]), np.array([0])
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return np.array([lo, lo + 1.0]), np.array([v.size])
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    return edges, counts


def measure_record(values, measure_name, mass=0.95, bins=40):
    """Summary of one measure distribution in the report.json layout."""
    s = summary_stats(values)
    h = hpdi(values, mass)
    r = rtci(values, mass)
    edges, counts = histogram(values, bins)
    return {
        "measure_name": measure_name,
        "count": s.count,
        "n_infinite": s.excluded,
        "mean": s.mean,
        "median": s.median,
        "hpdi": {"lower": h.lower, "upper": h.upper, "mass": mass},
        "rtci": {"upper": r.upper, "mass": mass},
        "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
    }


def svg_histogram(record, title=None, width=480, height=300):
    """Render a record's histogram with its HPDI shaded as an SVG string."""
    edges = np.asarray(record["histogram"]["edges"], dtype=np.float64)
    counts = np.asarray(record["histogram"]["counts"], dtype=np.float64)
    pad_l, pad_r, pad_t, pad_b = 50, 15, 30, 40
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    x0, x1 = edges[0], edges[-1]
    top = counts.max() if counts.size and counts.max() > 0 else 1.0

    def sx(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def sy(c):
        return pad_t + ph - c / top * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    lo, hi = record["hpdi"]["lower"], record["hpdi"]["upper"]
    if lo is not None and hi is not None and np.isfinite(lo) and np.isfinite(hi):
        a, b = sx(max(lo, x0)), sx(min(hi, x1))
        parts.append(
            f'<rect class="hpdi" x="{a:.2f}" y="{pad_t}" width="{max(b - a, 1.0):.2f}" '
            f'height="{ph}" fill="#9ecae1" fill-opacity="0.4"/>'
        )
    for c, e0, e1 in zip(counts, edges[:-1], edges[1:]):
        if c > 0:
            parts.append(
                f'<rect x="{sx(e0):.2f}" y="{sy(c):.2f}" width="{max(sx(e1) - sx(e0), 0.5):.2f}" '
                f'height="{sy(0) - sy(c):.2f}" fill="#3182bd"/>'
            )
    parts += [
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
        f'<text x="{pad_l}" y="{height - 12}" font-size="11">{x0:.4g}</text>',
        f'<text x="{pad_l + pw}" y="{height - 12}" font-size="11" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{pad_l - 5}" y="{pad_t + 10}" font-size="11" text-anchor="end">{int(top)}</text>',
    ]
    label = title or record["measure_name"]
    mass = record["hpdi"]["mass"]
    band = "" if lo is None or hi is None else f"  HPDI({mass:g}) [{lo:.4g}, {hi:.4g}]"
    parts.append(f'<text x="{width / 2}" y="18" font-size="13" text-anchor="middle">'
                 f"{escape(label + band)}</text>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, record, title=None):
    Path(path).write_text(svg_histogram(record, title), encoding="utf-8")
