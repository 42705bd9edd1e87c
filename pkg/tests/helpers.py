"""Shared generators and small oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from sketch2netlist.geometry import Orientation, segment_orientation

# one "criterion N ...: PASS/FAIL" line per acceptance check, shown at the end of the run
ACCEPTANCE_LINES: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


# --- stroke masks --------------------------------------------------------

# two strokes either cross well inside both, or stay this far apart
STROKE_CLEARANCE = 10


def stroke_rect(s):
    """Inclusive pixel rectangle (x0, y0, x1, y1) of a stroke tuple."""
    horiz, a, b, c, w = s
    lo = c - (w - 1) // 2
    hi = lo + w - 1
    return (a, lo, b, hi) if horiz else (lo, a, hi, b)


def _rect_gap(r1, r2):
    dx = max(r1[0] - r2[2], r2[0] - r1[2], 0)
    dy = max(r1[1] - r2[3], r2[1] - r1[3], 0)
    return max(dx, dy)


def _compatible(s, t):
    if _rect_gap(stroke_rect(s), stroke_rect(t)) > STROKE_CLEARANCE:
        return True
    if s[0] == t[0]:
        return False
    h, v = (s, t) if s[0] else (t, s)
    m = STROKE_CLEARANCE
    return h[1] + m <= v[3] <= h[2] - m and v[1] + m <= h[3] <= v[2] - m


def stroke_mask(seed: int, size: int = 256):
    """1-4 axis-aligned strokes (width 1-5, length 40-199) on a blank mask.

    Returns the mask and the strokes as (horizontal, start, end, centre, width).
    """
    rng = np.random.default_rng(seed)
    mask = np.zeros((size, size), dtype=bool)
    strokes = []
    n = int(rng.integers(1, 5))
    while len(strokes) < n:
        horiz = bool(rng.random() < 0.5)
        length = int(rng.integers(40, min(200, size - 20)))
        width = int(rng.integers(1, 6))
        a = int(rng.integers(10, size - 10 - length))
        c = int(rng.integers(10, size - 10))
        s = (horiz, a, a + length, c, width)
        if all(_compatible(s, t) for t in strokes):
            strokes.append(s)
    for s in strokes:
        x0, y0, x1, y1 = stroke_rect(s)
        mask[y0 : y1 + 1, x0 : x1 + 1] = True
    return mask, strokes


def stroke_endpoints(s):
    horiz, a, b, c, w = s
    centre = c - (w - 1) // 2 + (w - 1) / 2
    return ((a, centre), (b, centre)) if horiz else ((centre, a), (centre, b))


def score_strokes(segments, strokes, tol: float = 3.0):
    """(all strokes recovered, spurious count) under one-to-one matching."""
    used = set()
    recovered = True
    for s in strokes:
        (ax, ay), (bx, by) = stroke_endpoints(s)
        hit = None
        for i, seg in enumerate(segments):
            if i in used:
                continue
            if (segment_orientation(seg) is Orientation.HORIZONTAL) != s[0]:
                continue
            if (
                np.hypot(seg.p1.x - ax, seg.p1.y - ay) <= tol
                and np.hypot(seg.p2.x - bx, seg.p2.y - by) <= tol
            ):
                hit = i
                break
        if hit is None:
            recovered = False
        else:
            used.add(hit)
    return recovered, len(segments) - len(used)


# --- brute-force oracles -------------------------------------------------


def direct_gaussian_mean(img: np.ndarray, window: int, sigma: float) -> np.ndarray:
    """Weighted neighbourhood mean by explicit double loop with edge replication."""
    h, w = img.shape
    half = window // 2
    offs = np.arange(-half, half + 1)
    g = np.exp(-(offs**2) / (2 * sigma * sigma))
    weights = np.outer(g, g)
    weights /= weights.sum()
    out = np.zeros((h, w))
    f = img.astype(np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i, dy in enumerate(offs):
                yy = min(max(y + dy, 0), h - 1)
                for j, dx in enumerate(offs):
                    xx = min(max(x + dx, 0), w - 1)
                    acc += weights[i, j] * f[yy, xx]
            out[y, x] = acc
    return out


def best_partition_sse(points: np.ndarray, k: int) -> float:
    """Minimum within-cluster SSE over every assignment of points to k labels."""
    n = len(points)
    best = np.inf
    for labels in itertools.product(range(k), repeat=n):
        if len(set(labels)) != k:
            continue
        lab = np.array(labels)
        sse = 0.0
        for j in range(k):
            pts = points[lab == j]
            sse += ((pts - pts.mean(axis=0)) ** 2).sum()
        best = min(best, sse)
    return float(best)


def parametric_intersection(p1, p2, q1, q2):
    """Solve p1 + t (p2 - p1) = q1 + u (q2 - q1) by Cramer's rule on the 2x2 system."""
    d1 = (p2[0] - p1[0], p2[1] - p1[1])
    d2 = (q2[0] - q1[0], q2[1] - q1[1])
    den = d1[0] * (-d2[1]) - d1[1] * (-d2[0])
    if den == 0:
        return None
    rx, ry = q1[0] - p1[0], q1[1] - p1[1]
    t = (rx * (-d2[1]) - ry * (-d2[0])) / den
    return (p1[0] + t * d1[0], p1[1] + t * d1[1])
