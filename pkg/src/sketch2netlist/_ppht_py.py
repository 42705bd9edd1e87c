"""Pure-Python progressive probabilistic Hough kernel.

Reference twin of ``_ppht.pyx``; both must return identical segments for
identical inputs. Float expressions are written in the same order in both
files, and scalar math goes through ``math`` (libm) rather than numpy, so
rounding matches bit for bit.

Per triggered accumulator bin the kernel:

1. re-centres the seed pixel across the stroke it sits on;
2. walks along the bin direction, accepting a step when any pixel within
   ``band`` of the path (perpendicular) is ink, bridging ``max_gap`` misses;
3. regresses the midpoints of the ink runs crossing the path and walks
   again along the fitted line, ``REFITS`` times (a bin direction can be
   off by half a degree, which drifts the first stripe off a long stroke);
4. clears the stripe from the seed mask and withdraws its votes.
"""

from __future__ import annotations

import math

import numpy as np

SHIFT = 16
ONE = 1 << SHIFT
REFITS = 3


def _setup(px, py, a, b):
    """Fixed-point walk state for the line through (px, py) with direction (a, b)."""
    if abs(a) > abs(b):
        xflag = True
        dx0 = 1 if a > 0 else -1
        dy0 = int(math.floor(b * 65536.0 / abs(a) + 0.5))
        sx = int(math.floor(px + 0.5))
        y_at = py + (sx - px) * (b / a)
        x0 = sx
        y0 = int(math.floor((y_at + 0.5) * 65536.0))
    else:
        xflag = False
        dy0 = 1 if b > 0 else -1
        dx0 = int(math.floor(a * 65536.0 / abs(b) + 0.5))
        sy = int(math.floor(py + 0.5))
        x_at = px + (sy - py) * (a / b)
        y0 = sy
        x0 = int(math.floor((x_at + 0.5) * 65536.0))
    return xflag, x0, y0, dx0, dy0


def _pix(xflag, xx, yy):
    if xflag:
        return xx, yy >> SHIFT
    return xx >> SHIFT, yy


def _band_hit(ink, j1, i1, xflag, band, h, w):
    for d in range(-band, band + 1):
        if xflag:
            pi, pj = i1 + d, j1
        else:
            pi, pj = i1, j1 + d
        if 0 <= pi < h and 0 <= pj < w and ink[pi, pj]:
            return True
    return False


def _walk_ends(ink, state, band, max_gap, h, w):
    xflag, x0, y0, dx0, dy0 = state
    start = _pix(xflag, x0, y0)
    ends = [list(start), list(start)]
    for k in range(2):
        gap = 0
        xx, yy = x0, y0
        dx, dy = (dx0, dy0) if k == 0 else (-dx0, -dy0)
        while True:
            j1, i1 = _pix(xflag, xx, yy)
            if j1 < 0 or j1 >= w or i1 < 0 or i1 >= h:
                break
            if _band_hit(ink, j1, i1, xflag, band, h, w):
                gap = 0
                ends[k][0] = j1
                ends[k][1] = i1
            else:
                gap += 1
                if gap > max_gap:
                    break
            xx += dx
            yy += dy
    return ends


def _path(state, ends, h, w):
    """Path pixels from the start out to each end (start emitted once)."""
    xflag, x0, y0, dx0, dy0 = state
    for k in range(2):
        xx, yy = x0, y0
        dx, dy = (dx0, dy0) if k == 0 else (-dx0, -dy0)
        first = True
        while True:
            j1, i1 = _pix(xflag, xx, yy)
            if j1 < 0 or j1 >= w or i1 < 0 or i1 >= h:
                break
            if k == 0 or not first:
                yield j1, i1
            first = False
            if j1 == ends[k][0] and i1 == ends[k][1]:
                break
            xx += dx
            yy += dy


def _fit(ink, state, ends, band, h, w):
    """Line through the midpoints of the ink runs the path crosses, or None.

    At each path step the run of ink across the path (nearest hit within
    ``band``) is measured; runs longer than ``2 * band + 1`` are crossings
    or blobs and are skipped. The midpoints are then regressed on the walk
    coordinate. Returns (x, y, dx, dy) of the fitted line.
    """
    xflag = state[0]
    limit = 2 * band + 1
    size = h if xflag else w
    n = 0
    st = sc = stt = stc = 0.0
    for j1, i1 in _path(state, ends, h, w):
        if xflag:
            t, c = j1, i1
        else:
            t, c = i1, j1
        hit = -1
        for d in range(band + 1):
            for cc in (c - d, c + d):
                if hit < 0 and 0 <= cc < size and (ink[cc, t] if xflag else ink[t, cc]):
                    hit = cc
            if hit >= 0:
                break
        if hit < 0:
            continue
        lo = hi = hit
        while lo - 1 >= 0 and hi - lo < limit and (ink[lo - 1, t] if xflag else ink[t, lo - 1]):
            lo -= 1
        while hi + 1 < size and hi - lo < limit and (ink[hi + 1, t] if xflag else ink[t, hi + 1]):
            hi += 1
        if hi - lo >= limit:
            continue
        mid = (lo + hi) * 0.5
        n += 1
        st += t
        sc += mid
        stt += t * t
        stc += t * mid
    if n < 2:
        return None
    mt = st / n
    mc = sc / n
    vtt = stt / n - mt * mt
    if vtt <= 0.0:
        return None
    beta = (stc / n - mt * mc) / vtt
    if xflag:
        return mt, mc, 1.0, beta
    return mc, mt, beta, 1.0


def ppht(mask, ink, order, cos_tab, sin_tab, numrho, votes_min, min_len, max_gap, band):
    """Run the voting/walking loop.

    Args:
        mask: uint8 (H, W) pixels eligible to vote; modified in place.
        ink: uint8 (H, W) pixels walked to measure segment extent.
        order: int64 flat pixel indices in processing order.
        cos_tab, sin_tab: per-angle cos/sin already divided by the rho step.
        numrho: accumulator rho bins.
        votes_min, min_len, max_gap, band: Hough thresholds; ``band`` is the
            half-width of the stripe walked and cleared around a line.

    Returns:
        list of (x1, y1, x2, y2, theta_bin, rho_bin) tuples, in discovery order.
    """
    h, w = mask.shape
    numangle = len(cos_tab)
    offset = (numrho - 1) // 2
    acc = np.zeros((numangle, numrho), dtype=np.int32)
    voted = np.zeros((h, w), dtype=np.uint8)
    angles = np.arange(numangle)
    lines = []
    limit = 2 * band + 1

    def rbins(x, y):
        return np.floor(x * cos_tab + y * sin_tab + 0.5).astype(np.int64) + offset

    for idx in order:
        y = int(idx) // w
        x = int(idx) - y * w
        if not mask[y, x]:
            continue

        rs = rbins(float(x), float(y))
        acc[angles, rs] += 1
        voted[y, x] = 1
        vals = acc[angles, rs]
        max_n = int(np.argmax(vals))
        if int(vals[max_n]) < votes_min:
            continue
        max_r = int(rs[max_n])

        a = -sin_tab[max_n]
        b = cos_tab[max_n]
        xflag = abs(a) > abs(b)

        lo = hi = 0
        if xflag:
            while lo < limit and y - lo - 1 >= 0 and ink[y - lo - 1, x]:
                lo += 1
            while hi < limit and y + hi + 1 < h and ink[y + hi + 1, x]:
                hi += 1
        else:
            while lo < limit and x - lo - 1 >= 0 and ink[y, x - lo - 1]:
                lo += 1
            while hi < limit and x + hi + 1 < w and ink[y, x + hi + 1]:
                hi += 1
        if lo < limit and hi < limit:
            shift = (hi - lo) // 2
            if xflag:
                y += shift
            else:
                x += shift

        state = _setup(float(x), float(y), a, b)
        ends = _walk_ends(ink, state, band, max_gap, h, w)
        for _ in range(REFITS):
            fit = _fit(ink, state, ends, band, h, w)
            if fit is None:
                break
            state = _setup(fit[0], fit[1], fit[2], fit[3])
            ends = _walk_ends(ink, state, band, max_gap, h, w)

        good = (
            abs(ends[1][0] - ends[0][0]) >= min_len or abs(ends[1][1] - ends[0][1]) >= min_len
        )
        width = band if good else 0
        sxflag = state[0]
        for j1, i1 in _path(state, ends, h, w):
            for d in range(-width, width + 1):
                if sxflag:
                    pi, pj = i1 + d, j1
                else:
                    pi, pj = i1, j1 + d
                if pi < 0 or pi >= h or pj < 0 or pj >= w or not mask[pi, pj]:
                    continue
                if good and voted[pi, pj]:
                    acc[angles, rbins(float(pj), float(pi))] -= 1
                    voted[pi, pj] = 0
                mask[pi, pj] = 0
        # the seed never votes twice, even when the path missed it
        mask[int(idx) // w, int(idx) % w] = 0

        if good:
            lines.append((ends[0][0], ends[0][1], ends[1][0], ends[1][1], max_n, max_r))

    return lines
