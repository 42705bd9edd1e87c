# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled progressive probabilistic Hough kernel.

Statement-for-statement twin of ``_ppht_py.ppht``; see that module for the
algorithm outline.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs

cnp.import_array()

DEF SHIFT = 16
DEF REFITS = 3


cdef struct Walk:
    bint xflag
    long long x0, y0, dx0, dy0


cdef inline Py_ssize_t _rbin(double x, double y, double ct, double st, Py_ssize_t offset) noexcept nogil:
    return <Py_ssize_t>floor(x * ct + y * st + 0.5) + offset


cdef inline long long _floordiv2(long long v) noexcept nogil:
    if v >= 0:
        return v // 2
    return -((-v + 1) // 2)


cdef Walk _setup(double px, double py, double a, double b) noexcept nogil:
    cdef Walk s
    cdef long long sx, sy
    cdef double y_at, x_at
    if fabs(a) > fabs(b):
        s.xflag = True
        s.dx0 = 1 if a > 0 else -1
        s.dy0 = <long long>floor(b * 65536.0 / fabs(a) + 0.5)
        sx = <long long>floor(px + 0.5)
        y_at = py + (sx - px) * (b / a)
        s.x0 = sx
        s.y0 = <long long>floor((y_at + 0.5) * 65536.0)
    else:
        s.xflag = False
        s.dy0 = 1 if b > 0 else -1
        s.dx0 = <long long>floor(a * 65536.0 / fabs(b) + 0.5)
        sy = <long long>floor(py + 0.5)
        x_at = px + (sy - py) * (a / b)
        s.y0 = sy
        s.x0 = <long long>floor((x_at + 0.5) * 65536.0)
    return s


cdef inline void _pix(Walk* s, long long xx, long long yy, Py_ssize_t* j1, Py_ssize_t* i1) noexcept nogil:
    if s.xflag:
        j1[0] = xx
        i1[0] = yy >> SHIFT
    else:
        j1[0] = xx >> SHIFT
        i1[0] = yy


cdef inline bint _band_hit(const cnp.uint8_t[:, ::1] ink, Py_ssize_t j1, Py_ssize_t i1,
                           bint xflag, int band, Py_ssize_t h, Py_ssize_t w) noexcept nogil:
    cdef int d
    cdef Py_ssize_t pi, pj
    for d in range(-band, band + 1):
        if xflag:
            pi = i1 + d
            pj = j1
        else:
            pi = i1
            pj = j1 + d
        if 0 <= pi < h and 0 <= pj < w and ink[pi, pj]:
            return True
    return False


cdef void _walk_ends(const cnp.uint8_t[:, ::1] ink, Walk* s, int band, int max_gap,
                     Py_ssize_t h, Py_ssize_t w, Py_ssize_t ends[2][2]) noexcept nogil:
    cdef int k, gap
    cdef long long xx, yy, dx, dy
    cdef Py_ssize_t j1, i1
    _pix(s, s.x0, s.y0, &j1, &i1)
    ends[0][0] = j1
    ends[0][1] = i1
    ends[1][0] = j1
    ends[1][1] = i1
    for k in range(2):
        gap = 0
        xx = s.x0
        yy = s.y0
        if k == 0:
            dx = s.dx0
            dy = s.dy0
        else:
            dx = -s.dx0
            dy = -s.dy0
        while True:
            _pix(s, xx, yy, &j1, &i1)
            if j1 < 0 or j1 >= w or i1 < 0 or i1 >= h:
                break
            if _band_hit(ink, j1, i1, s.xflag, band, h, w):
                gap = 0
                ends[k][0] = j1
                ends[k][1] = i1
            else:
                gap += 1
                if gap > max_gap:
                    break
            xx += dx
            yy += dy


cdef inline bint _cross(const cnp.uint8_t[:, ::1] ink, bint xflag, Py_ssize_t t, Py_ssize_t c) noexcept nogil:
    if xflag:
        return ink[c, t] != 0
    return ink[t, c] != 0


cdef bint _fit(const cnp.uint8_t[:, ::1] ink, Walk* s, Py_ssize_t ends[2][2], int band,
               Py_ssize_t h, Py_ssize_t w, double out[4]) noexcept nogil:
    # midpoints of the ink runs across the path, regressed on the walk axis
    cdef long long n = 0
    cdef double st = 0.0, sc = 0.0, stt = 0.0, stc = 0.0
    cdef int k, d, e
    cdef int limit = 2 * band + 1
    cdef bint first
    cdef long long xx, yy, dx, dy
    cdef Py_ssize_t j1, i1, t, c, cc, hit, lo, hi
    cdef Py_ssize_t size = h if s.xflag else w
    cdef double mid, mt, mc, vtt, beta
    for k in range(2):
        xx = s.x0
        yy = s.y0
        if k == 0:
            dx = s.dx0
            dy = s.dy0
        else:
            dx = -s.dx0
            dy = -s.dy0
        first = True
        while True:
            _pix(s, xx, yy, &j1, &i1)
            if j1 < 0 or j1 >= w or i1 < 0 or i1 >= h:
                break
            if k == 0 or not first:
                if s.xflag:
                    t = j1
                    c = i1
                else:
                    t = i1
                    c = j1
                hit = -1
                for d in range(band + 1):
                    for e in range(2):
                        cc = c - d if e == 0 else c + d
                        if hit < 0 and 0 <= cc < size and _cross(ink, s.xflag, t, cc):
                            hit = cc
                    if hit >= 0:
                        break
                if hit >= 0:
                    lo = hit
                    hi = hit
                    while lo - 1 >= 0 and hi - lo < limit and _cross(ink, s.xflag, t, lo - 1):
                        lo -= 1
                    while hi + 1 < size and hi - lo < limit and _cross(ink, s.xflag, t, hi + 1):
                        hi += 1
                    if hi - lo < limit:
                        mid = <double>(lo + hi) * 0.5
                        n += 1
                        st += <double>t
                        sc += mid
                        stt += <double>(t * t)
                        stc += <double>t * mid
            first = False
            if j1 == ends[k][0] and i1 == ends[k][1]:
                break
            xx += dx
            yy += dy
    if n < 2:
        return False
    mt = st / <double>n
    mc = sc / <double>n
    vtt = stt / <double>n - mt * mt
    if vtt <= 0.0:
        return False
    beta = (stc / <double>n - mt * mc) / vtt
    if s.xflag:
        out[0] = mt
        out[1] = mc
        out[2] = 1.0
        out[3] = beta
    else:
        out[0] = mc
        out[1] = mt
        out[2] = beta
        out[3] = 1.0
    return True


def ppht(cnp.uint8_t[:, ::1] mask,
         const cnp.uint8_t[:, ::1] ink,
         const cnp.int64_t[::1] order,
         const double[::1] cos_tab,
         const double[::1] sin_tab,
         Py_ssize_t numrho,
         int votes_min,
         int min_len,
         int max_gap,
         int band):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    cdef Py_ssize_t numangle = cos_tab.shape[0]
    cdef Py_ssize_t offset = (numrho - 1) // 2
    cdef cnp.int32_t[:, ::1] acc = np.zeros((numangle, numrho), dtype=np.int32)
    cdef cnp.uint8_t[:, ::1] voted = np.zeros((h, w), dtype=np.uint8)
    cdef Py_ssize_t i, n, r, max_n, max_r, x, y, j1, i1, pj, pi, sy0, sx0
    cdef long long xx, yy, dx, dy
    cdef int max_val, val, k, d, width, lo, hi, limit = 2 * band + 1
    cdef bint xflag, good, first
    cdef double a, b
    cdef double fit[4]
    cdef Walk s
    cdef Py_ssize_t ends[2][2]
    lines = []

    for i in range(order.shape[0]):
        sy0 = order[i] // w
        sx0 = order[i] - sy0 * w
        y = sy0
        x = sx0
        if not mask[y, x]:
            continue

        max_val = votes_min - 1
        max_n = -1
        max_r = 0
        for n in range(numangle):
            r = _rbin(<double>x, <double>y, cos_tab[n], sin_tab[n], offset)
            acc[n, r] += 1
            val = acc[n, r]
            if val > max_val:
                max_val = val
                max_n = n
                max_r = r
        voted[y, x] = 1
        if max_n < 0:
            continue

        a = -sin_tab[max_n]
        b = cos_tab[max_n]
        xflag = fabs(a) > fabs(b)

        lo = 0
        hi = 0
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
            if xflag:
                y += _floordiv2(hi - lo)
            else:
                x += _floordiv2(hi - lo)

        s = _setup(<double>x, <double>y, a, b)
        _walk_ends(ink, &s, band, max_gap, h, w, ends)
        for k in range(REFITS):
            if not _fit(ink, &s, ends, band, h, w, fit):
                break
            s = _setup(fit[0], fit[1], fit[2], fit[3])
            _walk_ends(ink, &s, band, max_gap, h, w, ends)

        good = (abs(ends[1][0] - ends[0][0]) >= min_len or
                abs(ends[1][1] - ends[0][1]) >= min_len)
        width = band if good else 0

        for k in range(2):
            xx = s.x0
            yy = s.y0
            if k == 0:
                dx = s.dx0
                dy = s.dy0
            else:
                dx = -s.dx0
                dy = -s.dy0
            first = True
            while True:
                _pix(&s, xx, yy, &j1, &i1)
                if j1 < 0 or j1 >= w or i1 < 0 or i1 >= h:
                    break
                if k == 0 or not first:
                    for d in range(-width, width + 1):
                        if s.xflag:
                            pj = j1
                            pi = i1 + d
                        else:
                            pj = j1 + d
                            pi = i1
                        if pi < 0 or pi >= h or pj < 0 or pj >= w or not mask[pi, pj]:
                            continue
                        if good and voted[pi, pj]:
                            for n in range(numangle):
                                r = _rbin(<double>pj, <double>pi, cos_tab[n], sin_tab[n], offset)
                                acc[n, r] -= 1
                            voted[pi, pj] = 0
                        mask[pi, pj] = 0
                first = False
                if j1 == ends[k][0] and i1 == ends[k][1]:
                    break
                xx += dx
                yy += dy
        mask[sy0, sx0] = 0

        if good:
            lines.append((ends[0][0], ends[0][1], ends[1][0], ends[1][1], max_n, max_r))

    return lines
