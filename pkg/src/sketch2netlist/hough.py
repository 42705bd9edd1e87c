"""Line-segment detection with the progressive probabilistic Hough transform.

The voting/walking loop lives in a compiled kernel (``_ppht``) with a
pure-Python twin (``_ppht_py``). The compiled one is used when it imports,
unless ``SKETCH2NETLIST_PURE_PYTHON=1`` is set. Both return identical
segments; only speed differs.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _ppht_py
from .clustering import splitmix64_stream
from .geometry import LineSegment, Point
from .raster import as_mask, dilate

try:
    from . import _ppht as _compiled
except ImportError:  # extension not built
    _compiled = None

_KERNELS = {"python": _ppht_py.ppht}
if _compiled is not None:
    _KERNELS["compiled"] = _compiled.ppht

if _compiled is not None and os.environ.get("SKETCH2NETLIST_PURE_PYTHON", "") not in ("1", "true"):
    BACKEND = "compiled"
else:
    BACKEND = "python"


def available_backends() -> list[str]:
    return sorted(_KERNELS)


@dataclass(frozen=True)
class HoughParams:
    """Hough settings.

    ``band`` is the half-width of the stripe removed around an accepted
    segment so a thick stroke yields one segment, not several parallel
    ones. ``pre_dilate`` closes one-pixel breaks before voting.
    """

    rho_res: float = 1.0
    theta_res: float = math.pi / 180
    votes_min: int = 30
    min_len: int = 20
    max_gap: int = 6
    band: int = 3
    pre_dilate: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("rho_res", "theta_res", "votes_min", "min_len", "max_gap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.band < 0 or self.pre_dilate < 0:
            raise ValueError("band and pre_dilate must be >= 0")
        bins = math.pi / self.theta_res
        if abs(bins - round(bins)) > 1e-6:
            raise ValueError("theta_res must divide pi into a whole number of bins")

    @property
    def numangle(self) -> int:
        return int(round(math.pi / self.theta_res))


def _tables(p: HoughParams) -> tuple[np.ndarray, np.ndarray]:
    theta = np.arange(p.numangle, dtype=np.float64) * p.theta_res
    irho = 1.0 / p.rho_res
    return np.cos(theta) * irho, np.sin(theta) * irho


def _pixel_order(mask: np.ndarray, seed: int) -> np.ndarray:
    flat = np.flatnonzero(mask).astype(np.int64)
    keys = splitmix64_stream(seed, len(flat))
    return flat[np.argsort(keys, kind="stable")]


def _canonical(x1: int, y1: int, x2: int, y2: int) -> tuple[int, int, int, int]:
    # start = smaller coordinate along the dominant axis
    if abs(x2 - x1) >= abs(y2 - y1):
        if (x2, y2) < (x1, y1):
            x1, y1, x2, y2 = x2, y2, x1, y1
    elif (y2, x2) < (y1, x1):
        x1, y1, x2, y2 = x2, y2, x1, y1
    return x1, y1, x2, y2


def detect_line_segments(
    mask, p: HoughParams | None = None, backend: str | None = None
) -> list[LineSegment]:
    """Find straight segments in an ink mask.

    Output is sorted by (theta bin, rho bin, start x, start y), so it is
    reproducible for a given mask, params and backend-independent.
    """
    p = p or HoughParams()
    kernel = _KERNELS[backend or BACKEND]
    m = as_mask(mask)
    if p.pre_dilate:
        m = dilate(m, p.pre_dilate)
    if not m.any():
        return []
    h, w = m.shape
    ink = np.ascontiguousarray(m, dtype=np.uint8)
    seedable = ink.copy()
    cos_tab, sin_tab = _tables(p)
    numrho = int(round(((w + h) * 2 + 1) / p.rho_res))
    raw = kernel(
        seedable,
        ink,
        _pixel_order(m, p.seed),
        cos_tab,
        sin_tab,
        numrho,
        p.votes_min,
        p.min_len,
        p.max_gap,
        p.band,
    )
    keyed = []
    for x1, y1, x2, y2, n, r in raw:
        if (x1, y1) == (x2, y2):
            continue
        x1, y1, x2, y2 = _canonical(x1, y1, x2, y2)
        keyed.append(((n, r, x1, y1, x2, y2), (x1, y1, x2, y2)))
    keyed.sort()
    return [
        LineSegment(Point(float(x1), float(y1)), Point(float(x2), float(y2)))
        for _, (x1, y1, x2, y2) in keyed
    ]
