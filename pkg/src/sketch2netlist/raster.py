"""Grayscale/binary rasters and the morphology the pipeline runs on.

Images are plain numpy arrays indexed ``[y, x]``:

* a gray image is ``uint8`` with 0 = black ink and 255 = white paper;
* a mask is ``bool`` with ``True`` = ink (foreground).

Note the polarity: the mask marks *dark* pixels, so thresholding keeps
pixels whose intensity is strictly below the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .geometry import BoundingBox, Point

__all__ = [
    "AdaptiveThresholdParams",
    "ComponentRegion",
    "DimensionMismatch",
    "adaptive_threshold",
    "as_gray",
    "as_mask",
    "connected_components",
    "dilate",
    "erase_regions",
    "gaussian_kernel",
    "global_threshold",
    "intersect_masks",
    "render_box_perimeters",
]

# slack for roundoff in the normalized Gaussian sum (constant regions must stay background)
_THRESH_EPS = 1e-7


class DimensionMismatch(ValueError):
    """Two rasters that must share a shape do not."""


def as_gray(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"gray image must be a non-empty 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("gray image intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def as_mask(mask) -> np.ndarray:
    arr = np.asarray(mask, dtype=bool)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class AdaptiveThresholdParams:
    """Gaussian adaptive threshold settings.

    ``sigma=None`` derives the spread from the window size with the usual
    ``0.3 * ((w - 1) / 2 - 1) + 0.8`` rule.
    """

    window: int = 21
    c: float = 10.0
    sigma: float | None = None

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def effective_sigma(self) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        return 0.3 * ((self.window - 1) * 0.5 - 1) + 0.8


@dataclass(frozen=True)
class ComponentRegion:
    pixel_count: int
    centroid: Point
    bbox: BoundingBox


def global_threshold(img, t: float = 127) -> np.ndarray:
    """Ink mask of pixels strictly darker than ``t``."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must lie in [0, 255], got {t}")
    return as_gray(img) < t


def gaussian_kernel(window: int, sigma: float) -> np.ndarray:
    """1-D Gaussian weights of length ``window`` summing to one."""
    half = (window - 1) / 2.0
    x = np.arange(window, dtype=np.float64) - half
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def adaptive_threshold(img, p: AdaptiveThresholdParams | None = None) -> np.ndarray:
    """Mark pixels darker than their Gaussian-weighted neighborhood mean minus ``c``.

    The 2-D window is the outer product of two normalized 1-D kernels, so it
    is applied separably. Borders replicate the edge pixels.
    """
    p = p or AdaptiveThresholdParams()
    gray = as_gray(img)
    k = gaussian_kernel(p.window, p.effective_sigma)
    f = gray.astype(np.float64)
    local = ndimage.correlate1d(f, k, axis=0, mode="nearest")
    local = ndimage.correlate1d(local, k, axis=1, mode="nearest")
    return f < local - p.c - _THRESH_EPS


def dilate(mask, radius: int) -> np.ndarray:
    """Binary dilation by a (2r+1) x (2r+1) square."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    m = as_mask(mask)
    if radius == 0 or not m.any():
        return m.copy()
    size = 2 * radius + 1
    return ndimage.maximum_filter(m, size=size, mode="constant", cval=False)


_EIGHT = np.ones((3, 3), dtype=bool)


def connected_components(mask) -> list[ComponentRegion]:
    """8-connected regions, ordered by the top-left corner of their bounding box."""
    m = as_mask(mask)
    labels, n = ndimage.label(m, structure=_EIGHT)
    if n == 0:
        return []
    regions = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        sub = labels[sl] == lab
        ys, xs = np.nonzero(sub)
        ys = ys + sl[0].start
        xs = xs + sl[1].start
        first = int(ys[0]) * m.shape[1] + int(xs[0])
        region = ComponentRegion(
            pixel_count=int(len(xs)),
            centroid=Point(float(xs.mean()), float(ys.mean())),
            bbox=BoundingBox(
                float(sl[1].start), float(sl[0].start), float(sl[1].stop), float(sl[0].stop)
            ),
        )
        regions.append(((sl[0].start, sl[1].start, first), region))
    regions.sort(key=lambda item: item[0])
    return [r for _, r in regions]


def intersect_masks(a, b) -> np.ndarray:
    a = as_mask(a)
    b = as_mask(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a & b


def _box_index_range(lo: float, hi: float, size: int) -> tuple[int, int]:
    # pixel centers sit on integer coordinates; [start, stop) in index space
    start = max(int(np.ceil(lo)), 0)
    stop = min(int(np.floor(hi)) + 1, size)
    return start, stop


def erase_regions(img, boxes: Iterable[BoundingBox]) -> np.ndarray:
    """Copy of ``img`` with every pixel covered by a box painted white.

    A pixel at integer position (x, y) is covered when
    ``x_min <= x <= x_max`` and ``y_min <= y <= y_max``. Boxes are clamped.
    """
    out = as_gray(img).copy()
    h, w = out.shape
    for b in boxes:
        x0, x1 = _box_index_range(b.x_min, b.x_max, w)
        y0, y1 = _box_index_range(b.y_min, b.y_max, h)
        if x0 < x1 and y0 < y1:
            out[y0:y1, x0:x1] = 255
    return out


def _perimeter_distance(xs: np.ndarray, ys: np.ndarray, b: BoundingBox) -> np.ndarray:
    """Chebyshev distance from pixel centers to the boundary of ``b``."""
    inside = (xs >= b.x_min) & (xs <= b.x_max) & (ys >= b.y_min) & (ys <= b.y_max)
    d_in = np.minimum.reduce([xs - b.x_min, b.x_max - xs, ys - b.y_min, b.y_max - ys])
    dx = np.maximum.reduce([b.x_min - xs, np.zeros_like(xs), xs - b.x_max])
    dy = np.maximum.reduce([b.y_min - ys, np.zeros_like(ys), ys - b.y_max])
    return np.where(inside, d_in, np.maximum(dx, dy))


def render_box_perimeters(
    boxes: Sequence[BoundingBox], shape: tuple[int, int], stroke: float = 3
) -> np.ndarray:
    """Mask of pixels within ``stroke / 2`` (Chebyshev) of any box edge.

    ``shape`` is ``(height, width)``.
    """
    if stroke < 1:
        raise ValueError(f"stroke must be >= 1, got {stroke}")
    h, w = shape
    out = np.zeros((h, w), dtype=bool)
    half = stroke / 2.0
    for b in boxes:
        x0, x1 = _box_index_range(b.x_min - half, b.x_max + half, w)
        y0, y1 = _box_index_range(b.y_min - half, b.y_max + half, h)
        if x0 >= x1 or y0 >= y1:
            continue
        ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float64)
        out[y0:y1, x0:x1] |= _perimeter_distance(xs, ys, b) <= half
    return out


def perimeter_distance(p: Point, b: BoundingBox) -> float:
    """Euclidean distance from a point to the boundary of a box."""
    x, y = p.x, p.y
    if b.x_min <= x <= b.x_max and b.y_min <= y <= b.y_max:
        return float(min(x - b.x_min, b.x_max - x, y - b.y_min, b.y_max - y))
    dx = max(b.x_min - x, 0.0, x - b.x_max)
    dy = max(b.y_min - y, 0.0, y - b.y_max)
    return float(np.hypot(dx, dy))


def mask_points(mask) -> list[Point]:
    """Foreground pixel coordinates in raster order."""
    ys, xs = np.nonzero(as_mask(mask))
    return [Point(float(x), float(y)) for x, y in zip(xs, ys)]
