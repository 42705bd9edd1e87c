"""Pixel-space points, segments and boxes.

Coordinates follow image convention: origin top-left, y grows downward.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

PARALLEL_EPS = 1e-9


@dataclass(frozen=True, order=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class LineSegment:
    p1: Point
    p2: Point

    def __post_init__(self):
        if self.p1 == self.p2:
            raise ValueError("degenerate segment (p1 == p2)")

    @classmethod
    def from_coords(cls, x1: float, y1: float, x2: float, y2: float) -> "LineSegment":
        return cls(Point(x1, y1), Point(x2, y2))

    @property
    def length(self) -> float:
        return euclidean_distance(self.p1, self.p2)


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"invalid box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> Point:
        return Point((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


class Orientation(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


def segment_orientation(seg: LineSegment) -> Orientation:
    """Classify by the absolute angle to the x axis.

    Steeper than 45 degrees is vertical; exactly 45 degrees counts as
    horizontal. Comparing |dy| against |dx| is the same test without atan.
    """
    dx = abs(seg.p2.x - seg.p1.x)
    dy = abs(seg.p2.y - seg.p1.y)
    return Orientation.VERTICAL if dy > dx else Orientation.HORIZONTAL


def _line_coeffs(s: LineSegment) -> tuple[float, float, float]:
    a = s.p2.y - s.p1.y
    b = s.p1.x - s.p2.x
    c = a * s.p1.x + b * s.p1.y
    return a, b, c


def line_intersection(
    s1: LineSegment, s2: LineSegment, eps: float = PARALLEL_EPS
) -> Point | None:
    """Crossing point of the infinite lines through two segments.

    Returns ``None`` when the lines are parallel (|det| <= eps).
    """
    a1, b1, c1 = _line_coeffs(s1)
    a2, b2, c2 = _line_coeffs(s2)
    det = a1 * b2 - a2 * b1
    if abs(det) <= eps:
        return None
    return Point((b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det)


def _within(v: float, lo: float, hi: float, tol: float) -> bool:
    return min(lo, hi) - tol <= v <= max(lo, hi) + tol


def point_on_both_segments(
    p: Point, s1: LineSegment, s2: LineSegment, tol: float = 2.0, pooled: bool = False
) -> bool:
    """True if ``p`` falls inside each segment's axis-aligned extent (grown by ``tol``).

    ``pooled=True`` instead tests against the min/max over all four
    endpoints together, which is much looser.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if pooled:
        xs = (s1.p1.x, s1.p2.x, s2.p1.x, s2.p2.x)
        ys = (s1.p1.y, s1.p2.y, s2.p1.y, s2.p2.y)
        return (
            min(xs) - tol <= p.x <= max(xs) + tol and min(ys) - tol <= p.y <= max(ys) + tol
        )
    for s in (s1, s2):
        if not (_within(p.x, s.p1.x, s.p2.x, tol) and _within(p.y, s.p1.y, s.p2.y, tol)):
            return False
    return True


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def euclidean_distance(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)
