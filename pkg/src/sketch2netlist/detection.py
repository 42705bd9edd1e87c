"""Component detections: JSON ingestion, serialization and score filtering.

The detector itself is external. Its output (or a ground-truth label
file, which is the same document without scores) looks like::

    {"image": "scan_01.pgm", "width": 416, "height": 416,
     "detections": [{"class": "resistor", "score": 0.97,
                     "bbox": [x_min, y_min, x_max, y_max]}]}
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field, replace

from .geometry import BoundingBox


class DetectionError(ValueError):
    pass


class ParseError(DetectionError):
    pass


class UnknownClass(DetectionError):
    pass


class InvalidBox(DetectionError):
    pass


class ComponentClass(enum.Enum):
    VOLTAGE_SOURCE = "voltage_source"
    RESISTOR = "resistor"
    CAPACITOR = "capacitor"
    INDUCTOR = "inductor"
    DIODE = "diode"

    @property
    def prefix(self) -> str:
        return _PREFIX[self]

    @classmethod
    def from_prefix(cls, prefix: str) -> "ComponentClass":
        for c, p in _PREFIX.items():
            if p == prefix:
                return c
        raise UnknownClass(f"unknown designator prefix {prefix!r}")

    @classmethod
    def parse(cls, name: str) -> "ComponentClass":
        try:
            return cls(name)
        except ValueError:
            raise UnknownClass(f"unknown component class {name!r}") from None


_PREFIX = {
    ComponentClass.VOLTAGE_SOURCE: "V",
    ComponentClass.RESISTOR: "R",
    ComponentClass.CAPACITOR: "C",
    ComponentClass.INDUCTOR: "L",
    ComponentClass.DIODE: "D",
}

CLASSES = tuple(ComponentClass)


@dataclass(frozen=True)
class Detection:
    cls: ComponentClass
    bbox: BoundingBox
    score: float | None = None

    def __post_init__(self):
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise DetectionError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectionSet:
    image: str
    width: int
    height: int
    detections: tuple[Detection, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.detections)

    def __iter__(self):
        return iter(self.detections)

    @property
    def boxes(self) -> list[BoundingBox]:
        return [d.bbox for d in self.detections]


def _clamp_box(raw, width: int, height: int) -> BoundingBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise InvalidBox(f"bbox must be four numbers, got {raw!r}")
    try:
        x0, y0, x1, y1 = (float(v) for v in raw)
    except (TypeError, ValueError):
        raise InvalidBox(f"bbox must be four numbers, got {raw!r}") from None
    if not all(math.isfinite(v) for v in (x0, y0, x1, y1)):
        raise InvalidBox(f"non-finite bbox {raw!r}")
    if x0 >= x1 or y0 >= y1:
        raise InvalidBox(f"empty bbox {raw!r}")
    cx0, cy0 = max(x0, 0.0), max(y0, 0.0)
    cx1, cy1 = min(x1, float(width)), min(y1, float(height))
    if cx0 >= cx1 or cy0 >= cy1:
        raise InvalidBox(f"bbox {raw!r} lies outside the {width}x{height} image")
    return BoundingBox(cx0, cy0, cx1, cy1)


def parse_detections(doc: dict, require_score: bool = False) -> DetectionSet:
    """Build a :class:`DetectionSet` from an already-decoded JSON document.

    A missing ``score`` is read as 1.0 unless ``require_score`` is set, so a
    ground-truth file can stand in for perfect detections.
    """
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    try:
        image = doc["image"]
        width = doc["width"]
        height = doc["height"]
        entries = doc["detections"]
    except KeyError as exc:
        raise ParseError(f"missing key {exc}") from None
    if not isinstance(image, str):
        raise ParseError("'image' must be a string")
    if not (isinstance(width, int) and isinstance(height, int)) or width <= 0 or height <= 0:
        raise ParseError("'width'/'height' must be positive integers")
    if not isinstance(entries, list):
        raise ParseError("'detections' must be an array")
    dets = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict) or "class" not in e or "bbox" not in e:
            raise ParseError(f"detection {i} needs 'class' and 'bbox'")
        cls = ComponentClass.parse(e["class"])
        box = _clamp_box(e["bbox"], width, height)
        if "score" in e:
            score = e["score"]
            if isinstance(score, bool) or not isinstance(score, (int, float)):
                raise ParseError(f"detection {i}: score must be a number")
            score = float(score)
        elif require_score:
            raise ParseError(f"detection {i} has no score")
        else:
            score = 1.0
        dets.append(Detection(cls, box, score))
    return DetectionSet(image, width, height, tuple(dets))


def loads_detections(text: str, require_score: bool = False) -> DetectionSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    return parse_detections(doc, require_score=require_score)


def load_detections(path: str | os.PathLike, require_score: bool = False) -> DetectionSet:
    with open(path, "r", encoding="utf-8") as f:
        return loads_detections(f.read(), require_score=require_score)


def load_ground_truth(path: str | os.PathLike) -> DetectionSet:
    """Like :func:`load_detections` but drops any scores."""
    ds = load_detections(path)
    return replace(ds, detections=tuple(replace(d, score=None) for d in ds.detections))


def to_document(ds: DetectionSet) -> dict:
    entries = []
    for d in ds.detections:
        e = {"class": d.cls.value}
        if d.score is not None:
            e["score"] = d.score
        e["bbox"] = d.bbox.as_list()
        entries.append(e)
    return {"image": ds.image, "width": ds.width, "height": ds.height, "detections": entries}


def dumps_detections(ds: DetectionSet) -> str:
    """Canonical text: fixed key order, shortest round-trip floats, LF ending."""
    return json.dumps(to_document(ds), indent=2) + "\n"


def save_detections(path: str | os.PathLike, ds: DetectionSet) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_detections(ds))


def filter_by_score(ds: DetectionSet, threshold: float = 0.5) -> DetectionSet:
    """Keep detections scoring at least ``threshold``; order is preserved."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    kept = tuple(d for d in ds.detections if d.score is None or d.score >= threshold)
    return replace(ds, detections=kept)
