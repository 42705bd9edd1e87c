"""Seeded synthetic circuits with pixel-exact ground truth.

Layouts are rectilinear: a four-corner loop, or a ladder (loop plus one
middle rung) when there are four or more components. Every branch carries
at most one component; the rung always carries one. Wires run between
jittered node positions, so they are only nearly axis-aligned.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .detection import CLASSES, ComponentClass, Detection, DetectionSet, to_document
from .geometry import BoundingBox, Point
from .netlist import Netlist, NetlistComponent, format_netlist
from .pnm import encode_pgm

# glyph frame: axis along +x, centre at the origin
BOX_HALF_LONG = 30
BOX_HALF_SHORT = 20
# shortest bare wire between a node and a component box at the default
# canvas and jitter, kept well above the line detector's vote threshold
MIN_LEAD = 38


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    width: int = 416
    height: int = 416
    component_count: int | None = None  # None: drawn from 2..6
    jitter: float = 2.0
    stroke: float = 3.0

    def __post_init__(self):
        if self.component_count is not None and not 2 <= self.component_count <= 6:
            raise ValueError("component_count must lie in 2..6")
        if self.stroke <= 0 or self.jitter < 0:
            raise ValueError("stroke must be positive and jitter non-negative")
        if self.jitter >= 4 * self.stroke:
            raise ValueError("jitter must stay below 4 x stroke")
        if self.width < 300 or self.height < 300:
            raise ValueError("canvas must be at least 300x300")


@dataclass(frozen=True)
class SynthCase:
    image: np.ndarray
    detections: DetectionSet
    nodes: list[Point]
    netlist: Netlist
    terminals: list[Point] = field(default_factory=list)
    layout: str = "loop"


# --- drawing -------------------------------------------------------------


def _stroke_segment(ink: np.ndarray, p, q, radius: float) -> None:
    h, w = ink.shape
    x0 = max(int(math.floor(min(p[0], q[0]) - radius)), 0)
    x1 = min(int(math.ceil(max(p[0], q[0]) + radius)) + 1, w)
    y0 = max(int(math.floor(min(p[1], q[1]) - radius)), 0)
    y1 = min(int(math.ceil(max(p[1], q[1]) + radius)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    dx, dy = q[0] - p[0], q[1] - p[1]
    ll = dx * dx + dy * dy
    if ll == 0:
        t = np.zeros_like(xs)
    else:
        t = np.clip(((xs - p[0]) * dx + (ys - p[1]) * dy) / ll, 0.0, 1.0)
    d2 = (xs - p[0] - t * dx) ** 2 + (ys - p[1] - t * dy) ** 2
    ink[y0:y1, x0:x1] |= d2 <= radius * radius


def _polyline(ink, pts, radius):
    for a, b in zip(pts[:-1], pts[1:]):
        _stroke_segment(ink, a, b, radius)


def _arc(cx, cy, r, t0, t1, n=16):
    return [(cx + r * math.cos(t), cy + r * math.sin(t)) for t in np.linspace(t0, t1, n + 1)]


def _glyph(cls: ComponentClass) -> list[list[tuple[float, float]]]:
    """Polylines in the local frame, leads included (they start at the box edge)."""
    L = BOX_HALF_LONG
    if cls is ComponentClass.RESISTOR:
        zig = [(-18, 0), (-15, -8), (-9, 8), (-3, -8), (3, 8), (9, -8), (15, 8), (18, 0)]
        return [[(-L, 0), (-18, 0)], zig, [(18, 0), (L, 0)]]
    if cls is ComponentClass.VOLTAGE_SOURCE:
        ring = _arc(0, 0, 13, 0, 2 * math.pi, 48)
        plus = [[(-7, -3), (-1, -3)], [(-4, -6), (-4, 0)]]
        minus = [[(2, 3), (8, 3)]]
        return [[(-L, 0), (-13, 0)], ring, [(13, 0), (L, 0)], *plus, *minus]
    if cls is ComponentClass.CAPACITOR:
        return [[(-L, 0), (-4, 0)], [(-4, -12), (-4, 12)], [(4, -12), (4, 12)], [(4, 0), (L, 0)]]
    if cls is ComponentClass.INDUCTOR:
        bumps = []
        for c in (-13.5, -4.5, 4.5, 13.5):
            bumps.append(_arc(c, 0, 4.5, math.pi, 2 * math.pi, 12))
        return [[(-L, 0), (-18, 0)], *bumps, [(18, 0), (L, 0)]]
    if cls is ComponentClass.DIODE:
        tri = [(-9, -10), (-9, 10), (9, 0), (-9, -10)]
        return [[(-L, 0), (-9, 0)], tri, [(9, -10), (9, 10)], [(9, 0), (L, 0)]]
    raise ValueError(cls)


def _place(poly, cx, cy, vertical, flip):
    out = []
    for x, y in poly:
        if flip:
            x = -x
        if vertical:
            x, y = -y, x
        out.append((cx + x, cy + y))
    return out


# --- layout --------------------------------------------------------------

_LOOP_EDGES = [("TL", "TR"), ("TR", "BR"), ("BL", "BR"), ("TL", "BL")]
_LADDER_EDGES = [
    ("TL", "TM"),
    ("TM", "TR"),
    ("TR", "BR"),
    ("BM", "BR"),
    ("BL", "BM"),
    ("TL", "BL"),
    ("TM", "BM"),
]


def _nets(node_names, edges, comp_edges):
    parent = {n: n for n in node_names}

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for e in edges:
        if e not in comp_edges:
            ra, rb = find(e[0]), find(e[1])
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    return {n: find(n) for n in node_names}


def _valid(node_names, edges, comp_edges) -> bool:
    net = _nets(node_names, edges, comp_edges)
    counts: dict[str, int] = {}
    for a, b in comp_edges:
        if net[a] == net[b]:
            return False
        counts[net[a]] = counts.get(net[a], 0) + 1
        counts[net[b]] = counts.get(net[b], 0) + 1
    return all(c >= 2 for c in counts.values())


def generate_circuit(spec: SynthSpec) -> SynthCase:
    """Draw one circuit and return it with its ground truth."""
    rng = np.random.default_rng(spec.seed)
    W, H = spec.width, spec.height
    count = spec.component_count or int(rng.integers(2, 7))
    ladder = count >= 5 or (count == 4 and rng.random() < 0.5)

    # ladders sit wider so each half-span keeps MIN_LEAD of bare wire beside its box
    inset = (40, 55) if ladder else (50, 80)
    left = rng.uniform(*inset)
    right = rng.uniform(W - inset[1], W - inset[0])
    top = rng.uniform(50, 90)
    bottom = rng.uniform(H - 90, H - 50)
    pos = {"TL": (left, top), "TR": (right, top), "BL": (left, bottom), "BR": (right, bottom)}
    if ladder:
        mid = (left + right) / 2 + rng.uniform(-10, 10)
        pos["TM"] = (mid, top)
        pos["BM"] = (mid, bottom)
        edges = _LADDER_EDGES
    else:
        edges = _LOOP_EDGES
    j = spec.jitter
    pos = {k: (x + rng.uniform(-j, j), y + rng.uniform(-j, j)) for k, (x, y) in pos.items()}
    names = sorted(pos)

    for _ in range(1000):
        if ladder:
            rest = [e for e in edges if e != ("TM", "BM")]
            picks = rng.choice(len(rest), size=count - 1, replace=False)
            chosen = [("TM", "BM")] + [rest[i] for i in sorted(picks)]
        else:
            picks = rng.choice(len(edges), size=count, replace=False)
            chosen = [edges[i] for i in sorted(picks)]
        if _valid(names, edges, set(chosen)):
            break
    else:  # pragma: no cover - every count has valid layouts
        raise RuntimeError("no valid layout found")
    chosen_set = set(chosen)
    comp_edges = [e for e in edges if e in chosen_set]

    ink = np.zeros((H, W), dtype=bool)
    radius = spec.stroke / 2.0
    dets, gt_terms, comp_nets = [], [], []
    for a, b in edges:
        pa, pb = pos[a], pos[b]
        if (a, b) not in chosen_set:
            _stroke_segment(ink, pa, pb, radius)
            continue
        cls = CLASSES[int(rng.integers(len(CLASSES)))]
        cx, cy = (pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2
        vertical = abs(pb[1] - pa[1]) > abs(pb[0] - pa[0])
        flip = bool(rng.random() < 0.5)
        for poly in _glyph(cls):
            _polyline(ink, _place(poly, cx, cy, vertical, flip), radius)
        if vertical:
            box = BoundingBox(cx - BOX_HALF_SHORT, cy - BOX_HALF_LONG, cx + BOX_HALF_SHORT, cy + BOX_HALF_LONG)
            ca, cb = (cx, cy - BOX_HALF_LONG), (cx, cy + BOX_HALF_LONG)
        else:
            box = BoundingBox(cx - BOX_HALF_LONG, cy - BOX_HALF_SHORT, cx + BOX_HALF_LONG, cy + BOX_HALF_SHORT)
            ca, cb = (cx - BOX_HALF_LONG, cy), (cx + BOX_HALF_LONG, cy)
        # wires from each node to the point where the lead crosses the box
        _stroke_segment(ink, pa, ca, radius)
        _stroke_segment(ink, cb, pb, radius)
        dets.append(Detection(cls, box, None))
        gt_terms.extend([Point(*ca), Point(*cb)])
        comp_nets.append((a, b))

    net_of = _nets(names, edges, chosen_set)
    node_names = sorted(pos, key=lambda n: (pos[n][1], pos[n][0]))
    nodes = [Point(*pos[n]) for n in node_names]

    # dense net ids ordered by each net's top-left node
    anchor: dict[str, tuple[float, float]] = {}
    for n in node_names:
        r = net_of[n]
        key = (pos[n][1], pos[n][0])
        if r not in anchor or key < anchor[r]:
            anchor[r] = key
    used = sorted({net_of[n] for e in comp_nets for n in e}, key=lambda r: anchor[r])
    dense = {r: i for i, r in enumerate(used)}
    counters: dict[ComponentClass, int] = {}
    comps = []
    for det, (a, b) in zip(dets, comp_nets):
        counters[det.cls] = counters.get(det.cls, 0) + 1
        comps.append(
            NetlistComponent(det.cls, f"{det.cls.prefix}{counters[det.cls]}", dense[net_of[a]], dense[net_of[b]])
        )
    netlist = Netlist(tuple(comps), tuple(Point(anchor[r][1], anchor[r][0]) for r in used))

    # paper with a gentle lighting gradient and sensor noise
    ink_level = rng.uniform(0, 50)
    gx, gy = rng.uniform(-30, 30, size=2)
    ys, xs = np.mgrid[0:H, 0:W].astype(np.float64)
    paper = 240 + gx * (xs / W - 0.5) + gy * (ys / H - 0.5)
    img = np.where(ink, ink_level, paper) + rng.normal(0, 2.0, size=(H, W))
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    name = f"synth_{spec.seed}.pgm"
    return SynthCase(
        image=img,
        detections=DetectionSet(name, W, H, tuple(dets)),
        nodes=nodes,
        netlist=netlist,
        terminals=gt_terms,
        layout="ladder" if ladder else "loop",
    )


def ground_truth_document(case: SynthCase, image_name: str | None = None) -> dict:
    doc = to_document(case.detections)
    if image_name is not None:
        doc["image"] = image_name
    doc["nodes"] = [[p.x, p.y] for p in case.nodes]
    doc["terminals"] = [[p.x, p.y] for p in case.terminals]
    return doc


def write_case(case: SynthCase, out_dir: str | os.PathLike, case_id: int) -> dict[str, str]:
    """Write ``case_NNNN.pgm``, ``case_NNNN.json`` and ``case_NNNN.net``."""
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, f"case_{case_id:04d}")
    paths = {"image": stem + ".pgm", "truth": stem + ".json", "netlist": stem + ".net"}
    with open(paths["image"], "wb") as f:
        f.write(encode_pgm(case.image))
    with open(paths["truth"], "w", encoding="utf-8", newline="\n") as f:
        json.dump(ground_truth_document(case, os.path.basename(paths["image"])), f, indent=2)
        f.write("\n")
    with open(paths["netlist"], "w", encoding="utf-8", newline="\n") as f:
        f.write(format_netlist(case.netlist))
    return paths
