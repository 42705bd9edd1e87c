"""Terminal recognition, node recognition and netlist assembly.

Stages, in the order :func:`reconstruct` runs them:

``filter``    drop detections scoring below the threshold
``terminals`` ink x box-perimeter evidence, k-means with k = 2 x components
``nodes``     erase components, Hough segments, H x V crossings, dilate,
              count regions, k-means with k = region count
``mapping``   each terminal to its nearest node
``linking``   merge nodes holding fewer than two terminals into neighbours
``netlist``   designators and dense net ids
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .clustering import KMeansParams, kmeans
from .detection import DetectionSet, filter_by_score
from .geometry import (
    BoundingBox,
    LineSegment,
    Orientation,
    Point,
    euclidean_distance,
    line_intersection,
    point_on_both_segments,
    segment_orientation,
)
from .hough import HoughParams, detect_line_segments
from .netlist import Netlist, NetlistComponent
from .raster import (
    AdaptiveThresholdParams,
    adaptive_threshold,
    as_gray,
    connected_components,
    dilate,
    erase_regions,
    intersect_masks,
    perimeter_distance,
    render_box_perimeters,
)


class PipelineError(RuntimeError):
    stage = "pipeline"

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    def __str__(self) -> str:
        return f"[{self.stage}] {super().__str__()}"


class InsufficientTerminalEvidence(PipelineError):
    stage = "terminals"


class NoNodesFound(PipelineError):
    stage = "nodes"


class DegenerateComponent(PipelineError):
    stage = "netlist"


@dataclass(frozen=True)
class PipelineParams:
    adaptive: AdaptiveThresholdParams = field(default_factory=AdaptiveThresholdParams)
    hough: HoughParams = field(default_factory=HoughParams)
    kmeans_seed: int = 0
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4
    perimeter_stroke: float = 3
    node_dilate_radius: int = 6
    erase_margin: int = 2
    erase_before_threshold: bool = True
    containment_tol: float = 2.0
    pooled_containment: bool = False
    link_by_wires: bool = True
    wire_tol: float = 8.0
    score_threshold: float = 0.5

    def __post_init__(self):
        if self.perimeter_stroke < 1:
            raise ValueError("perimeter_stroke must be >= 1")
        if self.erase_margin < 0:
            raise ValueError("erase_margin must be >= 0")
        if self.node_dilate_radius < 0:
            raise ValueError("node_dilate_radius must be >= 0")
        if self.containment_tol < 0:
            raise ValueError("containment_tol must be >= 0")
        if self.wire_tol < 0:
            raise ValueError("wire_tol must be >= 0")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must lie in [0, 1]")

    def kmeans(self, k: int) -> KMeansParams:
        return KMeansParams(k=k, seed=self.kmeans_seed, max_iter=self.kmeans_max_iter, tol=self.kmeans_tol)


@dataclass(frozen=True)
class Terminal:
    id: int
    point: Point
    component_id: int


@dataclass(frozen=True)
class Node:
    id: int
    point: Point


@dataclass(frozen=True)
class NodeDetection:
    """Node stage output plus the intermediates the debug overlays draw."""

    nodes: list[Node]
    segments: list[LineSegment]
    intersections: list[Point]
    region_count: int


@dataclass(frozen=True)
class NetPartition:
    net_of_node: tuple[int, ...]

    @property
    def groups(self) -> list[tuple[int, ...]]:
        out: dict[int, list[int]] = {}
        for node, net in enumerate(self.net_of_node):
            out.setdefault(net, []).append(node)
        return [tuple(v) for _, v in sorted(out.items())]


@dataclass
class Reconstruction:
    netlist: Netlist
    terminals: list[Terminal]
    nodes: list[Node]
    diagnostics: dict
    segments: list[LineSegment] = field(default_factory=list)
    intersections: list[Point] = field(default_factory=list)


def _check_dims(img: np.ndarray, dets: DetectionSet) -> None:
    if img.shape != (dets.height, dets.width):
        raise ValueError(
            f"image is {img.shape[1]}x{img.shape[0]} but detections say {dets.width}x{dets.height}"
        )


def _order_pair(points: list[Point], box) -> list[Point]:
    # along the component's long axis, so the pair order is stable under jitter
    if box.x_max - box.x_min >= box.y_max - box.y_min:
        return sorted(points, key=lambda q: (q.x, q.y))
    return sorted(points, key=lambda q: (q.y, q.x))


def _evidence_points(mask: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(mask)
    return np.column_stack([xs, ys]).astype(np.float64)


def recognize_terminals(img, dets: DetectionSet, p: PipelineParams | None = None) -> list[Terminal]:
    """Two terminals per detected component, where wires cross its box outline."""
    p = p or PipelineParams()
    img = as_gray(img)
    n = len(dets)
    if n == 0:
        raise InsufficientTerminalEvidence("no detections to attach terminals to")
    _check_dims(img, dets)
    boxes = dets.boxes
    ink = adaptive_threshold(img, p.adaptive)
    evidence = intersect_masks(ink, render_box_perimeters(boxes, img.shape, p.perimeter_stroke))
    pts = _evidence_points(evidence)
    if len(pts) < 2 * n:
        raise InsufficientTerminalEvidence(
            f"{len(pts)} evidence pixels on box outlines, need at least {2 * n}"
        )
    res = kmeans(pts, p.kmeans(2 * n))

    owned: list[list[Point]] = [[] for _ in range(n)]
    for c in res.centroids:
        dists = [perimeter_distance(c, b) for b in boxes]
        owned[int(np.argmin(dists))].append(c)

    for i, pair in enumerate(owned):
        if len(pair) == 2:
            continue
        own = intersect_masks(ink, render_box_perimeters([boxes[i]], img.shape, p.perimeter_stroke))
        own_pts = _evidence_points(own)
        if len(own_pts) < 2:
            raise InsufficientTerminalEvidence(
                f"component {i}: {len(own_pts)} evidence pixels on its outline, need 2"
            )
        owned[i] = kmeans(own_pts, p.kmeans(2)).centroids

    terminals = []
    for i, pair in enumerate(owned):
        for point in _order_pair(pair, boxes[i]):
            terminals.append(Terminal(len(terminals), point, i))
    return terminals


def erased_wire_mask(img: np.ndarray, boxes, p: PipelineParams) -> np.ndarray:
    """Ink mask with every component box whited out.

    The boxes are painted white in the image, which is then thresholded.
    The white raises the local mean just outside each box, so noisy paper
    pixels along the rim flip to ink and form a broken outline. The mask is
    cleared again over the boxes grown by ``erase_margin`` to remove it.
    With ``erase_before_threshold`` off the raw image is thresholded and
    only the mask is cleared.
    """
    m = p.erase_margin
    grown = [BoundingBox(b.x_min - m, b.y_min - m, b.x_max + m, b.y_max + m) for b in boxes]
    if p.erase_before_threshold:
        ink = adaptive_threshold(erase_regions(img, boxes), p.adaptive)
    else:
        ink = adaptive_threshold(img, p.adaptive)
    return erase_regions(np.where(ink, 0, 255).astype(np.uint8), grown) == 0


def detect_nodes(img, dets: DetectionSet, p: PipelineParams | None = None) -> NodeDetection:
    p = p or PipelineParams()
    img = as_gray(img)
    _check_dims(img, dets)
    wires = erased_wire_mask(img, dets.boxes, p)
    segments = detect_line_segments(wires, p.hough)
    horiz = [s for s in segments if segment_orientation(s) is Orientation.HORIZONTAL]
    vert = [s for s in segments if segment_orientation(s) is Orientation.VERTICAL]

    crossings = []
    for hs in horiz:
        for vs in vert:
            q = line_intersection(hs, vs)
            if q is not None and point_on_both_segments(
                q, hs, vs, p.containment_tol, pooled=p.pooled_containment
            ):
                crossings.append(q)
    if not crossings:
        raise NoNodesFound(
            f"no valid crossings among {len(horiz)} horizontal and {len(vert)} vertical segments"
        )

    h, w = img.shape
    dots = np.zeros((h, w), dtype=bool)
    for q in crossings:
        x = min(max(int(np.floor(q.x + 0.5)), 0), w - 1)
        y = min(max(int(np.floor(q.y + 0.5)), 0), h - 1)
        dots[y, x] = True
    regions = connected_components(dilate(dots, p.node_dilate_radius))
    res = kmeans(crossings, p.kmeans(len(regions)))
    centers = sorted(res.centroids, key=lambda c: (c.y, c.x))
    nodes = [Node(i, c) for i, c in enumerate(centers)]
    return NodeDetection(nodes, segments, crossings, len(regions))


def recognize_nodes(img, dets: DetectionSet, p: PipelineParams | None = None) -> list[Node]:
    """Wire junctions and corners, ids in (y, x) order."""
    return detect_nodes(img, dets, p).nodes


def map_terminals_to_nodes(terminals: list[Terminal], nodes: list[Node]) -> dict[int, int]:
    """Nearest node for every terminal; ties go to the lower node id."""
    if not nodes:
        raise ValueError("no nodes to map terminals onto")
    ordered = sorted(nodes, key=lambda nd: nd.id)
    mapping = {}
    for t in terminals:
        best = min(ordered, key=lambda nd: (euclidean_distance(t.point, nd.point), nd.id))
        mapping[t.id] = best.id
    return mapping


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _point_segment_distance(q: Point, s: LineSegment) -> float:
    dx, dy = s.p2.x - s.p1.x, s.p2.y - s.p1.y
    t = ((q.x - s.p1.x) * dx + (q.y - s.p1.y) * dy) / (dx * dx + dy * dy)
    t = min(max(t, 0.0), 1.0)
    return float(np.hypot(q.x - s.p1.x - t * dx, q.y - s.p1.y - t * dy))


def wired_pairs(nodes: list[Node], segments: list[LineSegment], tol: float = 8.0) -> set[tuple[int, int]]:
    """Node id pairs (low, high) that one detected segment passes within ``tol`` of."""
    out = set()
    for s in segments:
        near = [nd.id for nd in nodes if _point_segment_distance(nd.point, s) <= tol]
        for i, a in enumerate(near):
            for b in near[i + 1:]:
                out.add((min(a, b), max(a, b)))
    return out


def link_underconnected_nodes(
    mapping: dict[int, int],
    nodes: list[Node],
    terminals: list[Terminal] | None = None,
    wired: set[tuple[int, int]] | None = None,
) -> NetPartition:
    """Merge nodes carrying fewer than two terminals into nearby nodes.

    Repeats until every net holds at least two terminals or a single net is
    left. The net processed next is the one containing the lowest-id
    under-connected node; it joins the nearest node outside it (ties by
    lower id). With ``terminals`` given, partners that would put both ends
    of one component on the same net are passed over while another
    candidate exists. With ``wired`` given (node id pairs joined by a
    detected wire), a wired partner beats a merely closer one.
    """
    n = len(nodes)
    by_id = {nd.id: nd for nd in nodes}
    ids = sorted(by_id)
    index = {nid: i for i, nid in enumerate(ids)}
    uf = _UnionFind(n)
    count = [0] * n
    comps: list[set[int]] = [set() for _ in range(n)]
    owner = {t.id: t.component_id for t in terminals} if terminals is not None else {}
    for tid, nid in mapping.items():
        count[index[nid]] += 1
        if tid in owner:
            comps[index[nid]].add(owner[tid])

    while True:
        roots = {uf.find(i) for i in range(n)}
        if len(roots) <= 1:
            break
        under = next((i for i in range(n) if count[uf.find(i)] < 2), None)
        if under is None:
            break
        root = uf.find(under)
        members = [i for i in range(n) if uf.find(i) == root]
        best = None
        for u in members:
            pu = by_id[ids[u]].point
            for v in range(n):
                rv = uf.find(v)
                if rv == root:
                    continue
                shorts = bool(comps[root] & comps[rv])
                unwired = wired is not None and (min(ids[u], ids[v]), max(ids[u], ids[v])) not in wired
                key = (shorts, unwired, euclidean_distance(pu, by_id[ids[v]].point), v, u)
                if best is None or key < best:
                    best = key
        v = best[3]
        rv = uf.find(v)
        merged_count = count[root] + count[rv]
        merged_comps = comps[root] | comps[rv]
        uf.union(root, rv)
        r = uf.find(root)
        count[r] = merged_count
        comps[r] = merged_comps

    roots = sorted({uf.find(i) for i in range(n)})
    dense = {r: k for k, r in enumerate(roots)}
    return NetPartition(tuple(dense[uf.find(index[nid])] for nid in ids))


def build_netlist(
    dets: DetectionSet,
    terminals: list[Terminal],
    mapping: dict[int, int],
    partition: NetPartition,
    nodes: list[Node],
) -> Netlist:
    """Assign designators and renumber nets densely by their top-left node."""
    node_pos = {nd.id: i for i, nd in enumerate(sorted(nodes, key=lambda nd: nd.id))}
    points = {nd.id: nd.point for nd in nodes}
    per_comp: dict[int, list[Terminal]] = {}
    for t in terminals:
        per_comp.setdefault(t.component_id, []).append(t)

    raw_nets = []
    for i in range(len(dets)):
        pair = sorted(per_comp.get(i, []), key=lambda t: t.id)
        if len(pair) != 2:
            raise DegenerateComponent(f"component {i} has {len(pair)} terminals, expected 2")
        raw_nets.append(tuple(partition.net_of_node[node_pos[mapping[t.id]]] for t in pair))

    used = sorted({net for pair in raw_nets for net in pair})
    anchor = {}
    for nid, pos in node_pos.items():
        net = partition.net_of_node[pos]
        if net in used:
            key = (points[nid].y, points[nid].x)
            if net not in anchor or key < anchor[net]:
                anchor[net] = key
    order = sorted(used, key=lambda net: anchor[net])
    dense = {net: k for k, net in enumerate(order)}

    if len(order) > 1:
        for i, (a, b) in enumerate(raw_nets):
            if a == b:
                raise DegenerateComponent(
                    f"component {i} ({dets.detections[i].cls.value}) has both terminals on one net"
                )

    counters: dict = {}
    comps = []
    for det, (a, b) in zip(dets.detections, raw_nets):
        counters[det.cls] = counters.get(det.cls, 0) + 1
        comps.append(
            NetlistComponent(det.cls, f"{det.cls.prefix}{counters[det.cls]}", dense[a], dense[b])
        )
    net_points = tuple(Point(anchor[net][1], anchor[net][0]) for net in order)
    return Netlist(tuple(comps), net_points)


def reconstruct(img, dets: DetectionSet, p: PipelineParams | None = None) -> Reconstruction:
    """Run every stage and collect per-stage timings and counts."""
    p = p or PipelineParams()
    img = as_gray(img)
    timings: dict[str, float] = {}
    counts: dict[str, int] = {"detections_in": len(dets)}

    def run(stage, fn, *args):
        t0 = time.perf_counter()
        try:
            out = fn(*args)
        except PipelineError as exc:
            exc.stage = stage
            raise
        except Exception as exc:
            raise PipelineError(f"{type(exc).__name__}: {exc}", stage=stage) from exc
        finally:
            timings[stage] = time.perf_counter() - t0
        return out

    kept = run("filter", filter_by_score, dets, p.score_threshold)
    counts["detections_kept"] = len(kept)
    terminals = run("terminals", recognize_terminals, img, kept, p)
    counts["terminals"] = len(terminals)
    found = run("nodes", detect_nodes, img, kept, p)
    counts["segments"] = len(found.segments)
    counts["intersections"] = len(found.intersections)
    counts["node_regions"] = found.region_count
    counts["nodes"] = len(found.nodes)
    mapping = run("mapping", map_terminals_to_nodes, terminals, found.nodes)
    wired = wired_pairs(found.nodes, found.segments, p.wire_tol) if p.link_by_wires else None
    partition = run("linking", link_underconnected_nodes, mapping, found.nodes, terminals, wired)
    netlist = run("netlist", build_netlist, kept, terminals, mapping, partition, found.nodes)
    counts["nets"] = netlist.net_count
    timings["total"] = sum(timings.values())
    return Reconstruction(
        netlist=netlist,
        terminals=terminals,
        nodes=found.nodes,
        diagnostics={"timings": timings, "counts": counts},
        segments=found.segments,
        intersections=found.intersections,
    )
