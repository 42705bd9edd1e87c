import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketch2netlist.detection import ComponentClass, Detection, DetectionSet
from sketch2netlist.geometry import BoundingBox, LineSegment, Point, euclidean_distance
from sketch2netlist.metrics import netlist_equivalence
from sketch2netlist.netlist import format_netlist
from sketch2netlist.pipeline import (
    DegenerateComponent,
    InsufficientTerminalEvidence,
    NetPartition,
    Node,
    NoNodesFound,
    PipelineError,
    PipelineParams,
    Terminal,
    build_netlist,
    erased_wire_mask,
    link_underconnected_nodes,
    map_terminals_to_nodes,
    recognize_nodes,
    recognize_terminals,
    reconstruct,
    wired_pairs,
)
from sketch2netlist.synth import SynthSpec, generate_circuit

R, V = ComponentClass.RESISTOR, ComponentClass.VOLTAGE_SOURCE


def dset(*items, size=200):
    return DetectionSet("t.pgm", size, size, tuple(Detection(c, BoundingBox(*b), 1.0) for c, b in items))


def nodes_at(*pts):
    return [Node(i, Point(*p)) for i, p in enumerate(pts)]


def draw(size, *rects):
    img = np.full((size, size), 235, np.uint8)
    for x0, y0, x1, y1 in rects:
        img[y0:y1, x0:x1] = 20
    return img


class TestParams:
    @pytest.mark.parametrize(
        "bad", [dict(perimeter_stroke=0.5), dict(erase_margin=-1), dict(node_dilate_radius=-2),
                dict(containment_tol=-1), dict(wire_tol=-1), dict(score_threshold=2)]
    )
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            PipelineParams(**bad)


class TestTerminals:
    def test_left_right_loop(self):
        case = generate_circuit(SynthSpec(seed=0, component_count=2, jitter=0))
        terms = recognize_terminals(case.image, case.detections)
        assert len(terms) == 4
        for t in terms:
            truth = case.terminals[2 * t.component_id : 2 * t.component_id + 2]
            assert min(euclidean_distance(t.point, g) for g in truth) <= 3

    @pytest.mark.parametrize("seed", range(8))
    def test_two_per_component(self, seed):
        case = generate_circuit(SynthSpec(seed=seed))
        terms = recognize_terminals(case.image, case.detections)
        assert len(terms) == 2 * len(case.detections)
        for i in range(len(case.detections)):
            assert sum(t.component_id == i for t in terms) == 2
        assert [t.id for t in terms] == list(range(len(terms)))

    def test_no_ink_on_perimeters(self):
        img = draw(200, (10, 100, 40, 103))
        with pytest.raises(InsufficientTerminalEvidence):
            recognize_terminals(img, dset((R, (80, 80, 140, 120))))

    def test_empty_detections(self):
        with pytest.raises(InsufficientTerminalEvidence):
            recognize_terminals(draw(50), dset(size=50))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            recognize_terminals(draw(100), dset((R, (10, 10, 50, 30))))


class TestNodes:
    def test_four_corners(self):
        case = generate_circuit(SynthSpec(seed=3, component_count=2, jitter=0))
        nodes = recognize_nodes(case.image, case.detections)
        assert len(nodes) == 4
        for nd, truth in zip(nodes, case.nodes):
            assert euclidean_distance(nd.point, truth) <= 5
        assert [nd.id for nd in nodes] == [0, 1, 2, 3]

    def test_t_junction(self):
        img = draw(200, (20, 99, 181, 102), (99, 99, 102, 181))
        nodes = recognize_nodes(img, dset())
        assert len(nodes) == 1
        assert euclidean_distance(nodes[0].point, Point(100, 100)) <= 3

    def test_blank(self):
        with pytest.raises(NoNodesFound):
            recognize_nodes(draw(120), dset(size=120))

    def test_ids_in_row_major_order(self):
        case = generate_circuit(SynthSpec(seed=11))
        pts = [nd.point for nd in recognize_nodes(case.image, case.detections)]
        assert pts == sorted(pts, key=lambda q: (q.y, q.x))


def test_erased_mask_clears_boxes_and_rims():
    case = generate_circuit(SynthSpec(seed=5))
    p = PipelineParams()
    wires = erased_wire_mask(case.image, case.detections.boxes, p)
    m = p.erase_margin
    for b in case.detections.boxes:
        x0, y0 = int(np.ceil(b.x_min - m)), int(np.ceil(b.y_min - m))
        x1, y1 = int(np.floor(b.x_max + m)), int(np.floor(b.y_max + m))
        assert not wires[max(y0, 0) : y1 + 1, max(x0, 0) : x1 + 1].any()
    # the wires themselves survive
    for q in case.nodes:
        assert wires[int(round(q.y)) - 2 : int(round(q.y)) + 3, int(round(q.x)) - 2 : int(round(q.x)) + 3].any()


class TestMapping:
    def test_nearest(self):
        t = [Terminal(0, Point(10, 10), 0)]
        assert map_terminals_to_nodes(t, nodes_at((12, 10), (100, 100))) == {0: 0}

    def test_tie_goes_to_lower_id(self):
        t = [Terminal(0, Point(5, 0), 0)]
        assert map_terminals_to_nodes(t, nodes_at((10, 0), (0, 0))) == {0: 0}

    def test_needs_nodes(self):
        with pytest.raises(ValueError):
            map_terminals_to_nodes([], [])

    @given(
        st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=8, unique=True),
        st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=8),
        st.randoms(),
    )
    def test_total_and_order_free(self, node_pts, term_pts, rnd):
        nodes = nodes_at(*node_pts)
        terms = [Terminal(i, Point(*p), 0) for i, p in enumerate(term_pts)]
        m = map_terminals_to_nodes(terms, nodes)
        assert sorted(m) == list(range(len(terms)))
        shuffled = list(nodes)
        rnd.shuffle(shuffled)
        assert map_terminals_to_nodes(terms, shuffled) == m


def loop_terms(pairs):
    """Terminals for components given as (node_a, node_b) pairs, plus the mapping."""
    terms, mapping = [], {}
    for comp, (a, b) in enumerate(pairs):
        for nid in (a, b):
            mapping[len(terms)] = nid
            terms.append(Terminal(len(terms), Point(0, 0), comp))
    return terms, mapping


class TestLinking:
    def test_identity(self):
        nodes = nodes_at((0, 0), (50, 0))
        _, mapping = loop_terms([(0, 1), (0, 1)])
        assert link_underconnected_nodes(mapping, nodes).net_of_node == (0, 1)

    def test_mutually_nearest_pair_merges(self):
        nodes = nodes_at((0, 0), (10, 0), (100, 0))
        mapping = {0: 0, 1: 1, 2: 2, 3: 2}
        assert link_underconnected_nodes(mapping, nodes).net_of_node == (0, 0, 1)

    def test_wide_loop_pairs_corners(self):
        # TL, TR, BL, BR of a 200x100 loop; components on the top and bottom edges
        nodes = nodes_at((0, 0), (200, 0), (0, 100), (200, 100))
        _, mapping = loop_terms([(0, 1), (2, 3)])
        part = link_underconnected_nodes(mapping, nodes)
        assert part.groups == [(0, 2), (1, 3)]

    def test_short_avoided_with_terminals(self):
        # components on the left and right edges: the nearest corner would short them
        nodes = nodes_at((0, 0), (200, 0), (0, 100), (200, 100))
        terms, mapping = loop_terms([(0, 2), (1, 3)])
        assert link_underconnected_nodes(mapping, nodes).groups == [(0, 2), (1, 3)]
        assert link_underconnected_nodes(mapping, nodes, terms).groups == [(0, 1), (2, 3)]

    def test_wired_partner_preferred(self):
        nodes = nodes_at((0, 0), (30, 0), (0, 20))
        mapping = {0: 0, 1: 1, 2: 1, 3: 2, 4: 2}
        assert link_underconnected_nodes(mapping, nodes).groups == [(0, 2), (1,)]
        assert link_underconnected_nodes(mapping, nodes, wired={(0, 1)}).groups == [(0, 1), (2,)]

    def test_wired_pairs(self):
        nodes = nodes_at((0, 0), (100, 1), (50, 60))
        segs = [LineSegment(Point(-3, 0), Point(103, 0))]
        assert wired_pairs(nodes, segs, tol=8) == {(0, 1)}
        assert wired_pairs(nodes, segs, tol=0.5) == set()

    @given(
        st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=1, max_size=7, unique=True),
        st.lists(st.integers(0, 6), max_size=12),
    )
    @settings(max_examples=80)
    def test_every_net_has_two_terminals(self, pts, targets):
        nodes = nodes_at(*pts)
        mapping = {i: t % len(nodes) for i, t in enumerate(targets)}
        part = link_underconnected_nodes(mapping, nodes)
        nets = part.net_of_node
        assert sorted(set(nets)) == list(range(len(set(nets))))
        if len(set(nets)) > 1:
            for net in set(nets):
                assert sum(nets[nid] == net for nid in mapping.values()) >= 2


class TestBuildNetlist:
    def test_designators(self):
        dets = dset((R, (0, 0, 5, 5)), (V, (10, 0, 15, 5)), (R, (20, 0, 25, 5)))
        terms, mapping = loop_terms([(0, 1)] * 3)
        nodes = nodes_at((0, 0), (0, 100))
        nl = build_netlist(dets, terms, mapping, NetPartition((0, 1)), nodes)
        assert [c.designator for c in nl.components] == ["R1", "V1", "R2"]
        assert all((c.net_a, c.net_b) == (0, 1) for c in nl.components)
        assert nl.net_points == (Point(0, 0), Point(0, 100))

    def test_nets_renumbered_top_left_first(self):
        dets = dset((R, (0, 0, 5, 5)))
        terms, mapping = loop_terms([(0, 1)])
        nodes = nodes_at((0, 50), (9, 3))
        nl = build_netlist(dets, terms, mapping, NetPartition((0, 1)), nodes)
        assert (nl.components[0].net_a, nl.components[0].net_b) == (1, 0)

    def test_single_net_self_loop_allowed(self):
        dets = dset((R, (0, 0, 5, 5)))
        terms, mapping = loop_terms([(0, 0)])
        nl = build_netlist(dets, terms, mapping, NetPartition((0,)), nodes_at((1, 1)))
        assert (nl.components[0].net_a, nl.components[0].net_b) == (0, 0)

    def test_self_loop_flagged(self):
        dets = dset((R, (0, 0, 5, 5)), (V, (10, 0, 15, 5)))
        terms, mapping = loop_terms([(0, 0), (0, 1)])
        with pytest.raises(DegenerateComponent):
            build_netlist(dets, terms, mapping, NetPartition((0, 1)), nodes_at((0, 0), (0, 50)))

    def test_missing_terminal(self):
        dets = dset((R, (0, 0, 5, 5)))
        terms, mapping = loop_terms([(0, 1)])
        with pytest.raises(DegenerateComponent):
            build_netlist(dets, terms[:1], {0: 0}, NetPartition((0, 1)), nodes_at((0, 0), (0, 50)))


class TestReconstruct:
    def test_two_component_loop(self):
        case = generate_circuit(SynthSpec(seed=1, component_count=2))
        rec = reconstruct(case.image, case.detections)
        assert netlist_equivalence(rec.netlist, case.netlist)
        d = rec.diagnostics
        assert set(d["timings"]) >= {"filter", "terminals", "nodes", "mapping", "linking", "netlist", "total"}
        assert d["counts"]["terminals"] == 4 and d["counts"]["nets"] == 2

    def test_empty_detections_fail_at_terminals(self):
        case = generate_circuit(SynthSpec(seed=1))
        empty = DetectionSet(case.detections.image, 416, 416, ())
        with pytest.raises(PipelineError) as info:
            reconstruct(case.image, empty)
        assert info.value.stage == "terminals"
        assert "terminals" in str(info.value)

    def test_low_scores_filtered_first(self):
        case = generate_circuit(SynthSpec(seed=2))
        weak = DetectionSet("w", 416, 416, tuple(Detection(d.cls, d.bbox, 0.3) for d in case.detections))
        with pytest.raises(InsufficientTerminalEvidence):
            reconstruct(case.image, weak)

    def test_foreign_errors_are_labelled(self):
        case = generate_circuit(SynthSpec(seed=2))
        with pytest.raises(PipelineError) as info:
            reconstruct(case.image[:, :400], case.detections)
        assert info.value.stage == "terminals"

    @pytest.mark.parametrize("seed", [4, 17])
    def test_deterministic(self, seed):
        case = generate_circuit(SynthSpec(seed=seed))
        a = reconstruct(case.image, case.detections)
        b = reconstruct(case.image.copy(), case.detections)
        assert format_netlist(a.netlist) == format_netlist(b.netlist)
        assert a.nodes == b.nodes and a.terminals == b.terminals and a.segments == b.segments

    def test_loops_match_ground_truth(self):
        hits = 0
        for seed in random.Random(5).sample(range(1000, 2000), 10):
            case = generate_circuit(SynthSpec(seed=seed, component_count=2))
            hits += netlist_equivalence(reconstruct(case.image, case.detections).netlist, case.netlist)
        assert hits >= 9
