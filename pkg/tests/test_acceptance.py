"""Acceptance checks, one test per criterion, each at its stated tolerance.

Every test records a one-line PASS/FAIL summary that is printed at the end
of the run (see conftest.py) and then asserts.
"""

import contextlib
import hashlib
import os
import statistics
import time

import numpy as np
import pytest

from helpers import best_partition_sse, parametric_intersection, record, score_strokes, stroke_mask
from sketch2netlist.cli import main
from sketch2netlist.clustering import KMeansParams, kmeans
from sketch2netlist.detection import ComponentClass, Detection, DetectionSet
from sketch2netlist.geometry import BoundingBox, LineSegment, Point, line_intersection
from sketch2netlist.hough import detect_line_segments
from sketch2netlist.metrics import (
    GHOST,
    MISS,
    average_precision,
    confusion_matrix,
    match_detections,
    netlist_equivalence,
    node_accuracy,
)
from sketch2netlist.pipeline import PipelineError, reconstruct
from sketch2netlist.synth import SynthSpec, generate_circuit

SUITE_SEEDS = range(100)


def test_criterion_1_geometry_oracle():
    rng = np.random.default_rng(2024)
    coords = rng.uniform(-1000, 1000, size=(10_000, 8))
    segs = []
    for c in coords:
        segs.append((LineSegment(Point(c[0], c[1]), Point(c[2], c[3])),
                     LineSegment(Point(c[4], c[5]), Point(c[6], c[7]))))
    t0 = time.perf_counter()
    got = [line_intersection(a, b) for a, b in segs]
    elapsed = time.perf_counter() - t0

    worst = 0.0
    agree = True
    for c, q in zip(coords, got):
        ref = parametric_intersection(c[0:2], c[2:4], c[4:6], c[6:8])
        if (q is None) != (ref is None):
            agree = False
            continue
        if q is not None:
            err = max(abs(q.x - ref[0]) / max(1.0, abs(ref[0])), abs(q.y - ref[1]) / max(1.0, abs(ref[1])))
            worst = max(worst, err)

    # exactly parallel pairs: shared integer direction, different offsets
    parallel_ok = True
    for _ in range(1000):
        x, y, dx, dy, k, ox, oy = (int(v) for v in rng.integers(-50, 50, size=7))
        if (dx, dy) == (0, 0) or k == 0 or dx * oy - dy * ox == 0:
            continue
        a = LineSegment(Point(x, y), Point(x + dx, y + dy))
        b = LineSegment(Point(x + ox, y + oy), Point(x + ox + k * dx, y + oy + k * dy))
        ref = parametric_intersection((a.p1.x, a.p1.y), (a.p2.x, a.p2.y), (b.p1.x, b.p1.y), (b.p2.x, b.p2.y))
        parallel_ok &= line_intersection(a, b) is None and ref is None

    ok = agree and worst <= 1e-9 and parallel_ok and elapsed < 1.0
    record(1, "geometry oracle", ok,
           f"10000 pairs, worst rel. error {worst:.2e}, parallel exact={parallel_ok}, {elapsed:.3f} s")
    assert ok


def _separated_set(rng):
    """Two clusters on the 20x20 grid, gap >= 5x the larger cluster diameter."""
    while True:
        n = int(rng.integers(2, 9))
        na = int(rng.integers(1, n))
        spread = int(rng.integers(0, 3))
        ca, cb = rng.integers(0, 20 - spread, size=(2, 2))
        a = ca + rng.integers(0, spread + 1, size=(na, 2))
        b = cb + rng.integers(0, spread + 1, size=(n - na, 2))

        def diameter(p):
            return max(np.hypot(*(u - v)) for u in p for v in p)

        gap = min(np.hypot(*(u - v)) for u in a for v in b)
        if gap > 0 and gap >= 5 * max(diameter(a), diameter(b)):
            return np.vstack([a, b]).astype(float)


def test_criterion_2_kmeans_oracle():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = -np.inf
    ok_sets = 0
    for i in range(500):
        pts = _separated_set(rng)
        best = best_partition_sse(pts, 2)
        res = kmeans(pts, KMeansParams(k=2, seed=i))
        worst = max(worst, res.inertia - best)
        ok_sets += res.inertia <= best * 1.0 + 1e-9

    family_ok = True
    for scale in (1, 2, 3):
        for off in range(0, 5):
            for axis in (0, 1):
                line = np.array([0, 2, 10, 12], float) * scale + off
                pts = np.zeros((4, 2))
                pts[:, axis] = line
                best = best_partition_sse(pts, 2)
                family_ok &= kmeans(pts, KMeansParams(k=2, seed=scale * 10 + off)).inertia == best
    elapsed = time.perf_counter() - t0
    ok = ok_sets == 500 and family_ok and elapsed < 10
    record(2, "k-means oracle", ok,
           f"{ok_sets}/500 optimal, worst excess {worst:.1e}, {{0,2,10,12}} exact={family_ok}, {elapsed:.2f} s")
    assert ok


def test_criterion_3_hough_recovery():
    t0 = time.perf_counter()
    good = 0
    failures = []
    worst_spurious = 0
    for seed in range(200):
        mask, strokes = stroke_mask(seed)
        recovered, spurious = score_strokes(detect_line_segments(mask), strokes, tol=3.0)
        worst_spurious = max(worst_spurious, spurious)
        if recovered and spurious <= 1:
            good += 1
        else:
            failures.append(seed)
    elapsed = time.perf_counter() - t0
    ok = good == 200 and elapsed < 30
    record(3, "Hough recovery", ok,
           f"{good}/200 masks, max spurious {worst_spurious}, failures {failures[:5]}, {elapsed:.2f} s")
    assert ok


@pytest.fixture(scope="module")
def suite():
    """One reconstruct per synthetic case at jitter 2, with timings."""
    rows = []
    for seed in SUITE_SEEDS:
        case = generate_circuit(SynthSpec(seed=seed, jitter=2.0))
        t0 = time.perf_counter()
        try:
            rec = reconstruct(case.image, case.detections)
        except PipelineError:
            rec = None
        elapsed = time.perf_counter() - t0
        rows.append((seed, case, rec, elapsed))
    return rows


def test_criterion_4_node_recognition(suite):
    good = []
    for seed, case, rec, _ in suite:
        if rec is None:
            continue
        acc = node_accuracy(case.nodes, [n.point for n in rec.nodes], tol=10.0)
        if acc.accurate:
            good.append(seed)
    bad = sorted(set(SUITE_SEEDS) - set(good))
    ok = len(good) >= 95
    record(4, "node recognition", ok, f"{len(good)}/100 circuits exact (need 95), failing seeds {bad}")
    assert ok


def test_criterion_5_end_to_end(suite):
    good = [seed for seed, case, rec, _ in suite
            if rec is not None and netlist_equivalence(rec.netlist, case.netlist)]
    bad = sorted(set(SUITE_SEEDS) - set(good))
    ok = len(good) >= 90
    record(5, "end-to-end netlists", ok, f"{len(good)}/100 equivalent (need 90), failing seeds {bad}")
    assert ok


def _gt(*items):
    return DetectionSet("x.pgm", 400, 400, tuple(Detection(c, BoundingBox(*b), None) for c, b in items))


def _pred(*items):
    return DetectionSet("x.pgm", 400, 400, tuple(Detection(c, BoundingBox(*b), s) for c, b, s in items))


def test_criterion_6_metrics_oracle():
    R = ComponentClass.RESISTOR
    gt = _gt((R, (0, 0, 10, 10)), (R, (50, 50, 60, 60)))
    pred = _pred((R, (0, 0, 10, 10), 0.9), (R, (200, 200, 210, 210), 0.8), (R, (50, 50, 60, 60), 0.7))
    ap = average_precision(gt, pred, R)
    ap_ok = abs(ap - 0.8333) <= 1e-4 and abs(ap - (0.5 + 0.5 * 2 / 3)) <= 1e-6

    ml = match_detections(_gt((R, (0, 0, 10, 10))), _pred((R, (0, 0, 10, 6), 0.9), (R, (0, 0, 10, 8), 0.8)))
    dup_ok = [(m.gt_index, m.det_index) for m in ml.matches] == [(0, 1)] and ml.unmatched_det == (0,)

    one = _gt((R, (0, 0, 10, 10)))
    drop = match_detections(one, _pred((R, (0, 0, 10, 10), 0.49)))
    keep = match_detections(one, _pred((R, (0, 0, 10, 10), 0.50)))
    boundary_ok = not drop.matches and not drop.considered_det and len(keep.matches) == 1

    rng = np.random.default_rng(99)
    classes = list(ComponentClass)
    balanced = 0
    for _ in range(1000):
        def boxes(n):
            xy = rng.uniform(0, 300, size=(n, 2))
            wh = rng.uniform(5, 60, size=(n, 2))
            return [tuple(np.concatenate([p, p + s])) for p, s in zip(xy, wh)]

        g = _gt(*((classes[rng.integers(5)], b) for b in boxes(int(rng.integers(0, 8)))))
        gb = [d.bbox.as_list() for d in g]
        near = [tuple(np.array(b) + rng.normal(0, 3, 4)) for b in gb]
        near = [b for b in near if b[0] < b[2] and b[1] < b[3]]
        p = _pred(*((classes[rng.integers(5)], b, float(rng.uniform())) for b in near + boxes(int(rng.integers(0, 5)))))
        ml = match_detections(g, p)
        cm = confusion_matrix(ml, g, p)
        kept = [d for d in p if d.score >= 0.5]
        n = len(ml.matches)
        misses, ghosts = int(cm[:, MISS].sum()), int(cm[GHOST, :].sum())
        ok_one = n + misses + ghosts == len(g) + len(kept) - n
        for k, c in enumerate(classes):
            ok_one &= int(cm[k, :].sum()) == sum(d.cls is c for d in g)
            ok_one &= int(cm[:, k].sum()) == sum(d.cls is c for d in kept)
        balanced += bool(ok_one)
    ok = ap_ok and dup_ok and boundary_ok and balanced == 1000
    record(6, "metrics oracle", ok,
           f"AP={ap:.6f}, duplicate={dup_ok}, 0.49/0.50 boundary={boundary_ok}, CM balanced {balanced}/1000")
    assert ok


def test_criterion_7_runtime(suite):
    times = [t for *_, t in suite]
    med = statistics.median(times)
    ok = med <= 0.5
    record(7, "runtime", ok, f"median reconstruct {med:.4f} s over {len(times)} images, max {max(times):.4f} s")
    assert ok


def _suite_digest(root, jobs):
    """Synthesize, reconstruct with overlays, evaluate; return a hash per output file."""
    cases = os.path.join(root, "cases")
    assert main(["synth", "--count", str(len(SUITE_SEEDS)), "--seed", "0", "--out", cases]) == 0
    stems = [f"case_{i:04d}" for i in range(len(SUITE_SEEDS))]
    images = [os.path.join(cases, s + ".pgm") for s in stems]
    dets = [os.path.join(cases, s + ".json") for s in stems]
    out = os.path.join(root, "netlists")
    dbg = os.path.join(root, "debug")
    main(["reconstruct", "--image", *images, "--detections", *dets, "--out", out,
          "--debug-dir", dbg, "--seed", "0", "--jobs", str(jobs)])
    reports = os.path.join(root, "reports")
    os.makedirs(reports)
    for s in stems:
        for cmd in (["eval-det", "--json"], ["eval-netlist"]):
            gt = os.path.join(cases, s + (".json" if cmd[0] == "eval-det" else ".net"))
            pred = gt if cmd[0] == "eval-det" else os.path.join(out, s + ".net")
            with open(os.path.join(reports, f"{s}.{cmd[0]}.txt"), "w", encoding="utf-8") as fh:
                with contextlib.redirect_stdout(fh):
                    main([cmd[0], "--gt", gt, "--pred", pred, *cmd[1:]])
    digest = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            if f == "timings.json":  # wall-clock measurements
                continue
            path = os.path.join(dirpath, f)
            with open(path, "rb") as fh:
                digest[os.path.relpath(path, root)] = hashlib.sha256(fh.read()).hexdigest()
    return digest


def test_criterion_8_determinism(tmp_path):
    a = _suite_digest(str(tmp_path / "run1"), jobs=1)
    b = _suite_digest(str(tmp_path / "run2"), jobs=4)
    kinds = {k: sum(1 for f in a if f.endswith(k)) for k in (".net", ".ppm", ".txt", "graph.json")}
    diff = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    ok = not diff and kinds[".ppm"] > 0 and kinds[".txt"] == 2 * len(SUITE_SEEDS)
    record(8, "determinism", ok, f"{len(a)} files byte-identical across two runs {kinds}, differing {diff[:3]}")
    assert ok
