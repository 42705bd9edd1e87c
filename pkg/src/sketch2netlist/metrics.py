"""Detection and recognition scoring.

Detection side: IoU matching, a confusion matrix with an extra ghost row
(detected, no ground truth) and miss column (ground truth, undetected),
per-class accuracy/precision/recall/F1, and all-point interpolated AP at a
single IoU threshold. Recognition side: netlist equivalence up to net
renaming, and node-location accuracy.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .detection import CLASSES, ComponentClass, DetectionSet
from .geometry import Point, euclidean_distance, iou
from .netlist import Netlist

_CLASS_INDEX = {c: i for i, c in enumerate(CLASSES)}
NUM_CLASSES = len(CLASSES)
GHOST = MISS = NUM_CLASSES


@dataclass(frozen=True)
class Match:
    gt_index: int
    det_index: int
    iou: float


@dataclass(frozen=True)
class MatchList:
    matches: tuple[Match, ...]
    unmatched_gt: tuple[int, ...]
    unmatched_det: tuple[int, ...]
    considered_det: tuple[int, ...]


def match_detections(
    gt: DetectionSet, pred: DetectionSet, iou_thr: float = 0.5, score_thr: float = 0.5
) -> MatchList:
    """One-to-one IoU matching, best pairs first, class-agnostic.

    Predictions scoring under ``score_thr`` are dropped before matching.
    Equal IoUs resolve to the lower ground-truth index, then the lower
    detection index.
    """
    if not (0 <= iou_thr <= 1 and 0 <= score_thr <= 1):
        raise ValueError("thresholds must lie in [0, 1]")
    considered = [
        j for j, d in enumerate(pred.detections) if d.score is None or d.score >= score_thr
    ]
    pairs = []
    for i, g in enumerate(gt.detections):
        for j in considered:
            v = iou(g.bbox, pred.detections[j].bbox)
            if v >= iou_thr and v > 0:
                pairs.append((-v, i, j))
    pairs.sort()
    used_gt: set[int] = set()
    used_det: set[int] = set()
    matches = []
    for neg, i, j in pairs:
        if i in used_gt or j in used_det:
            continue
        used_gt.add(i)
        used_det.add(j)
        matches.append(Match(i, j, -neg))
    matches.sort(key=lambda m: m.gt_index)
    return MatchList(
        matches=tuple(matches),
        unmatched_gt=tuple(i for i in range(len(gt)) if i not in used_gt),
        unmatched_det=tuple(j for j in considered if j not in used_det),
        considered_det=tuple(considered),
    )


def confusion_matrix(matches: MatchList, gt: DetectionSet, pred: DetectionSet) -> np.ndarray:
    """(C+1) x (C+1) counts; rows are ground-truth classes, columns detected classes."""
    cm = np.zeros((NUM_CLASSES + 1, NUM_CLASSES + 1), dtype=np.int64)
    for m in matches.matches:
        cm[_CLASS_INDEX[gt.detections[m.gt_index].cls], _CLASS_INDEX[pred.detections[m.det_index].cls]] += 1
    for i in matches.unmatched_gt:
        cm[_CLASS_INDEX[gt.detections[i].cls], MISS] += 1
    for j in matches.unmatched_det:
        cm[GHOST, _CLASS_INDEX[pred.detections[j].cls]] += 1
    return cm


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den else 0.0


def classification_metrics(cm: np.ndarray) -> dict[str, dict[str, float]]:
    """Per-class accuracy, precision, recall and F1 plus their macro average.

    TN for a class counts every cell of the full matrix (ghost row and miss
    column included) outside that class's row and column. Zero
    denominators give 0.
    """
    cm = np.asarray(cm)
    total = cm.sum()
    out: dict[str, dict[str, float]] = {}
    for c in CLASSES:
        k = _CLASS_INDEX[c]
        tp = cm[k, k]
        fp = cm[:, k].sum() - tp
        fn = cm[k, :].sum() - tp
        tn = total - tp - fp - fn
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        out[c.value] = {
            "accuracy": _ratio(tp + tn, total),
            "precision": precision,
            "recall": recall,
            "f1": _ratio(2 * precision * recall, precision + recall),
        }
    keys = ("accuracy", "precision", "recall", "f1")
    out["average"] = {k: float(np.mean([out[c.value][k] for c in CLASSES])) for k in keys}
    return out


def _box_key(d):
    return tuple(d.bbox.as_list())


def average_precision(
    gt: DetectionSet, pred: DetectionSet, cls: ComponentClass, iou_thr: float = 0.5
) -> float:
    """Area under the monotone-envelope precision/recall curve for one class."""
    gts = [g for g in gt.detections if g.cls is cls]
    if not gts:
        return 0.0
    dets = [d for d in pred.detections if d.cls is cls]
    dets.sort(key=lambda d: (-(d.score if d.score is not None else 1.0), _box_key(d)))
    used = [False] * len(gts)
    tp = np.zeros(len(dets))
    for k, d in enumerate(dets):
        best, best_i = iou_thr, -1
        for i, g in enumerate(gts):
            if used[i]:
                continue
            v = iou(g.bbox, d.bbox)
            if v >= best and v > 0 and (best_i < 0 or v > best):
                best, best_i = v, i
        if best_i >= 0:
            used[best_i] = True
            tp[k] = 1
    if not len(dets):
        return 0.0
    ctp = np.cumsum(tp)
    recall = ctp / len(gts)
    precision = ctp / np.arange(1, len(dets) + 1)
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[1.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def per_class_ap(gt: DetectionSet, pred: DetectionSet, iou_thr: float = 0.5) -> dict[str, float]:
    """AP for every class that has at least one ground-truth box."""
    present = {g.cls for g in gt.detections}
    return {c.value: average_precision(gt, pred, c, iou_thr) for c in CLASSES if c in present}


def map_at_05(gt: DetectionSet, pred: DetectionSet) -> float:
    aps = per_class_ap(gt, pred, 0.5)
    return float(np.mean(list(aps.values()))) if aps else 0.0


# --- recognition ---------------------------------------------------------


def _edges(nl: Netlist) -> list[tuple[ComponentClass, int, int]]:
    return [(c.cls, min(c.net_a, c.net_b), max(c.net_a, c.net_b)) for c in nl.components]


def netlist_equivalence(a: Netlist, b: Netlist) -> bool:
    """True when some renaming of ``a``'s nets gives ``b``'s component multiset.

    Backtracking over net assignments, pruned on per-net edge signatures
    and on every component whose two nets are already assigned.
    """
    ea, eb = _edges(a), _edges(b)
    if Counter(e[0] for e in ea) != Counter(e[0] for e in eb):
        return False
    nets_a = sorted({n for _, x, y in ea for n in (x, y)})
    nets_b = sorted({n for _, x, y in eb for n in (x, y)})
    if len(nets_a) != len(nets_b):
        return False

    def signature(edges, net):
        sig = Counter()
        for cls, x, y in edges:
            if x == net and y == net:
                sig[(cls.value, "loop")] += 1
            elif net in (x, y):
                sig[(cls.value, "end")] += 1
        return tuple(sorted(sig.items()))

    sig_a = {n: signature(ea, n) for n in nets_a}
    sig_b = {n: signature(eb, n) for n in nets_b}
    if sorted(sig_a.values()) != sorted(sig_b.values()):
        return False
    target = Counter(eb)
    # most constrained nets first
    order = sorted(nets_a, key=lambda n: (-sum(1 for _, x, y in ea if n in (x, y)), n))
    assign: dict[int, int] = {}
    taken: set[int] = set()

    def consistent() -> bool:
        partial = Counter()
        for cls, x, y in ea:
            if x in assign and y in assign:
                u, v = assign[x], assign[y]
                partial[(cls, min(u, v), max(u, v))] += 1
        return all(target[k] >= v for k, v in partial.items())

    def search(i: int) -> bool:
        if i == len(order):
            mapped = Counter(
                (cls, min(assign[x], assign[y]), max(assign[x], assign[y])) for cls, x, y in ea
            )
            return mapped == target
        n = order[i]
        for m in nets_b:
            if m in taken or sig_b[m] != sig_a[n]:
                continue
            assign[n] = m
            taken.add(m)
            if consistent() and search(i + 1):
                return True
            del assign[n]
            taken.discard(m)
        return False

    return search(0)


@dataclass(frozen=True)
class NodeAccuracy:
    matched: int
    missed: int
    spurious: int
    max_error: float

    @property
    def accurate(self) -> bool:
        return self.missed == 0 and self.spurious == 0


def node_accuracy(gt_nodes: list[Point], pred_nodes: list[Point], tol: float = 10.0) -> NodeAccuracy:
    """Greedy closest-pair matching of predicted to true nodes within ``tol`` pixels."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    pairs = []
    for i, g in enumerate(gt_nodes):
        for j, q in enumerate(pred_nodes):
            d = euclidean_distance(g, q)
            if d <= tol:
                pairs.append((d, i, j))
    pairs.sort()
    used_g: set[int] = set()
    used_p: set[int] = set()
    worst = 0.0
    for d, i, j in pairs:
        if i in used_g or j in used_p:
            continue
        used_g.add(i)
        used_p.add(j)
        worst = max(worst, d)
    matched = len(used_g)
    return NodeAccuracy(matched, len(gt_nodes) - matched, len(pred_nodes) - matched, worst)


# --- reports -------------------------------------------------------------


def evaluate_detections(
    gt: DetectionSet, pred: DetectionSet, iou_thr: float = 0.5, score_thr: float = 0.5
) -> dict:
    """Everything the detection report prints, as plain JSON-ready data."""
    ml = match_detections(gt, pred, iou_thr, score_thr)
    cm = confusion_matrix(ml, gt, pred)
    aps = per_class_ap(gt, pred, iou_thr)
    return {
        "iou_threshold": iou_thr,
        "score_threshold": score_thr,
        "map": float(np.mean(list(aps.values()))) if aps else 0.0,
        "ap": aps,
        "classes": [c.value for c in CLASSES],
        "confusion_matrix": cm.tolist(),
        "metrics": classification_metrics(cm),
    }


def format_report(report: dict) -> str:
    lines = [f"mAP@{report['iou_threshold']:g}: {report['map']:.4f}", "", "AP per class:"]
    for name, ap in report["ap"].items():
        lines.append(f"  {name:<15} {ap:.4f}")
    names = report["classes"]
    short = [n[:8] for n in names] + ["miss"]
    lines += ["", "Confusion matrix (rows: ground truth, cols: detected):"]
    lines.append(" " * 10 + "".join(f"{s:>9}" for s in short))
    for label, row in zip([n[:8] for n in names] + ["ghost"], report["confusion_matrix"]):
        lines.append(f"{label:<10}" + "".join(f"{v:>9d}" for v in row))
    lines += ["", f"{'class':<15}{'accuracy':>10}{'precision':>11}{'recall':>9}{'f1':>9}"]
    for name, m in report["metrics"].items():
        lines.append(
            f"{name:<15}{100 * m['accuracy']:>10.2f}{100 * m['precision']:>11.2f}"
            f"{100 * m['recall']:>9.2f}{100 * m['f1']:>9.2f}"
        )
    return "\n".join(lines) + "\n"
