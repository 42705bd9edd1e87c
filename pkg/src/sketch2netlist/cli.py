"""Command-line front end.

Exit codes: 0 ok, 1 usage or input error, 2 pipeline failure (stage named
on stderr), 3 netlists not equivalent.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .detection import DetectionError, filter_by_score, load_detections, load_ground_truth
from .geometry import Orientation, segment_orientation
from .hough import HoughParams
from .metrics import evaluate_detections, format_report, netlist_equivalence
from .netlist import NetlistFormatError, format_netlist, read_netlist
from .pipeline import (
    PipelineError,
    PipelineParams,
    detect_nodes,
    erased_wire_mask,
    reconstruct,
    recognize_terminals,
)
from .pnm import PNMError, encode_ppm, read_pgm
from .raster import AdaptiveThresholdParams, adaptive_threshold
from .synth import SynthSpec, generate_circuit, write_case

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE, EXIT_NOT_EQUIVALENT = 0, 1, 2, 3
CONFIG_ENV = "SKETCH2NETLIST_CONFIG"

RED = (255, 0, 0)
BLUE = (0, 0, 255)
YELLOW = (255, 255, 0)
GREEN = (0, 200, 0)


class UsageError(Exception):
    pass


# --- config --------------------------------------------------------------

_NESTED = {"adaptive": AdaptiveThresholdParams, "hough": HoughParams}
_METRIC_DEFAULTS = {"iou_threshold": 0.5, "node_tol": 10.0}


def default_config() -> dict:
    """Flat view of every tunable: nested params get an ``adaptive_``/``hough_`` prefix."""
    out = {}
    base = PipelineParams()
    for f in dataclasses.fields(PipelineParams):
        val = getattr(base, f.name)
        if f.name in _NESTED:
            for g in dataclasses.fields(val):
                out[f"{f.name}_{g.name}"] = getattr(val, g.name)
        else:
            out[f.name] = val
    out.update(_METRIC_DEFAULTS)
    return out


def load_config(path: str | None) -> dict:
    """Defaults merged with a flat JSON document; unknown keys are an error."""
    cfg = default_config()
    path = path or os.environ.get(CONFIG_ENV) or None
    if path is None:
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    unknown = sorted(set(doc) - set(cfg))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    cfg.update(doc)
    return cfg


def params_from_config(cfg: dict) -> PipelineParams:
    kwargs: dict = {}
    nested: dict = {k: {} for k in _NESTED}
    for key, val in cfg.items():
        if key in _METRIC_DEFAULTS:
            continue
        prefix, _, rest = key.partition("_")
        if prefix in _NESTED and rest:
            nested[prefix][rest] = val
        else:
            kwargs[key] = val
    try:
        for name, cls in _NESTED.items():
            kwargs[name] = cls(**nested[name])
        return PipelineParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None


def _effective_config(args) -> dict:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg["kmeans_seed"] = args.seed
        cfg["hough_seed"] = args.seed
    return cfg


# --- overlays ------------------------------------------------------------


def _rgb(gray: np.ndarray) -> np.ndarray:
    return np.repeat(gray[:, :, None], 3, axis=2).copy()


def _square(rgb, x, y, half, color):
    h, w = rgb.shape[:2]
    xi, yi = int(np.floor(x + 0.5)), int(np.floor(y + 0.5))
    rgb[max(yi - half, 0):min(yi + half + 1, h), max(xi - half, 0):min(xi + half + 1, w)] = color


def _line(rgb, seg, color):
    h, w = rgb.shape[:2]
    n = int(max(abs(seg.p2.x - seg.p1.x), abs(seg.p2.y - seg.p1.y))) + 1
    xs = np.rint(np.linspace(seg.p1.x, seg.p2.x, n)).astype(int)
    ys = np.rint(np.linspace(seg.p1.y, seg.p2.y, n)).astype(int)
    keep = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    rgb[ys[keep], xs[keep]] = color


def write_debug(debug_dir: str, img: np.ndarray, dets, rec, p: PipelineParams) -> None:
    """Overlay PPMs for each stage plus a timing/count JSON."""
    os.makedirs(debug_dir, exist_ok=True)
    ink = adaptive_threshold(img, p.adaptive)
    with open(os.path.join(debug_dir, "ink.ppm"), "wb") as f:
        f.write(encode_ppm(_rgb(np.where(ink, 0, 255).astype(np.uint8))))

    term = _rgb(img)
    for t in rec.terminals:
        _square(term, t.point.x, t.point.y, 2, RED)
    with open(os.path.join(debug_dir, "terminals.ppm"), "wb") as f:
        f.write(encode_ppm(term))

    wires = erased_wire_mask(img, dets.boxes, p)
    seg = _rgb(np.where(wires, 0, 255).astype(np.uint8))
    for s in rec.segments:
        horizontal = segment_orientation(s) is Orientation.HORIZONTAL
        _line(seg, s, BLUE if horizontal else YELLOW)
    with open(os.path.join(debug_dir, "segments.ppm"), "wb") as f:
        f.write(encode_ppm(seg))

    nodes = _rgb(img)
    for nd in rec.nodes:
        _square(nodes, nd.point.x, nd.point.y, 4, GREEN)
    for t in rec.terminals:
        _square(nodes, t.point.x, t.point.y, 2, RED)
    with open(os.path.join(debug_dir, "nodes.ppm"), "wb") as f:
        f.write(encode_ppm(nodes))

    with open(os.path.join(debug_dir, "graph.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump({"terminals": _terminal_docs(rec.terminals), "nodes": _node_docs(rec.nodes)}, f, indent=2)
        f.write("\n")

    with open(os.path.join(debug_dir, "timings.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(rec.diagnostics, f, indent=2, sort_keys=True)
        f.write("\n")


# --- commands ------------------------------------------------------------


def _load_inputs(image_path: str, det_path: str):
    try:
        img = read_pgm(image_path)
    except OSError as exc:
        raise UsageError(f"cannot read image {image_path}: {exc.strerror}") from None
    except PNMError as exc:
        raise UsageError(f"{image_path}: {exc}") from None
    try:
        dets = load_detections(det_path)
    except OSError as exc:
        raise UsageError(f"cannot read detections {det_path}: {exc.strerror}") from None
    except DetectionError as exc:
        raise UsageError(f"{det_path}: {exc}") from None
    if img.shape != (dets.height, dets.width):
        raise UsageError(
            f"{image_path} is {img.shape[1]}x{img.shape[0]} but {det_path} says {dets.width}x{dets.height}"
        )
    return img, dets


def _reconstruct_one(job):
    """Worker body; returns (exit code, message). Kept top-level so it pickles."""
    image_path, det_path, out_path, debug_dir, cfg = job
    try:
        p = params_from_config(cfg)
        img, dets = _load_inputs(image_path, det_path)
    except UsageError as exc:
        return EXIT_USAGE, str(exc)
    try:
        rec = reconstruct(img, dets, p)
    except PipelineError as exc:
        return EXIT_PIPELINE, f"{image_path}: pipeline failed in stage '{exc.stage}': {exc}"
    text = format_netlist(rec.netlist)
    if out_path is None:
        sys.stdout.write(text)
    else:
        parent = os.path.dirname(out_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    if debug_dir:
        write_debug(debug_dir, img, dets, rec, p)
    return EXIT_OK, ""


def cmd_reconstruct(args) -> int:
    images, det_files = args.image, args.detections
    if len(images) != len(det_files):
        raise UsageError("give one --detections file per --image")
    cfg = _effective_config(args)
    params_from_config(cfg)
    if args.verbose:
        print(json.dumps(cfg, indent=2, sort_keys=True), file=sys.stderr)

    if len(images) == 1:
        jobs = [(images[0], det_files[0], args.out, args.debug_dir, cfg)]
    else:
        if not args.out:
            raise UsageError("--out must name a directory when several images are given")
        jobs = []
        for img, det in zip(images, det_files):
            stem = os.path.splitext(os.path.basename(img))[0]
            dbg = os.path.join(args.debug_dir, stem) if args.debug_dir else None
            jobs.append((img, det, os.path.join(args.out, stem + ".net"), dbg, cfg))

    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_reconstruct_one, jobs))
    else:
        results = [_reconstruct_one(j) for j in jobs]

    code = EXIT_OK
    for rc, msg in results:
        if msg:
            print(msg, file=sys.stderr)
        code = max(code, rc)
    return code


def cmd_terminals(args) -> int:
    cfg = _effective_config(args)
    p = params_from_config(cfg)
    img, dets = _load_inputs(args.image, args.detections)
    try:
        terms = recognize_terminals(img, filter_by_score(dets, p.score_threshold), p)
    except PipelineError as exc:
        print(f"pipeline failed in stage '{exc.stage}': {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    _emit_json({"terminals": _terminal_docs(terms)}, args.out)
    return EXIT_OK


def cmd_nodes(args) -> int:
    cfg = _effective_config(args)
    p = params_from_config(cfg)
    img, dets = _load_inputs(args.image, args.detections)
    try:
        found = detect_nodes(img, filter_by_score(dets, p.score_threshold), p)
    except PipelineError as exc:
        print(f"pipeline failed in stage '{exc.stage}': {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    doc = {
        "nodes": _node_docs(found.nodes),
        "segments": [[s.p1.x, s.p1.y, s.p2.x, s.p2.y] for s in found.segments],
        "intersections": [[q.x, q.y] for q in found.intersections],
        "regions": found.region_count,
    }
    _emit_json(doc, args.out)
    return EXIT_OK


def _terminal_docs(terms):
    return [{"id": t.id, "x": t.point.x, "y": t.point.y, "component": t.component_id} for t in terms]


def _node_docs(nodes):
    return [{"id": n.id, "x": n.point.x, "y": n.point.y} for n in nodes]


def _emit_json(doc, out_path):
    text = json.dumps(doc, indent=2) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_eval_det(args) -> int:
    cfg = _effective_config(args)
    try:
        gt = load_ground_truth(args.gt)
        pred = load_detections(args.pred)
    except OSError as exc:
        raise UsageError(f"cannot read {exc.filename}: {exc.strerror}") from None
    except DetectionError as exc:
        raise UsageError(str(exc)) from None
    if os.path.basename(gt.image) != os.path.basename(pred.image):
        raise UsageError(f"image mismatch: ground truth is {gt.image!r}, predictions are {pred.image!r}")
    iou_thr = args.iou if args.iou is not None else cfg["iou_threshold"]
    report = evaluate_detections(gt, pred, iou_thr, cfg["score_threshold"])
    if args.json:
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    else:
        sys.stdout.write(format_report(report))
    return EXIT_OK


def cmd_eval_netlist(args) -> int:
    try:
        a = read_netlist(args.gt)
        b = read_netlist(args.pred)
    except OSError as exc:
        raise UsageError(f"cannot read {exc.filename}: {exc.strerror}") from None
    except NetlistFormatError as exc:
        raise UsageError(str(exc)) from None
    same = netlist_equivalence(a, b)
    if args.json:
        print(json.dumps({"equivalent": same}))
    else:
        print("equivalent" if same else "not equivalent")
    return EXIT_OK if same else EXIT_NOT_EQUIVALENT


def cmd_synth(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    seed = args.seed if args.seed is not None else 0
    try:
        specs = [
            SynthSpec(seed=seed + i, component_count=args.components, jitter=args.jitter)
            for i in range(args.count)
        ]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for i, spec in enumerate(specs):
        write_case(generate_circuit(spec), args.out, i)
    if args.verbose:
        print(f"wrote {args.count} cases to {args.out}", file=sys.stderr)
    return EXIT_OK


# --- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketch2netlist", description="Rebuild circuit netlists from sketch images and component boxes."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help=f"flat JSON config (default: ${CONFIG_ENV})")
        if seed:
            sp.add_argument("--seed", type=int, help="seed for k-means and Hough pixel order")
        sp.add_argument("--verbose", "-v", action="store_true")

    sp = sub.add_parser("reconstruct", help="image + detections -> netlist")
    sp.add_argument("--image", nargs="+", required=True)
    sp.add_argument("--detections", nargs="+", required=True)
    sp.add_argument("--out", help="netlist file (directory when several images are given)")
    sp.add_argument("--debug-dir", help="write overlay PPMs and timings here")
    sp.add_argument("--jobs", type=int, default=1, help="images processed concurrently")
    common(sp)
    sp.set_defaults(func=cmd_reconstruct)

    for name, fn, what in (("terminals", cmd_terminals, "terminal points"), ("nodes", cmd_nodes, "nodes")):
        sp = sub.add_parser(name, help=f"print recognised {what} as JSON")
        sp.add_argument("--image", required=True)
        sp.add_argument("--detections", required=True)
        sp.add_argument("--out")
        common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("eval-det", help="score detections against ground truth")
    sp.add_argument("--gt", required=True)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--iou", type=float)
    sp.add_argument("--json", action="store_true")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_eval_det)

    sp = sub.add_parser("eval-netlist", help="exit 0 when two netlists match up to net names, else 3")
    sp.add_argument("--gt", required=True)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_eval_netlist)

    sp = sub.add_parser("synth", help="write seeded synthetic cases")
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--components", type=int, help="fixed component count (2..6)")
    sp.add_argument("--jitter", type=float, default=2.0)
    sp.add_argument("--verbose", "-v", action="store_true")
    sp.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
