"""Time the compiled and pure-Python line detectors on the same masks.

Usage::

    python benchmarks/bench_hough.py [--repeat 3] [--cases 20]

Two workloads: the random stroke masks used by the tests, and the
box-erased wire masks the pipeline feeds the detector on synthetic
circuits. Both backends must return identical segments; the script checks
that before timing.
"""

import argparse
import statistics
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from helpers import stroke_mask  # noqa: E402
from sketch2netlist.hough import HoughParams, available_backends, detect_line_segments  # noqa: E402
from sketch2netlist.pipeline import PipelineParams, erased_wire_mask  # noqa: E402
from sketch2netlist.synth import SynthSpec, generate_circuit  # noqa: E402


def wire_masks(n):
    p = PipelineParams()
    out = []
    for seed in range(n):
        case = generate_circuit(SynthSpec(seed=seed))
        out.append(erased_wire_mask(case.image, case.detections.boxes, p))
    return out


def time_backend(masks, backend, repeat, p):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for m in masks:
            detect_line_segments(m, p, backend=backend)
        runs.append((time.perf_counter() - t0) / len(masks))
    return min(runs), statistics.median(runs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cases", type=int, default=20, help="masks per workload")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; run: python3 setup.py build_ext --inplace", file=sys.stderr)
    p = HoughParams()
    workloads = {
        "stroke masks 256x256": [stroke_mask(s)[0] for s in range(args.cases)],
        "wire masks 416x416": wire_masks(args.cases),
    }
    print(f"{'workload':<22}{'backend':<10}{'best ms':>10}{'median ms':>11}{'speed-up':>10}")
    for name, masks in workloads.items():
        ref = [detect_line_segments(m, p, backend="python") for m in masks]
        for b in backends:
            if b != "python":
                same = all(detect_line_segments(m, p, backend=b) == r for m, r in zip(masks, ref))
                if not same:
                    print(f"{name}: backend {b} disagrees with python", file=sys.stderr)
                    return 1
        results = {b: time_backend(masks, b, args.repeat, p) for b in backends}
        base = results["python"][0]
        for b, (best, med) in results.items():
            print(f"{name:<22}{b:<10}{1e3 * best:>10.2f}{1e3 * med:>11.2f}{base / best:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
