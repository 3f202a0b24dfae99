"""Timing of the numba kernels against their numpy twins.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is run once on both backends to trigger compilation, checked
for agreement, then timed with ``timeit``; the table lists the best time
per call and the numpy / numba speed-up.
"""

import argparse
import json
import sys
import timeit

import numpy as np

import incavg.averaging as avg
from incavg import _kernels
from incavg.averaging import chattering_support
from incavg.catalog import example_5_5_control
from incavg.convex import DirectionGrid, from_points


def cases(rng):
    grid = DirectionGrid(2, 256)
    h = from_points(rng.uniform(-2, 2, (8, 2)), grid).values
    dirs = grid.directions
    verts = _kernels.NUMPY_KERNELS.polygon_vertices(h, dirs)
    vals = rng.normal(size=(512, 101, 1))
    dirs1 = np.array([[1.0], [-1.0]])
    big = rng.normal(size=(64, 101, 2))
    return {
        "controls_support (512x101x1, 2 dirs)": ("controls_support", (vals, dirs1)),
        "controls_support_mean (64x101x2, 256 dirs)": ("controls_support_mean", (big, dirs)),
        "polygon_vertices (256)": ("polygon_vertices", (h, dirs)),
        "edge_lengths (256)": ("edge_lengths", (h, dirs)),
        "clip_polygon (256)": ("clip_polygon", (h, dirs, 10.0)),
        "nearest_on_polygon (256)": ("nearest_on_polygon", (verts, np.array([5.0, -3.0]))),
        "argmax_vertex (256)": ("argmax_vertex", (verts, np.array([0.3, 0.7]))),
    }


def best_time(fn, args, repeat, number):
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def run(repeat: int = 5) -> list:
    if _kernels.NUMBA_KERNELS is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    rows = []
    for label, (name, args) in cases(rng).items():
        f_np = getattr(_kernels.NUMPY_KERNELS, name)
        f_nb = getattr(_kernels.NUMBA_KERNELS, name)
        a, b = f_np(*args), f_nb(*args)  # warm-up / compile
        if not np.allclose(a, b, atol=1e-9):
            raise SystemExit(f"{label}: backends disagree")
        number = max(1, int(0.05 / max(best_time(f_np, args, 1, 1), 1e-7)))
        t_np = best_time(f_np, args, repeat, number)
        t_nb = best_time(f_nb, args, repeat, number)
        rows.append({"kernel": label, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb})

    # end to end: one chattering support evaluation at 256 torus nodes
    sys_ = example_5_5_control()
    dirs1 = np.array([[1.0], [-1.0]])
    times = {}
    for backend, kern in (("numpy", _kernels.NUMPY_KERNELS), ("numba", _kernels.NUMBA_KERNELS)):
        saved, avg.K = avg.K, kern  # the averaging module binds the active backend at import
        try:
            chattering_support(sys_, [0.0], dirs1, 256)
            times[backend] = best_time(lambda: chattering_support(sys_, [0.0], dirs1, 256), (), repeat, 1)
        finally:
            avg.K = saved
    rows.append({"kernel": "chattering_support example_5_5 (256^2 torus)", "numpy_s": times["numpy"],
                 "numba_s": times["numba"], "speedup": times["numpy"] / times["numba"]})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the rows as JSON")
    args = ap.parse_args(argv)
    rows = run(args.repeat)
    width = max(len(r["kernel"]) for r in rows)
    print(f"{'kernel':<{width}} {'numpy':>11} {'numba':>11} {'speedup':>8}")
    for r in rows:
        print(f"{r['kernel']:<{width}} {r['numpy_s'] * 1e6:9.1f}us {r['numba_s'] * 1e6:9.1f}us "
              f"{r['speedup']:7.2f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
