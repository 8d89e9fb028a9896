"""Compare the compiled and pure-Python GED kernels.

    python benchmarks/bench_kernels.py [--reps 5] [--out kernels.csv]

Each row times one kernel on one input size for both backends and checks
that they return the same value.
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from cosim.ged import beam_ged, get_backend
from cosim.ged.assignment import build_cost_matrix
from cosim.synthgen import gen_ba


def _median(fn, reps):
    fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def cases(rng):
    for n in (10, 50, 150):
        cost = rng.integers(0, 100, size=(n, n)).astype(float)
        for kernel in ("hungarian", "lapjv"):
            yield kernel, f"{n}x{n}", lambda k, kernel=kernel, cost=cost: getattr(k, kernel)(cost)[1]
    for n, width in ((12, 10), (30, 10), (60, 10)):
        g1, g2 = gen_ba(n, 1, rng, "a"), gen_ba(n, 1, rng, "b")
        yield "beam", f"n={n},w={width}", lambda k, g1=g1, g2=g2, width=width: beam_ged(
            g1, g2, width=width, backend=k.BACKEND).value
    for n in (60, 200):
        g1, g2 = gen_ba(n, 1, rng, "a"), gen_ba(n, 1, rng, "b")
        c = build_cost_matrix(g1, g2)
        yield "lapjv-ged", f"n={n}", lambda k, c=c: k.lapjv(c)[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args(argv)
    try:
        fast = get_backend("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    slow = get_backend("python")
    rows = []
    print(f"{'kernel':10s} {'size':12s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for kernel, size, fn in cases(np.random.default_rng(args.seed)):
        t_py, v_py = _median(lambda: fn(slow), args.reps)
        t_c, v_c = _median(lambda: fn(fast), args.reps)
        if abs(v_py - v_c) > 1e-9:
            print(f"MISMATCH {kernel} {size}: {v_py} vs {v_c}", file=sys.stderr)
            return 2
        rows.append((kernel, size, t_py, t_c, t_py / t_c))
        print(f"{kernel:10s} {size:12s} {t_py * 1e3:10.3f} {t_c * 1e3:10.3f} {t_py / t_c:8.1f}x")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", "size", "python_s", "cython_s", "speedup"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
