"""Timing comparison of the two kernel lanes.

Run directly to time whatever lane the environment selects; run with
``--compare`` to execute both lanes in subprocesses and print a combined
table with speedups. ORTHOSCREEN_PURE=1 forces the reference lane.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from orthoscreen.geometry import pairwise_sq_dists
from orthoscreen.kernels import (
    BACKEND,
    farthest_point_indices,
    knn_from_sq_dists,
    scatter_add_rows,
)

REPEATS = 5


def _time(fn):
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_cases():
    rng = np.random.default_rng(0)
    cases = []

    for n in (256, 1024, 4096):
        d2 = pairwise_sq_dists(rng.normal(size=(n, 3)))
        cases.append((f"knn n={n} k=3", lambda d2=d2: knn_from_sq_dists(d2, 3)))

    for n in (1024, 8192):
        pts = rng.normal(size=(n, 3))
        m = n // 4
        cases.append((f"fps n={n} m={m}",
                      lambda pts=pts, m=m: farthest_point_indices(pts, m, 0)))

    for n, k, c in ((1024, 3, 64), (4096, 3, 64)):
        idx = rng.integers(0, n, size=n * k)
        rows = rng.normal(size=(n * k, c))
        cases.append((f"scatter n*k={n * k} c={c}",
                      lambda n=n, c=c, idx=idx, rows=rows:
                      scatter_add_rows(np.zeros((n, c)), idx, rows)))

    return {name: _time(fn) for name, fn in cases}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--compare", action="store_true",
                        help="run both lanes and print speedups")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable output for --compare workers")
    args = parser.parse_args(argv)

    if not args.compare:
        results = run_cases()
        if args.json:
            print(json.dumps({"backend": BACKEND, "results": results}))
        else:
            print(f"lane: {BACKEND}")
            for name, secs in results.items():
                print(f"  {name:<24} {secs * 1000:8.2f} ms")
        return 0

    lanes = {}
    for env_value in ("0", "1"):
        env = dict(os.environ, ORTHOSCREEN_PURE=env_value)
        proc = subprocess.run([sys.executable, os.path.abspath(__file__), "--json"],
                              env=env, capture_output=True, text=True, check=True)
        doc = json.loads(proc.stdout)
        lanes[doc["backend"]] = doc["results"]

    if set(lanes) == {"compiled", "reference"}:
        names = list(lanes["reference"])
        width = max(len(n) for n in names)
        print(f"{'case':<{width}}  {'reference':>10}  {'compiled':>10}  speedup")
        for name in names:
            ref, fast = lanes["reference"][name], lanes["compiled"][name]
            print(f"{name:<{width}}  {ref * 1000:8.2f}ms  {fast * 1000:8.2f}ms  "
                  f"{ref / fast:6.1f}x")
    else:
        # compiled lane unavailable; just report the reference numbers
        for backend, results in lanes.items():
            print(f"lane: {backend}")
            for name, secs in results.items():
                print(f"  {name:<24} {secs * 1000:8.2f} ms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
