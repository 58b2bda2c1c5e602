#!/usr/bin/env python3
"""Benchmark the compiled local-search kernel against the pure-Python twin.

Runs identical searches through both lanes, checks the results agree
exactly, and prints wall-clock times plus the speedup. Usage:

    python benchmarks/bench_search.py [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from carweave import lattice_graph
from carweave import _kernels_py
from carweave.objective import EPSILON
from carweave.search import _flat_adjacency

try:
    from carweave import _kernels as _compiled
except ImportError:
    _compiled = None


CASES = [
    ("lattice 10x10", 10, 10),
    ("lattice 20x20", 20, 20),
    ("lattice 30x30", 30, 30),
]


def run_case(kernel, indptr, nbrs, phi, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = kernel.run_local_search(indptr, nbrs, phi, 1000, 25, False, EPSILON)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    rng = np.random.default_rng(20260808)
    print(f"{'case':<16}{'deleted':>9}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, rows, cols in CASES:
        g = lattice_graph(rows, cols)
        phi = rng.standard_normal(g.vertex_count)
        indptr, nbrs = _flat_adjacency(g)

        py_time, py_result = run_case(_kernels_py, indptr, nbrs, phi, args.repeats)
        if _compiled is None:
            print(f"{name:<16}{len(py_result[0]):>9}{py_time:>11.3f}s{'n/a':>12}{'n/a':>10}")
            continue
        c_time, c_result = run_case(_compiled, indptr, nbrs, phi, args.repeats)
        if py_result[0] != c_result[0] or py_result[1] != c_result[1]:
            raise SystemExit(f"{name}: lanes disagree, benchmark aborted")
        print(
            f"{name:<16}{len(py_result[0]):>9}{py_time:>11.3f}s{c_time:>11.3f}s"
            f"{py_time / c_time:>9.1f}x"
        )
    if _compiled is None:
        print("\ncompiled kernel not built; only the fallback lane was timed")


if __name__ == "__main__":
    main()
