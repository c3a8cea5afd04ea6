"""Compare the compiled and pure-Python assignment kernels.

    python3 benchmarks/bench_matching.py [--reps N]

Times the raw kernel on square cost matrices and the full matching call
(tie-breaking included) on bigraphs shaped like decision epochs.
"""

import argparse
import timeit

import numpy as np

from decmrta.incentive import WeightedBigraph
from decmrta.matching import max_weight_matching, solve_assignment_ext, solve_assignment_py


def bench(fn, reps):
    return min(timeit.repeat(fn, number=1, repeat=reps))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()
    if solve_assignment_ext is None:
        print("compiled kernel not built; only the python kernel is available")
    rng = np.random.default_rng(0)

    print(f"{'kernel on n x 2n cost':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for n in (5, 10, 20, 50, 100, 200):
        cost = rng.uniform(-10, 1, size=(n, 2 * n))
        py = bench(lambda: solve_assignment_py(cost), args.reps) * 1e3
        line = f"{n:28d} {py:10.3f}"
        if solve_assignment_ext is not None:
            ext = bench(lambda: solve_assignment_ext(cost), args.reps) * 1e3
            line += f" {ext:10.3f} {py / ext:7.1f}x"
        print(line)

    print(f"\n{'matching, robots x tasks':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for nr, nt in ((5, 50), (20, 200), (40, 200), (100, 1000)):
        w = rng.uniform(0, 10, size=(nr, nt)) * (rng.random((nr, nt)) < 0.5)
        g = WeightedBigraph(tuple(range(1, nr + 1)), tuple(range(1, nt + 1)), w)
        py = bench(lambda: max_weight_matching(g, kernel=solve_assignment_py), args.reps) * 1e3
        line = f"{f'{nr} x {nt}':>28s} {py:10.3f}"
        if solve_assignment_ext is not None:
            ext = bench(lambda: max_weight_matching(g, kernel=solve_assignment_ext), args.reps) * 1e3
            line += f" {ext:10.3f} {py / ext:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
