"""Time the UCB phase with the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py --horizons 2000 20000 --repeats 3
"""
import argparse
import time

import numpy as np

from creator_econ import _kernels
from creator_econ.economy import bundled_instance, load_instance
from creator_econ.learners import run_alg1, run_alg2


def best_time(fn, repeats):
    out, best = None, float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizons", type=int, nargs="+", default=[2000, 20000, 50000])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _kernels.compiled_ucb_phase is None:
        raise SystemExit("compiled kernel not built; reinstall with cython available")

    cases = [("alg1", run_alg1, load_instance(bundled_instance("desk_return"))),
             ("alg2", run_alg2, load_instance(bundled_instance("desk_feature")))]
    print(f"{'learner':8s} {'T':>7s} {'python[s]':>10s} {'cython[s]':>10s} {'speedup':>8s} identical")
    for name, run, inst in cases:
        for T in args.horizons:
            tp, (a, _) = best_time(lambda: run(inst, T, seed=args.seed, backend="python"), args.repeats)
            tc, (b, _) = best_time(lambda: run(inst, T, seed=args.seed, backend="cython"), args.repeats)
            same = np.array_equal(a.chosen, b.chosen) and np.array_equal(a.expected_utility, b.expected_utility)
            print(f"{name:8s} {T:7d} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f} {same}")


if __name__ == "__main__":
    main()
