"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--rows 200000] [--repeat 5]

Both paths are called in one process by toggling NLFRAME_NUMBA, which the
kernels read on every call.  The first numba call is a warm-up so compile
time is not counted.
"""
import argparse
import math
import os
import timeit

import numpy as np

from nlframe import certify, kernels, maps


def timed(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def run_case(name, fn, repeat):
    out = {}
    for label, flag in (("numba", "1"), ("numpy", "0")):
        os.environ["NLFRAME_NUMBA"] = flag
        fn()
        out[label] = timed(fn, repeat)
    os.environ.pop("NLFRAME_NUMBA", None)
    speedup = out["numpy"] / out["numba"] if out["numba"] > 0 else math.inf
    print(f"{name:<28} numba {out['numba'] * 1e3:9.2f} ms   numpy {out['numpy'] * 1e3:9.2f} ms   x{speedup:5.2f}")
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    N = args.rows
    A = rng.standard_normal((N, 2))
    B = rng.standard_normal((N, 2))
    V = rng.standard_normal((N, 8))
    W = np.abs(rng.standard_normal((N // 10, 12)))

    run_case("pnorm_rows p=2", lambda: kernels.pnorm_rows(V, 2.0), args.repeat)
    run_case("pnorm_rows p=3", lambda: kernels.pnorm_rows(V, 3.0), args.repeat)
    run_case("direction_stats p=2", lambda: kernels.direction_stats(A, B, 2.0), args.repeat)
    run_case("direction_stats p=inf", lambda: kernels.direction_stats(A, B, math.inf), args.repeat)
    run_case("topk_support s=3", lambda: kernels.topk_support(W, 3), args.repeat)

    F, T = maps.e_map(2, 0.0), maps.t1_operator()
    plan = certify.SamplingPlan(box_radius=4 * math.pi, n_pts=10_000, seed=0)
    run_case("beta_FT E_2,0 (1e4 pts)", lambda: certify.beta_FT(F, T, plan), args.repeat)


if __name__ == "__main__":
    main()
