"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py [--repeats 5]

The numbers justify keeping both paths: numba wins on the per-element loops
(similarity, warps, aggregation) while the numpy fallback keeps the package
usable without a compiler.  Select a backend globally with
LEAFGRAPH_BACKEND=numpy|numba|auto.
"""

import argparse
import time

import numpy as np

from leafgraph import kernels
from leafgraph.rng import Rng


def timeit(fn, repeats):
    fn()  # warm-up (numba compilation)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = Rng(1)
    n, d = 1200, 128
    x = rng.normal(n * d).reshape(n, d)

    img = rng.uniform(512 * 512 * 3).reshape(512, 512, 3)
    coeffs = (0.97, 0.05, -3.0, -0.04, 1.02, 2.0)

    m, k_seg, fan = 4000, 1500, 12
    h = rng.normal(m * 64).reshape(m, 64)
    offsets = np.arange(0, fan * k_seg + 1, fan, dtype=np.int64)
    idx = np.array([rng.below(m) for _ in range(fan * k_seg)], dtype=np.int64)
    dout = rng.normal(k_seg * 64).reshape(k_seg, 64)

    cases = [
        (f"pairwise_cosine {n}x{d}",
         lambda: kernels.pairwise_cosine_numpy(x),
         lambda: kernels.pairwise_cosine_numba(x)),
        ("warp_affine 512x512x3",
         lambda: kernels.warp_affine_numpy(img, 512, 512, coeffs),
         lambda: kernels.warp_affine_numba(img, 512, 512, coeffs)),
        (f"segment_mean {k_seg}x{fan}",
         lambda: kernels.segment_mean_numpy(h, offsets, idx),
         lambda: kernels.segment_mean_numba(h, offsets, idx)),
        (f"segment_mean_backward {k_seg}x{fan}",
         lambda: kernels.segment_mean_backward_numpy(dout, offsets, idx, m),
         lambda: kernels.segment_mean_backward_numba(dout, offsets, idx, m)),
        (f"segment_max {k_seg}x{fan}",
         lambda: kernels.segment_max_numpy(h, offsets, idx),
         lambda: kernels.segment_max_numba(h, offsets, idx)),
    ]

    print(f"{'kernel':<34} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, np_fn, nb_fn in cases:
        t_np = timeit(np_fn, args.repeats)
        if kernels.USE_NUMBA:
            t_nb = timeit(nb_fn, args.repeats)
            print(f"{name:<34} {t_np * 1e3:>9.2f}ms {t_nb * 1e3:>9.2f}ms "
                  f"{t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<34} {t_np * 1e3:>9.2f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
