"""Time the numba kernels against their pure-numpy fallbacks.

Both flavors of every hot kernel exist whenever numba is importable, no
matter what PATHFUSION_NUMBA says, so this script times them side by side
on identical inputs. The first numba call compiles; a warmup round keeps
compilation out of the timings.

Usage: python3 benchmarks/kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from pathfusion import _kernels as k
from pathfusion.backend import HAS_NUMBA
from pathfusion.rng import Rng


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    if not HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = Rng(0)

    # masked-attention row softmax at the paper-scale shape: pathway
    # queries against pathway + patch keys
    scores = rng.normal_matrix(331, 15331)
    keep = np.ones(scores.shape, dtype=np.uint8)
    grad = rng.normal_matrix(*scores.shape)
    soft = k.softmax_rows_fwd_numpy(scores, keep)

    # cohort-scale concordance counting
    n = 3000
    times_arr = rng.uniform(n) * 60
    censor = (rng.uniform(n) > 0.7).astype(np.float64)
    risks = rng.normal(n)

    # raw generator output, one training epoch's worth of draws
    state = np.array([1, 2, 3, 4], dtype=np.uint64)
    out = np.empty(1_000_000, dtype=np.uint64)

    cases = [
        ("softmax_rows_fwd (331x15331)",
         lambda: k.softmax_rows_fwd_numpy(scores, keep),
         lambda: k.softmax_rows_fwd_numba(scores, keep)),
        ("softmax_rows_bwd (331x15331)",
         lambda: k.softmax_rows_bwd_numpy(soft, grad),
         lambda: k.softmax_rows_bwd_numba(soft, grad)),
        ("cindex_counts (n=3000)",
         lambda: k.cindex_counts_numpy(times_arr, censor, risks),
         lambda: k.cindex_counts_numba(times_arr, censor, risks)),
        ("xoshiro_fill (1e6 draws)",
         lambda: k.xoshiro_fill_numpy(state.copy(), out),
         lambda: k.xoshiro_fill_numba(state.copy(), out)),
    ]

    print(f"{'kernel':34} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, numpy_fn, numba_fn in cases:
        numba_fn()  # compile before timing
        t_np = best_of(numpy_fn, args.repeats)
        t_nb = best_of(numba_fn, args.repeats)
        print(f"{name:34} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms "
              f"{t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
