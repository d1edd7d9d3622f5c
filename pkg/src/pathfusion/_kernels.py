"""Hot inner-loop kernels, each in a numba and a pure-numpy flavor.

The module-level names (``xoshiro_fill``, ``softmax_rows_fwd``, ...) point at
the flavor picked by :mod:`pathfusion.backend`. When numba is importable both
flavors exist regardless of the env flag, so ``benchmarks/kernels.py`` can
time them side by side; the flag only steers which one the library calls.

The PRNG kernel is bit-exact across flavors (pure integer arithmetic). The
floating-point kernels agree to rounding error only, because summation order
differs between a serial loop and numpy's pairwise reductions.
"""

import numpy as np

from .backend import HAS_NUMBA, USE_NUMBA

# ---------------------------------------------------------------------------
# xoshiro256** state advance
# ---------------------------------------------------------------------------

def xoshiro_fill_numpy(state: np.ndarray, out: np.ndarray) -> None:
    """Fill ``out`` with raw uint64 draws, advancing ``state`` in place."""
    mask = 0xFFFFFFFFFFFFFFFF
    s0, s1, s2, s3 = (int(x) for x in state)
    for i in range(out.shape[0]):
        r = (s1 * 5) & mask
        r = ((r << 7) | (r >> 57)) & mask
        out[i] = (r * 9) & mask
        t = (s1 << 17) & mask
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & mask
    state[0], state[1], state[2], state[3] = s0, s1, s2, s3


# ---------------------------------------------------------------------------
# masked row softmax, forward and backward
# ---------------------------------------------------------------------------
# Mask semantics: keep[i, j] == 1 means entry participates; masked entries get
# -1e30 added pre-exp so they underflow to exactly 0 after normalization.

MASK_OFFSET = -1e30


def softmax_rows_fwd_numpy(scores: np.ndarray, keep: np.ndarray) -> np.ndarray:
    shifted = scores + np.where(keep != 0, 0.0, MASK_OFFSET)
    shifted -= shifted.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_bwd_numpy(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    dot = (y * dy).sum(axis=1, keepdims=True)
    return y * (dy - dot)


# ---------------------------------------------------------------------------
# concordance pair counting
# ---------------------------------------------------------------------------
# Returns (2*concordant + tied, comparable) as floats; a risk tie scores 0.5,
# so c-index = first / (2 * second). Pair (i, j) is comparable when
# t_i < t_j and patient i's event was observed (censor_i == 0).

def cindex_counts_numpy(times, censor, risks):
    comp = (times[:, None] < times[None, :]) & (censor[:, None] == 0)
    conc = comp & (risks[:, None] > risks[None, :])
    tied = comp & (risks[:, None] == risks[None, :])
    return 2.0 * conc.sum() + tied.sum(), float(comp.sum())


if HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def xoshiro_fill_numba(state, out):  # pragma: no cover - exercised via dispatch
        s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
        five = np.uint64(5)
        nine = np.uint64(9)
        for i in range(out.shape[0]):
            r = s1 * five
            r = (r << np.uint64(7)) | (r >> np.uint64(57))
            out[i] = r * nine
            t = s1 << np.uint64(17)
            s2 = s2 ^ s0
            s3 = s3 ^ s1
            s1 = s1 ^ s2
            s0 = s0 ^ s3
            s2 = s2 ^ t
            s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
        state[0], state[1], state[2], state[3] = s0, s1, s2, s3

    @njit(cache=True)
    def softmax_rows_fwd_numba(scores, keep):
        n, m = scores.shape
        out = np.empty_like(scores)
        for i in range(n):
            hi = -np.inf
            for j in range(m):
                v = scores[i, j] if keep[i, j] != 0 else scores[i, j] + MASK_OFFSET
                if v > hi:
                    hi = v
            total = 0.0
            for j in range(m):
                v = scores[i, j] if keep[i, j] != 0 else scores[i, j] + MASK_OFFSET
                e = np.exp(v - hi)
                out[i, j] = e
                total += e
            for j in range(m):
                out[i, j] /= total
        return out

    @njit(cache=True)
    def softmax_rows_bwd_numba(y, dy):
        n, m = y.shape
        out = np.empty_like(y)
        for i in range(n):
            dot = 0.0
            for j in range(m):
                dot += y[i, j] * dy[i, j]
            for j in range(m):
                out[i, j] = y[i, j] * (dy[i, j] - dot)
        return out

    @njit(cache=True)
    def cindex_counts_numba(times, censor, risks):
        n = times.shape[0]
        num2 = 0.0
        comparable = 0.0
        for i in range(n):
            if censor[i] != 0:
                continue
            for j in range(n):
                if times[i] < times[j]:
                    comparable += 1.0
                    if risks[i] > risks[j]:
                        num2 += 2.0
                    elif risks[i] == risks[j]:
                        num2 += 1.0
        return num2, comparable


if USE_NUMBA:
    xoshiro_fill = xoshiro_fill_numba
    softmax_rows_fwd = softmax_rows_fwd_numba
    softmax_rows_bwd = softmax_rows_bwd_numba
    cindex_counts = cindex_counts_numba
else:
    xoshiro_fill = xoshiro_fill_numpy
    softmax_rows_fwd = softmax_rows_fwd_numpy
    softmax_rows_bwd = softmax_rows_bwd_numpy
    cindex_counts = cindex_counts_numpy
