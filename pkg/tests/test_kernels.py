import numpy as np
import pytest

from pathfusion import _kernels as kernels
from pathfusion import backend
from pathfusion.rng import Rng


needs_numba = pytest.mark.skipif(
    not backend.HAS_NUMBA, reason="numba not importable"
)


class TestSoftmaxRows:
    def test_unmasked_rows_sum_to_one(self):
        rng = Rng(1)
        x = rng.normal_matrix(7, 5)
        keep = np.ones((7, 5), dtype=np.uint8)
        y = kernels.softmax_rows_fwd(x, keep)
        assert np.allclose(y.sum(axis=1), 1.0, atol=1e-12)

    def test_masked_entries_exactly_zero(self):
        rng = Rng(2)
        x = rng.normal_matrix(6, 8) * 5.0
        keep = (rng.uniform(48).reshape(6, 8) > 0.4).astype(np.uint8)
        keep[:, 0] = 1
        y = kernels.softmax_rows_fwd(x, keep)
        assert np.all(y[keep == 0] == 0.0)
        assert np.allclose(y.sum(axis=1), 1.0, atol=1e-12)

    def test_matches_direct_exp_normalize(self):
        x = np.array([[1.0, 2.0, 3.0]])
        keep = np.ones((1, 3), dtype=np.uint8)
        y = kernels.softmax_rows_fwd(x, keep)
        expected = np.exp(x) / np.exp(x).sum()
        assert np.max(np.abs(y - expected)) < 1e-12

    def test_large_scores_stay_finite(self):
        x = np.array([[1000.0, 999.0], [-1000.0, -1001.0]])
        keep = np.ones((2, 2), dtype=np.uint8)
        y = kernels.softmax_rows_fwd(x, keep)
        assert np.all(np.isfinite(y))
        assert np.allclose(y.sum(axis=1), 1.0)

    @needs_numba
    def test_flavors_agree(self):
        rng = Rng(3)
        x = rng.normal_matrix(9, 11)
        keep = (rng.uniform(99).reshape(9, 11) > 0.3).astype(np.uint8)
        keep[:, -1] = 1
        a = kernels.softmax_rows_fwd_numpy(x, keep)
        b = kernels.softmax_rows_fwd_numba(x, keep)
        assert np.max(np.abs(a - b)) < 1e-15
        g = rng.normal_matrix(9, 11)
        da = kernels.softmax_rows_bwd_numpy(a, g)
        db = kernels.softmax_rows_bwd_numba(a, g)
        assert np.max(np.abs(da - db)) < 1e-14


class TestXoshiroFill:
    def test_deterministic(self):
        state = np.array([7, 8, 9, 10], dtype=np.uint64)
        a = np.empty(32, dtype=np.uint64)
        b = np.empty(32, dtype=np.uint64)
        kernels.xoshiro_fill(state.copy(), a)
        kernels.xoshiro_fill(state.copy(), b)
        assert np.array_equal(a, b)

    def test_state_advances(self):
        state = np.array([7, 8, 9, 10], dtype=np.uint64)
        out = np.empty(4, dtype=np.uint64)
        kernels.xoshiro_fill(state, out)
        assert not np.array_equal(state, np.array([7, 8, 9, 10], dtype=np.uint64))

    @needs_numba
    def test_flavors_bit_identical(self):
        state = np.array([1, 2, 3, 4], dtype=np.uint64)
        s1, s2 = state.copy(), state.copy()
        a = np.empty(256, dtype=np.uint64)
        b = np.empty(256, dtype=np.uint64)
        kernels.xoshiro_fill_numpy(s1, a)
        kernels.xoshiro_fill_numba(s2, b)
        assert np.array_equal(a, b)
        assert np.array_equal(s1, s2)


class TestCindexCounts:
    def test_perfect_ranking(self):
        t = np.array([1.0, 2.0, 3.0])
        c = np.zeros(3)  # every death observed
        r = np.array([3.0, 2.0, 1.0])
        num, den = kernels.cindex_counts(t, c, r)
        assert den == 3.0
        assert num / (2.0 * den) == 1.0

    def test_censored_patient_not_comparable_as_earlier(self):
        t = np.array([1.0, 2.0])
        c = np.array([1.0, 0.0])  # earlier patient censored
        r = np.array([2.0, 1.0])
        num, den = kernels.cindex_counts(t, c, r)
        assert den == 0.0

    @needs_numba
    def test_flavors_agree(self):
        rng = Rng(4)
        t = rng.uniform(50) * 80
        c = (rng.uniform(50) > 0.6).astype(np.float64)
        r = rng.normal(50)
        a = kernels.cindex_counts_numpy(t, c, r)
        b = kernels.cindex_counts_numba(t, c, r)
        assert a == b
