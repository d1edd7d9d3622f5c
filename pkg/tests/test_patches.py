import numpy as np
import pytest

from pathfusion import autodiff as ad
from pathfusion import patches as pt
from pathfusion.errors import ContractError, FormatError, LengthError
from pathfusion.rng import Rng

from helpers import check_gradients


class TestEmbeddingIO:
    def test_round_trip_bit_identical(self, tmp_path):
        data = np.random.default_rng(0).standard_normal((5, 8)).astype(np.float32)
        path = tmp_path / "slide.pfe"
        pt.write_embeddings(path, data)
        loaded = pt.load_embeddings(path, "slide")
        assert loaded.embeddings.dtype == np.float64
        assert np.array_equal(loaded.embeddings.astype(np.float32), data)
        assert loaded.coords is None
        assert loaded.slide_id == "slide"

    def test_round_trip_with_coords(self, tmp_path):
        data = np.ones((3, 4), dtype=np.float32)
        coords = np.array([[0, 0], [0, 256], [256, 0]], dtype=np.int32)
        path = tmp_path / "c.pfe"
        pt.write_embeddings(path, data, coords)
        loaded = pt.load_embeddings(path)
        assert np.array_equal(loaded.coords, coords)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pfe"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(FormatError, match="magic"):
            pt.load_embeddings(path)

    def test_truncated_payload_is_length_error(self, tmp_path):
        data = np.zeros((10, 4), dtype=np.float32)
        path = tmp_path / "t.pfe"
        pt.write_embeddings(path, data)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 16])  # drop one row
        with pytest.raises(LengthError):
            pt.load_embeddings(path)

    def test_header_row_overcount_is_length_error(self, tmp_path):
        # header says 10 rows, payload holds 9
        payload = np.zeros((9, 4), dtype=np.float32)
        path = tmp_path / "o.pfe"
        import struct

        blob = struct.pack("<4sIIB", b"PFE1", 10, 4, 0) + payload.tobytes()
        path.write_bytes(blob)
        with pytest.raises(LengthError):
            pt.load_embeddings(path)

    def test_paper_scale_load(self, tmp_path):
        # 14,509 x 768 smoke: format holds up at realistic slide size
        data = np.random.default_rng(1).standard_normal((14509, 768))
        data = data.astype(np.float32)
        path = tmp_path / "big.pfe"
        pt.write_embeddings(path, data)
        loaded = pt.load_embeddings(path)
        assert loaded.n_patches == 14509
        assert loaded.embed_dim == 768


class TestSubsample:
    def test_identity_when_small(self):
        pset = pt.PatchEmbeddingSet(np.ones((3, 4)), "s")
        assert pt.subsample(pset, 5, seed=0) is pset

    def test_deterministic_per_seed(self):
        emb = np.arange(400.0).reshape(100, 4)
        pset = pt.PatchEmbeddingSet(emb, "s")
        a = pt.subsample(pset, 10, seed=42)
        b = pt.subsample(pset, 10, seed=42)
        assert np.array_equal(a.embeddings, b.embeddings)
        c = pt.subsample(pset, 10, seed=43)
        assert not np.array_equal(a.embeddings, c.embeddings)

    def test_coords_follow_rows(self):
        emb = np.arange(40.0).reshape(20, 2)
        coords = np.stack([np.arange(20), np.arange(20)], axis=1).astype(np.int32)
        pset = pt.PatchEmbeddingSet(emb, "s", coords)
        sub = pt.subsample(pset, 5, seed=3)
        assert np.array_equal(sub.coords[:, 0] * 2.0, sub.embeddings[:, 0])

    def test_k_must_be_positive(self):
        pset = pt.PatchEmbeddingSet(np.ones((3, 4)), "s")
        with pytest.raises(ContractError):
            pt.subsample(pset, 0, seed=0)

    def test_selection_frequencies_uniform(self):
        # over 10,000 seeded draws of 5 from 20, each index ~2,500 +- 150
        emb = np.arange(20.0).reshape(20, 1)
        pset = pt.PatchEmbeddingSet(emb, "s")
        counts = np.zeros(20, dtype=int)
        for seed in range(10_000):
            sub = pt.subsample(pset, 5, seed=seed)
            counts[sub.embeddings[:, 0].astype(int)] += 1
        assert counts.min() >= 2500 - 150
        assert counts.max() <= 2500 + 150


class TestProjector:
    def test_identity_projection(self):
        proj = pt.PatchProjector(4, 4, Rng(1))
        proj.weight.value[:] = np.eye(4)
        proj.bias.value[:] = 0.0
        x = np.array([[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]])
        out = proj.project(ad.Tape().constant(x))
        assert np.array_equal(out.data, x)

    def test_zero_input_broadcasts_bias(self):
        proj = pt.PatchProjector(3, 2, Rng(2))
        proj.bias.value[:] = [[0.5, -0.5]]
        out = proj.project(ad.Tape().constant(np.zeros((4, 3))))
        assert np.array_equal(out.data, np.tile([[0.5, -0.5]], (4, 1)))

    def test_dim_mismatch(self):
        proj = pt.PatchProjector(3, 2, Rng(2))
        with pytest.raises(ContractError):
            proj.project(ad.Tape().constant(np.zeros((4, 5))))

    def test_gradient_matches_finite_differences(self):
        rng = Rng(5)
        proj = pt.PatchProjector(3, 2, rng)
        x = rng.normal_matrix(4, 3)
        probe = rng.normal_matrix(4, 2)

        def build():
            tape = ad.Tape()
            return ad.weighted_sum(proj.project(tape.constant(x)), probe)

        assert check_gradients(build, proj.parameters()) < 1e-5
