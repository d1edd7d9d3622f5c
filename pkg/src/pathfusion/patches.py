"""Histology patch embedding IO, subsampling, and projection to token dim.

Embedding file layout (little-endian throughout):
  magic 'PFE1' | u32 n_patches | u32 embed_dim | u8 has_coords |
  n_patches * embed_dim f32 row-major | [n_patches * 2 i32 coords]
Floats are stored as f32 on disk and promoted to f64 on load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError, FormatError, LengthError
from .rng import Rng

MAGIC = b"PFE1"
_HEADER = struct.Struct("<4sIIB")


@dataclass
class PatchEmbeddingSet:
    """Immutable per-slide embedding matrix plus optional patch coordinates."""

    embeddings: np.ndarray  # n_patches x embed_dim, float64
    slide_id: str
    coords: np.ndarray | None = None  # n_patches x 2, int32

    @property
    def n_patches(self) -> int:
        return self.embeddings.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.embeddings.shape[1]


def write_embeddings(path, embeddings, coords=None) -> None:
    emb = np.ascontiguousarray(embeddings, dtype=np.float32)
    if emb.ndim != 2 or emb.shape[0] < 1:
        raise ContractError("embeddings must be a non-empty 2-D matrix")
    if coords is not None:
        coords = np.ascontiguousarray(coords, dtype=np.int32)
        if coords.shape != (emb.shape[0], 2):
            raise ContractError(
                f"coords shape {coords.shape} does not match "
                f"{emb.shape[0]} patches"
            )
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, emb.shape[0], emb.shape[1], int(coords is not None)))
        fh.write(emb.tobytes())
        if coords is not None:
            fh.write(coords.tobytes())


def load_embeddings(path, slide_id: str | None = None) -> PatchEmbeddingSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the fixed header")
    magic, n, e, has_coords = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if n < 1 or e < 1:
        raise FormatError(f"{path}: header claims {n} patches x {e} dims")
    if has_coords not in (0, 1):
        raise FormatError(f"{path}: has_coords flag must be 0 or 1, got {has_coords}")
    need = _HEADER.size + n * e * 4 + (n * 8 if has_coords else 0)
    if len(blob) != need:
        raise LengthError(
            f"{path}: expected {need} bytes for {n}x{e} "
            f"(coords={bool(has_coords)}), found {len(blob)}"
        )
    off = _HEADER.size
    emb32 = np.frombuffer(blob, dtype="<f4", count=n * e, offset=off).reshape(n, e)
    coords = None
    if has_coords:
        off += n * e * 4
        coords = np.frombuffer(blob, dtype="<i4", count=n * 2, offset=off)
        coords = coords.reshape(n, 2).astype(np.int32)
    if slide_id is None:
        slide_id = str(path)
    return PatchEmbeddingSet(emb32.astype(np.float64), slide_id, coords)


def subsample(pset: PatchEmbeddingSet, k: int, seed: int) -> PatchEmbeddingSet:
    """Uniform draw of k patches without replacement, deterministic per seed."""
    if k < 1:
        raise ContractError(f"subsample needs k >= 1, got {k}")
    if pset.n_patches <= k:
        return pset
    idx = Rng(seed).sample_indices(pset.n_patches, k)
    coords = None if pset.coords is None else pset.coords[idx]
    return PatchEmbeddingSet(pset.embeddings[idx], pset.slide_id, coords)


class PatchProjector:
    """Learnable affine map from source embedding dim to token dim."""

    def __init__(self, embed_dim: int, d: int, rng):
        self.embed_dim = int(embed_dim)
        self.d = int(d)
        self.weight = ad.Parameter.glorot(embed_dim, d, "patch_proj.weight", rng)
        self.bias = ad.Parameter.zeros(1, d, "patch_proj.bias")

    def parameters(self) -> list:
        return [self.weight, self.bias]

    def project(self, x: ad.Tensor) -> ad.Tensor:
        """Row-wise affine map of an n_patches x embed_dim tensor."""
        if x.cols != self.embed_dim:
            raise ContractError(
                f"projector expects width {self.embed_dim}, got {x.data.shape}"
            )
        tape = x.tape
        return ad.add(ad.matmul(x, tape.read(self.weight)), tape.read(self.bias))
