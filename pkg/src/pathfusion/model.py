"""End-to-end risk model assembly and its versioned checkpoint container.

Checkpoint layout (little-endian):
  magic 'PFCK' | u32 version | u64 header length | header JSON (UTF-8,
  sorted keys) | payload of concatenated f64 tensors. The header carries
  the model config, gene index, pathway definitions, and a tensor index
  of (name, rows, cols, offset) entries; normalizer statistics and bin
  edges travel as reserved payload tensors.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .errors import ContractError, FormatError, LengthError
from .fusion import FusionConfig, FusionLayer, FusionOutput
from .pathways import Normalizer, PathwayDefinition, PathwayEncoder
from .patches import PatchEmbeddingSet, PatchProjector
from .rng import Rng, derive_seed
from .survival import BinEdges, SurvivalHead, hazard_curve, RISK_MODES

CHECKPOINT_MAGIC = b"PFCK"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIQ")


@dataclass
class ModelConfig:
    d: int = 32
    n_bins: int = 4
    embed_dim: int = 16
    include_p_to_h: bool = True
    include_h_to_p: bool = True
    dropout_rate: float = 0.25
    risk_mode: str = RISK_MODES[0]

    def __post_init__(self):
        if self.d < 1 or self.n_bins < 2 or self.embed_dim < 1:
            raise ContractError(
                f"bad model dims: d={self.d}, bins={self.n_bins}, "
                f"embed={self.embed_dim}"
            )
        if self.risk_mode not in RISK_MODES:
            raise ContractError(f"unknown risk mode {self.risk_mode!r}")
        if not (self.include_p_to_h or self.include_h_to_p):
            raise ContractError(
                "at least one cross-modal attention direction must stay on"
            )

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(
            d=self.d,
            include_p_to_h=self.include_p_to_h,
            include_h_to_p=self.include_h_to_p,
        )


@dataclass
class ForwardPass:
    """One patient's tape plus the tensors attribution needs handles to."""

    tape: ad.Tape
    gene_input: ad.Tensor        # 1 x n_genes, z-scored
    patch_input: ad.Tensor       # n_patches x embed_dim
    pathway_tokens: ad.Tensor    # pre-attention
    patch_tokens: ad.Tensor      # pre-attention
    fusion: FusionOutput
    logits: ad.Tensor


class RiskModel:
    """Pathway encoder + patch projector + fusion + survival head."""

    def __init__(self, cfg: ModelConfig, gene_names, defs, seed: int):
        for pd in defs:
            if pd.indices is None:
                raise ContractError(f"pathway {pd.name!r} not resolved")
        self.cfg = cfg
        self.gene_names = list(gene_names)
        self.defs = list(defs)
        init_rng = Rng(derive_seed(seed, "init"))
        self.encoder = PathwayEncoder(
            self.defs, len(self.gene_names), cfg.d, init_rng.child("enc"),
            dropout_rate=cfg.dropout_rate,
        )
        self.projector = PatchProjector(cfg.embed_dim, cfg.d, init_rng.child("proj"))
        self.fusion = FusionLayer(cfg.d, init_rng.child("fuse"))
        self.head = SurvivalHead(cfg.d, cfg.n_bins, init_rng.child("head"))
        self.normalizer: Normalizer | None = None
        self.bin_edges: BinEdges | None = None

    def parameters(self) -> list:
        return (
            self.encoder.parameters()
            + self.projector.parameters()
            + self.fusion.parameters()
            + self.head.parameters()
        )

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def forward_z(self, z: np.ndarray, embeddings: np.ndarray,
                  training: bool = False, rng=None) -> ForwardPass:
        """Forward from an already z-scored expression vector."""
        tape = ad.Tape()
        g = tape.input(np.asarray(z, dtype=np.float64).reshape(1, -1))
        pemb = tape.input(embeddings)
        pathway_tokens = self.encoder.encode(g, training=training, rng=rng)
        patch_tokens = self.projector.project(pemb)
        fusion_out = self.fusion.fuse(
            self.cfg.fusion_config(), pathway_tokens, patch_tokens
        )
        logits = self.head.logits(fusion_out.pooled)
        return ForwardPass(tape, g, pemb, pathway_tokens, patch_tokens,
                           fusion_out, logits)

    def forward(self, raw_expression: np.ndarray, pset: PatchEmbeddingSet,
                training: bool = False, rng=None) -> ForwardPass:
        if self.normalizer is None:
            raise ContractError("model has no fitted normalizer")
        z = self.normalizer.transform(raw_expression)
        return self.forward_z(z, pset.embeddings, training=training, rng=rng)

    def forward_tokens(self, pathway_token_data: np.ndarray,
                       patch_token_data: np.ndarray) -> ForwardPass:
        """Forward from explicit pre-attention tokens (for attribution)."""
        tape = ad.Tape()
        xp = tape.input(pathway_token_data)
        xh = tape.input(patch_token_data)
        fusion_out = self.fusion.fuse(self.cfg.fusion_config(), xp, xh)
        logits = self.head.logits(fusion_out.pooled)
        return ForwardPass(tape, xp, xh, xp, xh, fusion_out, logits)

    def predict(self, raw_expression: np.ndarray, pset: PatchEmbeddingSet):
        out = self.forward(raw_expression, pset, training=False)
        return hazard_curve(out.logits.data, risk_mode=self.cfg.risk_mode)


def _reserved_tensors(model: RiskModel) -> list:
    extras = []
    if model.normalizer is not None:
        extras.append(("_normalizer.mean", model.normalizer.mean.reshape(1, -1)))
        extras.append(("_normalizer.std", model.normalizer.std.reshape(1, -1)))
    if model.bin_edges is not None:
        extras.append(("_bins.edges", model.bin_edges.edges.reshape(1, -1)))
    return extras


def save_checkpoint(path, model: RiskModel) -> None:
    tensors = [(p.name, p.value) for p in model.parameters()]
    names = [n for n, _ in tensors]
    if len(set(names)) != len(names):
        raise ContractError("duplicate parameter names in model")
    tensors.extend(_reserved_tensors(model))

    index = []
    offset = 0
    chunks = []
    for name, value in tensors:
        arr = np.ascontiguousarray(value, dtype="<f8")
        index.append(
            {"name": name, "rows": arr.shape[0], "cols": arr.shape[1],
             "offset": offset}
        )
        chunks.append(arr.tobytes())
        offset += arr.nbytes

    header = {
        "config": asdict(model.cfg),
        "gene_names": model.gene_names,
        "pathways": [
            {
                "name": pd.name,
                "description": pd.description,
                "members": list(pd.members),
                "indices": [int(i) for i in pd.indices],
            }
            for pd in model.defs
        ],
        "n_bins": model.cfg.n_bins,
        "tensors": index,
        "has_normalizer": model.normalizer is not None,
        "has_bins": model.bin_edges is not None,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for chunk in chunks:
            fh.write(chunk)


def load_checkpoint(path) -> RiskModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _CKPT_HEADER.size:
        raise FormatError(f"{path}: file shorter than the fixed header")
    magic, version, header_len = _CKPT_HEADER.unpack_from(blob, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise FormatError(
            f"{path}: checkpoint version {version} unsupported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    start = _CKPT_HEADER.size
    if len(blob) < start + header_len:
        raise LengthError(f"{path}: truncated header")
    header = json.loads(blob[start:start + header_len].decode("utf-8"))
    payload = blob[start + header_len:]

    cfg = ModelConfig(**header["config"])
    defs = [
        PathwayDefinition(
            entry["name"], entry["description"], tuple(entry["members"]),
            np.array(entry["indices"], dtype=np.int64),
        )
        for entry in header["pathways"]
    ]
    model = RiskModel(cfg, header["gene_names"], defs, seed=0)

    stored = {}
    for entry in header["tensors"]:
        size = entry["rows"] * entry["cols"] * 8
        if entry["offset"] + size > len(payload):
            raise LengthError(
                f"{path}: tensor {entry['name']!r} overruns the payload"
            )
        arr = np.frombuffer(
            payload, dtype="<f8", count=entry["rows"] * entry["cols"],
            offset=entry["offset"],
        ).reshape(entry["rows"], entry["cols"]).copy()
        stored[entry["name"]] = arr

    for param in model.parameters():
        if param.name not in stored:
            raise FormatError(f"{path}: missing tensor {param.name!r}")
        arr = stored[param.name]
        if arr.shape != param.value.shape:
            raise FormatError(
                f"{path}: tensor {param.name!r} has shape {arr.shape}, "
                f"model expects {param.value.shape}"
            )
        param.value[:] = arr

    if header["has_normalizer"]:
        model.normalizer = Normalizer(
            stored["_normalizer.mean"].reshape(-1),
            stored["_normalizer.std"].reshape(-1),
        )
    if header["has_bins"]:
        model.bin_edges = BinEdges(
            stored["_bins.edges"].reshape(-1), cfg.n_bins
        )
    return model
