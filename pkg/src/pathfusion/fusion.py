"""Single-head, single-layer multimodal attention with a blocked patch-patch
interaction, plus its dense masked reference used for equivalence checks.

The block path never materializes the patch-to-patch score quadrant:
pathway query rows attend pathway keys (always) and patch keys (flag);
patch query rows attend pathway keys only (flag). With both flags on
this equals dense attention over the concatenated sequence with the
patch-patch block additively masked, which ``dense_reference`` builds
outright for small inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError, DimensionError

DENSE_GUARD = 4096


@dataclass
class FusionConfig:
    """Attention wiring; head and layer counts are fixed at one."""

    d: int
    include_p_to_h: bool = True  # pathway queries see patch keys
    include_h_to_p: bool = True  # patch queries see pathway keys
    dense_fallback: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ContractError(f"token dim must be >= 1, got {self.d}")
        if not (self.include_p_to_h or self.include_h_to_p or self.dense_fallback):
            raise ContractError(
                "at least one cross-modal direction must stay enabled"
            )


@dataclass
class FusionOutput:
    """Fused tokens, pooled embedding, and detached attention slices."""

    pooled: ad.Tensor          # 1 x 2d
    pathway_out: ad.Tensor     # n_pathways x d
    patch_out: ad.Tensor       # n_patches x d
    attn_pp: np.ndarray        # n_pathways x n_pathways
    attn_ph: np.ndarray        # n_pathways x n_patches (or width 0)
    attn_hp: np.ndarray        # n_patches x n_pathways (or width 0)
    score_entries: int


def score_entry_count(n_p: int, n_h: int, cfg: FusionConfig) -> int:
    """Exact number of attention score entries the block path allocates."""
    pathway_keys = n_p + (n_h if cfg.include_p_to_h else 0)
    patch_keys = n_p if cfg.include_h_to_p else 0
    return n_p * pathway_keys + n_h * patch_keys


def dense_entry_count(n_p: int, n_h: int) -> int:
    return (n_p + n_h) ** 2


class FusionLayer:
    """Shared projection weights, post-attention layernorm, feed-forward."""

    def __init__(self, d: int, rng):
        self.d = int(d)
        self.w_q = ad.Parameter.glorot(d, d, "fusion.w_q", rng)
        self.w_k = ad.Parameter.glorot(d, d, "fusion.w_k", rng)
        self.w_v = ad.Parameter.glorot(d, d, "fusion.w_v", rng)
        self.ln_gain = ad.Parameter(np.ones((1, d)), "fusion.ln_gain")
        self.ln_bias = ad.Parameter.zeros(1, d, "fusion.ln_bias")
        self.ff_w1 = ad.Parameter.glorot(d, 2 * d, "fusion.ff_w1", rng)
        self.ff_b1 = ad.Parameter.zeros(1, 2 * d, "fusion.ff_b1")
        self.ff_w2 = ad.Parameter.glorot(2 * d, d, "fusion.ff_w2", rng)
        self.ff_b2 = ad.Parameter.zeros(1, d, "fusion.ff_b2")

    def parameters(self) -> list:
        return [
            self.w_q, self.w_k, self.w_v,
            self.ln_gain, self.ln_bias,
            self.ff_w1, self.ff_b1, self.ff_w2, self.ff_b2,
        ]

    def _check_width(self, tokens: ad.Tensor, which: str) -> None:
        if tokens.cols != self.d:
            raise ContractError(
                f"{which} tokens must have width {self.d}, got {tokens.data.shape}"
            )

    def _post_block(self, attended: ad.Tensor) -> ad.Tensor:
        """Row-wise layernorm then feed-forward with a residual connection."""
        tape = attended.tape
        normed = ad.layer_norm(attended, tape.read(self.ln_gain), tape.read(self.ln_bias))
        hidden = ad.silu(ad.add(ad.matmul(normed, tape.read(self.ff_w1)), tape.read(self.ff_b1)))
        ff = ad.add(ad.matmul(hidden, tape.read(self.ff_w2)), tape.read(self.ff_b2))
        return ad.add(normed, ff)

    def fuse(self, cfg: FusionConfig, pathway_tokens: ad.Tensor,
             patch_tokens: ad.Tensor) -> FusionOutput:
        """Block-path attention: the patch-patch quadrant is never built."""
        self._check_width(pathway_tokens, "pathway")
        self._check_width(patch_tokens, "patch")
        tape = pathway_tokens.tape
        n_p, n_h = pathway_tokens.rows, patch_tokens.rows
        inv_sqrt_d = 1.0 / np.sqrt(self.d)

        q_p = ad.matmul(pathway_tokens, tape.read(self.w_q))
        k_p = ad.matmul(pathway_tokens, tape.read(self.w_k))
        v_p = ad.matmul(pathway_tokens, tape.read(self.w_v))

        if cfg.include_p_to_h:
            k_h = ad.matmul(patch_tokens, tape.read(self.w_k))
            v_h = ad.matmul(patch_tokens, tape.read(self.w_v))
            keys = ad.concat_rows(k_p, k_h)
            values = ad.concat_rows(v_p, v_h)
        else:
            keys, values = k_p, v_p

        scores_p = ad.scale(ad.matmul(q_p, ad.transpose(keys)), inv_sqrt_d)
        soft_p = ad.row_softmax(scores_p)
        attended_p = ad.matmul(soft_p, values)

        if cfg.include_h_to_p:
            q_h = ad.matmul(patch_tokens, tape.read(self.w_q))
            scores_h = ad.scale(ad.matmul(q_h, ad.transpose(k_p)), inv_sqrt_d)
            soft_h = ad.row_softmax(scores_h)
            attended_h = ad.matmul(soft_h, v_p)
            attn_hp = soft_h.data.copy()
        else:
            # no enabled keys: the attention readout for patch rows is empty,
            # i.e. a zero vector per row (layernorm then maps it to its bias)
            attended_h = tape.constant(np.zeros((n_h, self.d)))
            attn_hp = np.zeros((n_h, 0))

        pathway_out = self._post_block(attended_p)
        patch_out = self._post_block(attended_h)
        pooled = ad.concat_cols(ad.mean_rows(pathway_out), ad.mean_rows(patch_out))

        attn_pp = soft_p.data[:, :n_p].copy()
        attn_ph = soft_p.data[:, n_p:].copy() if cfg.include_p_to_h else np.zeros((n_p, 0))
        return FusionOutput(
            pooled=pooled,
            pathway_out=pathway_out,
            patch_out=patch_out,
            attn_pp=attn_pp,
            attn_ph=attn_ph,
            attn_hp=attn_hp,
            score_entries=score_entry_count(n_p, n_h, cfg),
        )

    def dense_reference(self, pathway_tokens: ad.Tensor, patch_tokens: ad.Tensor,
                        mask_patch_block: bool = True) -> FusionOutput:
        """Full (n_p+n_h)^2 attention with the patch-patch block masked.

        Small inputs only; this is the oracle the block path is checked
        against and the dense half of the benchmark.
        """
        self._check_width(pathway_tokens, "pathway")
        self._check_width(patch_tokens, "patch")
        tape = pathway_tokens.tape
        n_p, n_h = pathway_tokens.rows, patch_tokens.rows
        total = n_p + n_h
        if total > DENSE_GUARD:
            raise ContractError(
                f"dense reference refuses {total} tokens (guard {DENSE_GUARD})"
            )
        if n_p == 0 and mask_patch_block:
            raise ContractError("masked dense attention needs >= 1 pathway token")

        x = ad.concat_rows(pathway_tokens, patch_tokens) if n_p else patch_tokens
        q = ad.matmul(x, tape.read(self.w_q))
        k = ad.matmul(x, tape.read(self.w_k))
        v = ad.matmul(x, tape.read(self.w_v))
        scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(self.d))
        keep = np.ones((total, total), dtype=np.uint8)
        if mask_patch_block:
            keep[n_p:, n_p:] = 0
        soft = ad.row_softmax(scores, keep)
        attended = ad.matmul(soft, v)
        out = self._post_block(attended)

        # row-wise ops commute with partitioning, so slicing after the
        # shared block equals running the block per modality
        sel_p = np.zeros((n_p, total))
        sel_p[:, :n_p] = np.eye(n_p)
        sel_h = np.zeros((n_h, total))
        sel_h[:, n_p:] = np.eye(n_h)
        pathway_out = ad.matmul(tape.constant(sel_p), out)
        patch_out = ad.matmul(tape.constant(sel_h), out)
        if n_p:
            mean_p = ad.mean_rows(pathway_out)
        else:
            mean_p = tape.constant(np.zeros((1, self.d)))
        pooled = ad.concat_cols(mean_p, ad.mean_rows(patch_out))

        return FusionOutput(
            pooled=pooled,
            pathway_out=pathway_out,
            patch_out=patch_out,
            attn_pp=soft.data[:n_p, :n_p].copy(),
            attn_ph=soft.data[:n_p, n_p:].copy(),
            attn_hp=soft.data[n_p:, :n_p].copy(),
            score_entries=dense_entry_count(n_p, n_h),
        )
