"""Attribution: integrated gradients plus attention-based importances.

Gene attributions are computed in z-scored space against a zero baseline,
which corresponds to the per-gene training mean in raw space. Pathway
scores sum member-gene attributions; patch scores sum each embedding
row's attributions. A positive score ties the input to higher risk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericError
from .fusion import FusionOutput
from .model import RiskModel
from .patches import PatchEmbeddingSet
from .survival import risk_tensor

DEFAULT_STEPS = 128
MIN_STEPS = 8


def _check_steps(steps: int) -> int:
    steps = int(steps)
    if steps < MIN_STEPS:
        raise ContractError(f"need at least {MIN_STEPS} steps, got {steps}")
    return steps


def path_attributions(forward_fn, inputs, baselines, steps) -> list:
    """Midpoint-rule integrated gradients over several inputs.

    forward_fn(*points) must return (tape, scalar tensor, input handles),
    one handle per input. Attribution per coordinate is
    (x - x') * mean of the gradients sampled at the segment midpoints
    x' + ((s - 1/2)/steps)(x - x') for s = 1..steps. Midpoint sampling is
    second-order accurate and never evaluates at the baseline itself,
    where a zero input would sit exactly on activation kinks.
    """
    steps = _check_steps(steps)
    inputs = [np.asarray(x, dtype=np.float64) for x in inputs]
    baselines = [np.asarray(b, dtype=np.float64) for b in baselines]
    if len(inputs) != len(baselines):
        raise ContractError(
            f"{len(inputs)} inputs but {len(baselines)} baselines"
        )
    for x, b in zip(inputs, baselines):
        if x.shape != b.shape:
            raise ContractError(
                f"baseline shape {b.shape} does not match input {x.shape}"
            )
    deltas = [x - b for x, b in zip(inputs, baselines)]
    grads = [np.zeros_like(x) for x in inputs]
    for s in range(1, steps + 1):
        alpha = (s - 0.5) / steps
        points = [b + alpha * d for b, d in zip(baselines, deltas)]
        tape, scalar, handles = forward_fn(*points)
        tape.backward(scalar)
        for acc, handle in zip(grads, handles):
            acc += tape.grad(handle)
    return [d * g / steps for d, g in zip(deltas, grads)]


@dataclass
class CaseAttribution:
    gene_scores: np.ndarray     # one per gene, raw-gene order
    pathway_scores: np.ndarray  # one per pathway definition
    patch_scores: np.ndarray    # one per patch row
    patch_matrix: np.ndarray    # per patch, per embedding coordinate
    risk: float
    baseline_risk: float

    @property
    def total(self) -> float:
        return float(self.gene_scores.sum() + self.patch_scores.sum())

    @property
    def completeness_gap(self) -> float:
        """Absolute gap between summed attributions and the risk delta."""
        return abs(self.total - (self.risk - self.baseline_risk))


def _risk_at(model: RiskModel, z, emb) -> float:
    fwd = model.forward_z(z, emb)
    risk = risk_tensor(fwd.logits, model.cfg.risk_mode)
    return float(risk.data[0, 0])


def integrated_gradients(
    model: RiskModel,
    genes: np.ndarray,
    pset: PatchEmbeddingSet,
    steps: int = DEFAULT_STEPS,
    gene_baseline: np.ndarray = None,
    patch_baseline: np.ndarray = None,
) -> CaseAttribution:
    """Attribute the risk score to genes, pathways, and patches.

    The default baseline is zero in z-space for genes (the per-gene
    training mean) and an all-zero matrix for patch embeddings. An
    explicit gene baseline is taken in raw expression units.
    """
    if model.normalizer is None:
        raise ContractError("model has no fitted normalizer")
    z = model.normalizer.transform(np.asarray(genes, dtype=np.float64))
    z = z.reshape(1, -1)
    emb = np.asarray(pset.embeddings, dtype=np.float64)

    if gene_baseline is None:
        z0 = np.zeros_like(z)
    else:
        gene_baseline = np.asarray(gene_baseline, dtype=np.float64)
        if gene_baseline.size != z.size:
            raise ContractError(
                f"gene baseline has {gene_baseline.size} entries, "
                f"input has {z.size}"
            )
        z0 = model.normalizer.transform(gene_baseline).reshape(1, -1)
    e0 = (np.zeros_like(emb) if patch_baseline is None
          else np.asarray(patch_baseline, dtype=np.float64))

    def run(zp, ep):
        fwd = model.forward_z(zp, ep)
        risk = risk_tensor(fwd.logits, model.cfg.risk_mode)
        return fwd.tape, risk, (fwd.gene_input, fwd.patch_input)

    gene_attr, patch_matrix = path_attributions(
        run, [z, emb], [z0, e0], steps
    )
    gene_scores = gene_attr.ravel()
    pathway_scores = np.array(
        [gene_scores[np.asarray(d.indices, dtype=np.int64)].sum()
         for d in model.defs]
    )
    return CaseAttribution(
        gene_scores=gene_scores,
        pathway_scores=pathway_scores,
        patch_scores=patch_matrix.sum(axis=1),
        patch_matrix=patch_matrix,
        risk=_risk_at(model, z, emb),
        baseline_risk=_risk_at(model, z0, e0),
    )


CROSS_DIRECTIONS = ("p_to_h", "h_to_p", "patch_to_p")


def cross_modal_importance(out: FusionOutput, index: int,
                           direction: str = "p_to_h") -> list:
    """Attention mass linking one token to the other modality's tokens.

    p_to_h: how much pathway `index` attends each patch (row of the
    pathway-to-patch slice). h_to_p: how much each patch attends pathway
    `index` (column of the patch-to-pathway slice). patch_to_p: how much
    patch `index` attends each pathway. Pairs come back sorted by weight,
    descending, ties by index.
    """
    if direction == "p_to_h":
        table = out.attn_ph
        if not 0 <= index < table.shape[0]:
            raise IndexError(
                f"pathway index {index} outside 0..{table.shape[0] - 1}"
            )
        weights = table[index, :]
    elif direction == "h_to_p":
        table = out.attn_hp
        if not 0 <= index < table.shape[1]:
            raise IndexError(
                f"pathway index {index} outside 0..{table.shape[1] - 1}"
            )
        weights = table[:, index]
    elif direction == "patch_to_p":
        table = out.attn_hp
        if not 0 <= index < table.shape[0]:
            raise IndexError(
                f"patch index {index} outside 0..{table.shape[0] - 1}"
            )
        weights = table[index, :]
    else:
        raise ContractError(
            f"direction must be one of {CROSS_DIRECTIONS}, got {direction!r}"
        )
    order = np.lexsort((np.arange(weights.size), -weights))
    return [(int(j), float(weights[j])) for j in order]


def modality_attribution(model: RiskModel, genes=None, pset=None,
                         steps: int = DEFAULT_STEPS, tokens=None) -> tuple:
    """(wsi, omics) fractions of absolute attribution mass.

    Attribution runs against the pre-attention token matrices, zero
    baseline, so the split reflects what fusion actually consumes.
    Either raw inputs or an explicit (pathway tokens, patch tokens)
    pair must be supplied.
    """
    if tokens is None:
        if genes is None or pset is None:
            raise ContractError("need either raw inputs or token matrices")
        fwd = model.forward(genes, pset)
        tok_p = fwd.pathway_tokens.data.copy()
        tok_h = fwd.patch_tokens.data.copy()
    else:
        tok_p, tok_h = (np.asarray(t, dtype=np.float64) for t in tokens)

    def run(tp, th):
        out = model.forward_tokens(tp, th)
        risk = risk_tensor(out.logits, model.cfg.risk_mode)
        return out.tape, risk, (out.gene_input, out.patch_input)

    attr_p, attr_h = path_attributions(
        run, [tok_p, tok_h], [np.zeros_like(tok_p), np.zeros_like(tok_h)],
        steps,
    )
    mass_p = float(np.abs(attr_p).sum())
    mass_h = float(np.abs(attr_h).sum())
    total = mass_p + mass_h
    if total == 0.0:
        raise NumericError("total attribution is zero; fractions undefined")
    return mass_h / total, mass_p / total


@dataclass
class AttributionReport:
    case_attr: CaseAttribution
    fusion: FusionOutput
    wsi_fraction: float
    omics_fraction: float

    def __post_init__(self):
        if abs(self.wsi_fraction + self.omics_fraction - 1.0) > 1e-9:
            raise NumericError("modality fractions must sum to 1")
        for arr in (self.case_attr.gene_scores, self.case_attr.patch_scores):
            if not np.all(np.isfinite(arr)):
                raise NumericError("attribution contains non-finite scores")


def attribute_case(model: RiskModel, genes: np.ndarray,
                   pset: PatchEmbeddingSet,
                   steps: int = DEFAULT_STEPS) -> AttributionReport:
    case_attr = integrated_gradients(model, genes, pset, steps=steps)
    fusion = model.forward(genes, pset).fusion
    wsi, omics = modality_attribution(model, genes, pset, steps=steps)
    return AttributionReport(case_attr, fusion, wsi, omics)


def rank_by_magnitude(names, scores) -> list:
    """(name, score) pairs sorted by |score| descending, ties by name."""
    scores = np.asarray(scores, dtype=np.float64)
    if len(names) != scores.size:
        raise ContractError(f"{len(names)} names for {scores.size} scores")
    order = sorted(range(scores.size), key=lambda i: (-abs(scores[i]), names[i]))
    return [(names[i], float(scores[i])) for i in order]


def aggregate_pathway_importance(per_case_scores) -> np.ndarray:
    """Mean absolute pathway attribution across cases."""
    stack = np.stack([np.asarray(s, dtype=np.float64) for s in per_case_scores])
    return np.abs(stack).mean(axis=0)


def top_cross_pairs(out: FusionOutput, k: int = 20) -> list:
    """Strongest pathway-to-patch attention links as (i, j, weight)."""
    table = out.attn_ph
    if table.size == 0:
        return []
    k = min(int(k), table.size)
    flat = np.argsort(table, axis=None, kind="stable")[::-1][:k]
    rows, cols = np.unravel_index(flat, table.shape)
    return [(int(i), int(j), float(table[i, j])) for i, j in zip(rows, cols)]
