"""Planted-signal synthetic dataset generator.

One designated pathway carries the risk signal: a case's true risk is a
monotone function of that pathway's realized mean expression, and a
noisy copy of the same standardized score is planted along a fixed
direction in the patch embeddings. Survival times are exponential with
rate exp(risk)/scale, censored by an independent exponential clock.
Every byte written is a pure function of the config.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from .data import CaseLabel, ExpressionTable, write_expression, write_labels, write_splits
from .errors import ContractError
from .patches import write_embeddings
from .rng import Rng, derive_seed
from .trainer import make_folds


@dataclass
class SynthConfig:
    n_cases: int = 60
    n_pathways: int = 50
    genes_per_pathway: int = 8
    n_orphan_genes: int = 100  # genes outside every pathway
    patches_per_case: int = 200
    embed_dim: int = 16
    strength: float = 8.0
    planted_gene_noise: float = 0.35  # spread of planted genes around their factor
    h_strength: float = 1.0    # patch-direction coefficient per unit score
    h_slide_noise: float = 3.0  # per-case noise added to the histology signal
    h_patch_noise: float = 0.3  # per-patch jitter along the direction
    planted_pathway: int = 0
    n_sites: int = 3
    folds: int = 5
    time_scale_months: float = 36.0
    censor_scale_months: float = 90.0
    seed: int = 0

    def __post_init__(self):
        if self.n_cases < self.folds:
            raise ContractError("fewer cases than folds")
        if not 0 <= self.planted_pathway < self.n_pathways:
            raise ContractError(
                f"planted pathway {self.planted_pathway} outside "
                f"[0, {self.n_pathways})"
            )
        if self.strength < 0:
            raise ContractError("signal strength must be >= 0")

    @property
    def n_genes(self) -> int:
        return self.n_pathways * self.genes_per_pathway + self.n_orphan_genes


@dataclass
class SynthResult:
    out_dir: str
    gmt_path: str
    expression_path: str
    labels_path: str
    splits_path: str
    patch_dir: str
    truth_path: str
    true_risks_path: str
    truth: dict


def _case_ids(n: int) -> list:
    width = max(3, len(str(n - 1)))
    return [f"case{str(i).zfill(width)}" for i in range(n)]


def _gene_names(n: int) -> list:
    width = max(4, len(str(n - 1)))
    return [f"G{str(i).zfill(width)}" for i in range(n)]


def generate(cfg: SynthConfig, out_dir) -> SynthResult:
    os.makedirs(out_dir, exist_ok=True)
    patch_dir = os.path.join(out_dir, "patches")
    os.makedirs(patch_dir, exist_ok=True)

    case_ids = _case_ids(cfg.n_cases)
    gene_names = _gene_names(cfg.n_genes)
    pathway_names = [
        f"SYNTH_PATHWAY_{str(i).zfill(2)}" for i in range(cfg.n_pathways)
    ]

    # disjoint consecutive gene blocks per pathway; the tail genes are orphans
    member_idx = {
        name: np.arange(i * cfg.genes_per_pathway, (i + 1) * cfg.genes_per_pathway)
        for i, name in enumerate(pathway_names)
    }

    gmt_path = os.path.join(out_dir, "pathways.gmt")
    with open(gmt_path, "w", encoding="utf-8") as fh:
        for name in pathway_names:
            genes = [gene_names[j] for j in member_idx[name]]
            fh.write("\t".join([name, "synthetic gene set"] + genes) + "\n")

    # expression: background genes are iid standard normal; the planted
    # pathway is co-regulated, every member gene tracking one latent factor
    # per case, so each of them is individually informative.  The realized
    # pathway mean per case becomes the risk score after standardization.
    expr_rng = Rng(derive_seed(cfg.seed, "synth", "expression"))
    values = expr_rng.normal_matrix(cfg.n_genes, cfg.n_cases)
    planted_name = pathway_names[cfg.planted_pathway]
    planted_genes = member_idx[planted_name]
    factor_rng = Rng(derive_seed(cfg.seed, "synth", "factor"))
    factor = factor_rng.normal(cfg.n_cases)
    values[planted_genes, :] = (
        factor[None, :] + cfg.planted_gene_noise * values[planted_genes, :]
    )
    raw_score = values[planted_genes, :].mean(axis=0)
    score = (raw_score - raw_score.mean()) / raw_score.std()
    true_risk = cfg.strength * score

    expression_path = os.path.join(out_dir, "expression.tsv")
    write_expression(
        expression_path, ExpressionTable(gene_names, case_ids, values)
    )

    # patch embeddings: isotropic noise plus a noisy copy of the case
    # score along one fixed direction; the default slide-level noise keeps
    # the histology view much weaker than the omics one, so a model that
    # leans on patches alone cannot match one that reads the expression
    direction_rng = Rng(derive_seed(cfg.seed, "synth", "direction"))
    direction = direction_rng.normal(cfg.embed_dim)
    direction /= np.sqrt((direction ** 2).sum())
    slide_ids = [f"{cid}_slide" for cid in case_ids]
    slide_rng = Rng(derive_seed(cfg.seed, "synth", "slide-noise"))
    slide_latent = score + cfg.h_slide_noise * slide_rng.normal(cfg.n_cases)
    for i, cid in enumerate(case_ids):
        prng = Rng(derive_seed(cfg.seed, "synth", "patches", cid))
        emb = prng.normal_matrix(cfg.patches_per_case, cfg.embed_dim)
        per_patch = (cfg.h_strength * slide_latent[i]
                     + cfg.h_patch_noise * prng.normal(cfg.patches_per_case))
        emb += per_patch[:, None] * direction[None, :]
        side = max(1, int(np.ceil(np.sqrt(cfg.patches_per_case))))
        rows = np.arange(cfg.patches_per_case)
        coords = np.stack([(rows % side) * 256, (rows // side) * 256], axis=1)
        write_embeddings(
            os.path.join(patch_dir, f"{slide_ids[i]}.pfe"),
            emb, coords.astype(np.int32),
        )

    # survival: exponential event time with rate exp(risk)/scale, censored
    # by an independent exponential clock
    surv_rng = Rng(derive_seed(cfg.seed, "synth", "survival"))
    u_event = surv_rng.uniform(cfg.n_cases)
    u_censor = surv_rng.uniform(cfg.n_cases)
    event_t = -np.log(1.0 - u_event) * cfg.time_scale_months * np.exp(-true_risk)
    censor_t = -np.log(1.0 - u_censor) * cfg.censor_scale_months
    observed = np.minimum(event_t, censor_t)
    censorship = (censor_t < event_t).astype(int)

    labels = [
        CaseLabel(cid, slide_ids[i], float(observed[i]), int(censorship[i]))
        for i, cid in enumerate(case_ids)
    ]
    labels_path = os.path.join(out_dir, "labels.csv")
    write_labels(labels_path, labels)

    site_rng = Rng(derive_seed(cfg.seed, "synth", "sites"))
    sites = {cid: f"site{site_rng.below(cfg.n_sites)}" for cid in case_ids}
    splits = make_folds(
        [(cid, sites[cid]) for cid in case_ids], cfg.folds, cfg.seed
    )
    splits_path = os.path.join(out_dir, "splits.csv")
    write_splits(
        splits_path,
        {s.fold_id: {"train": s.train_ids, "val": s.val_ids} for s in splits},
    )

    true_risks_path = os.path.join(out_dir, "true_risks.csv")
    with open(true_risks_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("case_id,risk\n")
        for i, cid in enumerate(case_ids):
            fh.write(f"{cid},{float(true_risk[i])!r}\n")

    truth = {
        "planted_pathway": planted_name,
        "planted_gene_indices": [int(j) for j in planted_genes],
        "direction": [float(v) for v in direction],
        "strength": cfg.strength,
        "true_risks": {cid: float(true_risk[i]) for i, cid in enumerate(case_ids)},
        "sites": sites,
        "config": asdict(cfg),
    }
    truth_path = os.path.join(out_dir, "truth.json")
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, sort_keys=True, indent=1)
        fh.write("\n")

    return SynthResult(
        out_dir=str(out_dir),
        gmt_path=gmt_path,
        expression_path=expression_path,
        labels_path=labels_path,
        splits_path=splits_path,
        patch_dir=patch_dir,
        truth_path=truth_path,
        true_risks_path=true_risks_path,
        truth=truth,
    )
