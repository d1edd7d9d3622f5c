"""Gene-set parsing, coverage filtering, and pathway token encoding.

A pathway token is produced by a small per-pathway MLP that reads only
that pathway's member genes, so the Jacobian of tokens w.r.t. the
expression vector is structurally sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ContractError, DataError, ParseError

GRANULARITIES = ("single", "families", "hallmarks", "reactome", "combined")

DEFAULT_COVERAGE = 0.9
DEFAULT_DROPOUT = 0.25


@dataclass
class PathwayDefinition:
    """One named gene set; indices resolve members into a gene index."""

    name: str
    description: str
    members: tuple
    indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.members)


def parse_gene_sets(path) -> list:
    """Parse a GMT file: per line, tab-separated name, description, genes.

    Duplicate genes within one set are dropped (first occurrence kept);
    duplicate set names across lines are an error.
    """
    defs = []
    seen = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) < 3:
                raise ParseError(
                    f"{path}: line {lineno}: expected at least 3 tab-separated "
                    f"fields, got {len(fields)}"
                )
            name, description = fields[0], fields[1]
            if name in seen:
                raise DataError(
                    f"{path}: line {lineno}: duplicate gene-set name {name!r} "
                    f"(first seen on line {seen[name]})"
                )
            seen[name] = lineno
            members = []
            unique = set()
            for gene in fields[2:]:
                if gene and gene not in unique:
                    unique.add(gene)
                    members.append(gene)
            if not members:
                raise ParseError(
                    f"{path}: line {lineno}: gene set {name!r} has no genes"
                )
            defs.append(PathwayDefinition(name, description, tuple(members)))
    return defs


def filter_by_coverage(defs, gene_names, threshold: float = DEFAULT_COVERAGE) -> list:
    """Keep sets with >= threshold of members present in the gene index.

    Kept definitions get their resolved indices populated with the present
    members only; absent members are dropped, not imputed.
    """
    if not 0.0 < threshold <= 1.0:
        raise ContractError(f"coverage threshold must be in (0, 1], got {threshold}")
    index = {name: i for i, name in enumerate(gene_names)}
    if len(index) != len(gene_names):
        raise DataError("gene index contains duplicate names")
    kept = []
    for d in defs:
        present = [index[g] for g in d.members if g in index]
        if len(present) / d.size >= threshold:
            kept.append(
                PathwayDefinition(
                    d.name,
                    d.description,
                    d.members,
                    np.array(sorted(present), dtype=np.int64),
                )
            )
    return kept


def single_definition(gene_names) -> PathwayDefinition:
    """Whole-transcriptome pseudo-set for the no-tokenization setting."""
    return PathwayDefinition(
        "ALL_GENES",
        "all genes as one token",
        tuple(gene_names),
        np.arange(len(gene_names), dtype=np.int64),
    )


def check_granularity(value: str) -> str:
    if value not in GRANULARITIES:
        raise ConfigError(
            f"unknown tokenizer granularity {value!r}; "
            f"expected one of {', '.join(GRANULARITIES)}"
        )
    return value


class Normalizer:
    """Per-gene standardization fitted on the training split only."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        self.std = np.asarray(std, dtype=np.float64).reshape(-1)
        if self.mean.shape != self.std.shape:
            raise ContractError("normalizer mean/std length mismatch")

    @staticmethod
    def fit(samples_by_genes: np.ndarray) -> "Normalizer":
        """Fit from an n_samples x n_genes matrix."""
        x = np.asarray(samples_by_genes, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ContractError("normalizer needs a non-empty 2-D sample matrix")
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        # constant genes map to z = 0 rather than dividing by ~0
        std = np.where(std < 1e-8, 1.0, std)
        return Normalizer(mean, std)

    def transform(self, vector: np.ndarray) -> np.ndarray:
        v = np.asarray(vector, dtype=np.float64).reshape(-1)
        if v.shape != self.mean.shape:
            raise ContractError(
                f"expression length {v.shape[0]} does not match fitted "
                f"normalizer ({self.mean.shape[0]} genes)"
            )
        return (v - self.mean) / self.std


def hidden_width(member_count: int) -> int:
    return max(4, math.ceil(member_count / 2))


class PathwayEncoder:
    """Per-pathway 2-layer MLPs mapping member-gene values to d-dim tokens."""

    def __init__(self, defs, n_genes: int, d: int, rng,
                 dropout_rate: float = DEFAULT_DROPOUT):
        if not defs:
            raise ContractError("encoder needs at least one pathway definition")
        resolved = []
        for pd in defs:
            if pd.indices is None:
                raise ContractError(
                    f"pathway {pd.name!r} has unresolved indices; "
                    "run filter_by_coverage first"
                )
            idx = np.asarray(pd.indices, dtype=np.int64)
            if idx.max() >= n_genes:
                raise ContractError(
                    f"pathway {pd.name!r} indexes gene {idx.max()} "
                    f"outside a {n_genes}-gene index"
                )
            resolved.append(idx)
        self.defs = list(defs)
        self.n_genes = int(n_genes)
        self.d = int(d)
        self.dropout_rate = float(dropout_rate)
        self.branches = []
        for i, pd in enumerate(self.defs):
            n_in = len(resolved[i])
            h = hidden_width(n_in)
            self.branches.append(
                {
                    "indices": resolved[i],
                    "w1": ad.Parameter.glorot(n_in, h, f"pathway.{i}.w1", rng),
                    "b1": ad.Parameter.zeros(1, h, f"pathway.{i}.b1"),
                    "w2": ad.Parameter.glorot(h, self.d, f"pathway.{i}.w2", rng),
                    "b2": ad.Parameter.zeros(1, self.d, f"pathway.{i}.b2"),
                }
            )

    @property
    def n_pathways(self) -> int:
        return len(self.defs)

    def parameters(self) -> list:
        params = []
        for br in self.branches:
            params.extend([br["w1"], br["b1"], br["w2"], br["b2"]])
        return params

    def encode(self, g: ad.Tensor, training: bool = False, rng=None) -> ad.Tensor:
        """Map a 1 x N_genes tensor to N_pathways x d tokens."""
        if g.rows != 1 or g.cols != self.n_genes:
            raise ContractError(
                f"expression tensor must be 1 x {self.n_genes}, got {g.data.shape}"
            )
        if training and rng is None:
            raise ContractError("training-mode encode needs an rng for dropout")
        tape = g.tape
        rows = []
        for br in self.branches:
            sub = ad.gather_cols(g, br["indices"])
            hidden = ad.silu(ad.add(ad.matmul(sub, tape.read(br["w1"])), tape.read(br["b1"])))
            hidden = ad.dropout(hidden, self.dropout_rate, rng, training)
            rows.append(ad.add(ad.matmul(hidden, tape.read(br["w2"])), tape.read(br["b2"])))
        return ad.stack_rows(rows)
