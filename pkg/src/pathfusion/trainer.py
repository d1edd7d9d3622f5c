"""Cross-validation training loop: stratified folds, batch-size-1 steps,
per-step patch subsampling, best-epoch model selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DataError, MetricError, NumericError
from .metrics import RiskedCohort, c_index
from .model import ModelConfig, RiskModel
from .pathways import Normalizer
from .patches import subsample
from .rng import Rng, derive_seed
from .survival import fit_bins, nll_survival_loss

OPTIMIZERS = ("adam", "radam")


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    weight_decay: float = 1e-3
    epochs: int = 20
    batch_size: int = 1
    patch_k: int = 4096
    seed: int = 0
    folds: int = 5
    optimizer: str = "adam"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ContractError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size != 1:
            raise ContractError("batch size is fixed at 1")
        if self.patch_k < 1:
            raise ContractError(f"patch sample size must be >= 1, got {self.patch_k}")
        if self.folds < 2:
            raise ContractError(f"need >= 2 folds, got {self.folds}")
        if self.optimizer not in OPTIMIZERS:
            raise ContractError(
                f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}"
            )


@dataclass
class FoldSplit:
    fold_id: int
    train_ids: list
    val_ids: list
    strata: dict  # case id -> stratum label


def make_folds(cases, folds: int, seed: int) -> list:
    """Per-stratum round robin after a seeded shuffle; deterministic."""
    cases = list(cases)
    if folds < 2:
        raise ContractError(f"need >= 2 folds, got {folds}")
    if folds > len(cases):
        raise ContractError(f"{folds} folds cannot split {len(cases)} cases")
    ids = [cid for cid, _ in cases]
    if len(set(ids)) != len(ids):
        raise ContractError("duplicate case ids")
    strata_map = dict(cases)
    groups: dict = {}
    for cid, stratum in cases:
        groups.setdefault(stratum, []).append(cid)

    assignment: dict = {}
    for stratum in sorted(groups):
        members = list(groups[stratum])
        Rng(derive_seed(seed, "folds", str(stratum))).shuffle(members)
        for j, cid in enumerate(members):
            assignment[cid] = j % folds

    splits = []
    for f in range(folds):
        val = [cid for cid in ids if assignment[cid] == f]
        train = [cid for cid in ids if assignment[cid] != f]
        splits.append(FoldSplit(f, train, val, strata_map))
    return splits


class Optimizer:
    """Adam or rectified Adam with decoupled weight decay.

    The decay multiplies parameters by (1 - lr*wd) before the adaptive
    update, so it never flows through the moment estimates.
    """

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, params, cfg: TrainConfig):
        self.params = list(params)
        self.lr = cfg.learning_rate
        self.wd = cfg.weight_decay
        self.rectified = cfg.optimizer == "radam"
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.rho_inf = 2.0 / (1.0 - self.BETA2) - 1.0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.BETA1, self.BETA2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        if self.rectified:
            rho = self.rho_inf - 2.0 * self.t * b2 ** self.t / bc2
        for p, m, v in zip(self.params, self.m, self.v):
            if self.wd:
                p.value *= 1.0 - self.lr * self.wd
            g = p.grad
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            m_hat = m / bc1
            if not self.rectified:
                p.value -= self.lr * m_hat / (np.sqrt(v / bc2) + self.EPS)
            elif rho > 4.0:
                rect = math.sqrt(
                    ((rho - 4.0) * (rho - 2.0) * self.rho_inf)
                    / ((self.rho_inf - 4.0) * (self.rho_inf - 2.0) * rho)
                )
                p.value -= self.lr * rect * m_hat / (np.sqrt(v / bc2) + self.EPS)
            else:
                # early steps: variance estimate untrusted, momentum only
                p.value -= self.lr * m_hat


@dataclass
class DataBundle:
    """Everything train/eval needs, keyed by case id."""

    gene_names: list
    defs: list  # resolved PathwayDefinitions
    embed_dim: int
    expression: dict  # case id -> raw expression vector
    labels: dict      # case id -> CaseLabel
    patch_sets: dict  # case id -> PatchEmbeddingSet

    def check_cases(self, ids) -> None:
        for cid in ids:
            for store, what in ((self.expression, "expression"),
                                (self.labels, "label"),
                                (self.patch_sets, "patch embeddings")):
                if cid not in store:
                    raise DataError(f"case {cid!r}: no {what} available")


@dataclass
class FoldResult:
    fold_id: int
    model: RiskModel
    log: list                  # per-epoch dicts
    best_epoch: int | None
    trained_case_ids: set = field(default_factory=set)
    val_risks: dict = field(default_factory=dict)  # case id -> risk


def _records_for(bundle: DataBundle, ids) -> dict:
    return {cid: bundle.labels[cid].to_record() for cid in ids}


def validation_cohort(model: RiskModel, bundle: DataBundle, ids) -> RiskedCohort:
    """Risks over all patches (no subsampling) for the given case ids."""
    risks, times, cens = [], [], []
    for cid in ids:
        hz = model.predict(bundle.expression[cid], bundle.patch_sets[cid])
        risks.append(hz.risk)
        lab = bundle.labels[cid]
        times.append(lab.time_months)
        cens.append(lab.censorship)
    return RiskedCohort(np.array(risks), np.array(times), np.array(cens),
                        list(ids))


def train_fold(model_cfg: ModelConfig, cfg: TrainConfig, fold: FoldSplit,
               bundle: DataBundle) -> FoldResult:
    bundle.check_cases(fold.train_ids + fold.val_ids)

    train_matrix = np.stack([bundle.expression[c] for c in fold.train_ids])
    normalizer = Normalizer.fit(train_matrix)
    records = _records_for(bundle, fold.train_ids + fold.val_ids)
    train_times = np.array([records[c].time for c in fold.train_ids])
    train_cens = np.array([records[c].censorship for c in fold.train_ids])
    edges = fit_bins(train_times, train_cens, model_cfg.n_bins)
    for rec in records.values():
        rec.bin_index = edges.assign(rec.time)

    model = RiskModel(model_cfg, bundle.gene_names, bundle.defs,
                      seed=derive_seed(cfg.seed, "model", fold.fold_id))
    model.normalizer = normalizer
    model.bin_edges = edges
    params = model.parameters()
    opt = Optimizer(params, cfg)

    result = FoldResult(fold.fold_id, model, [], None)
    best_cindex = -np.inf
    best_state = None

    for epoch in range(cfg.epochs):
        order = list(fold.train_ids)
        Rng(derive_seed(cfg.seed, "order", fold.fold_id, epoch)).shuffle(order)
        losses = []
        for step, cid in enumerate(order):
            step_seed = derive_seed(cfg.seed, fold.fold_id, epoch, step)
            pset = subsample(bundle.patch_sets[cid], cfg.patch_k, step_seed)
            fwd = model.forward(
                bundle.expression[cid], pset, training=True,
                rng=Rng(derive_seed(step_seed, "dropout")),
            )
            loss = nll_survival_loss([fwd.logits], [records[cid]])
            value = float(loss.data[0, 0])
            if not np.isfinite(value):
                raise NumericError(
                    f"non-finite loss at fold {fold.fold_id} epoch {epoch} "
                    f"step {step} (case {cid})"
                )
            model.zero_grad()
            fwd.tape.backward(loss)
            opt.step()
            result.trained_case_ids.add(cid)
            losses.append(value)

        cohort = validation_cohort(model, bundle, fold.val_ids)
        try:
            val_ci = c_index(cohort)
        except MetricError:
            val_ci = float("nan")
        result.log.append(
            {"epoch": epoch, "train_loss": float(np.mean(losses)),
             "val_cindex": val_ci}
        )
        if np.isfinite(val_ci) and val_ci > best_cindex:
            best_cindex = val_ci
            result.best_epoch = epoch
            best_state = [p.value.copy() for p in params]

    if best_state is not None:
        for p, value in zip(params, best_state):
            p.value[:] = value

    if fold.val_ids:
        cohort = validation_cohort(model, bundle, fold.val_ids)
        result.val_risks = dict(zip(cohort.case_ids, cohort.risks.tolist()))
    return result
