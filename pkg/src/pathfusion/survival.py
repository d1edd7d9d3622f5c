"""Discrete-time survival head: bin fitting, hazards, censored NLL, risk.

Time is discretized into n bins by training-split quantiles of the
uncensored event times. The head maps the fused embedding to n logits;
sigmoid of a logit is that bin's hazard, and survival through bin j is
the running product of (1 - hazard).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError, FitError

HAZARD_CLAMP = 1e-7
RISK_MODES = ("neg_sum_survival", "neg_sum_logits")
DEFAULT_BINS = 4


@dataclass
class SurvivalRecord:
    case_id: str
    time: float
    censorship: int  # 0 = death observed, 1 = censored
    bin_index: int | None = None

    def __post_init__(self):
        if self.time < 0:
            raise ContractError(f"{self.case_id}: negative time {self.time}")
        if self.censorship not in (0, 1):
            raise ContractError(
                f"{self.case_id}: censorship must be 0 or 1, got {self.censorship}"
            )


@dataclass
class BinEdges:
    edges: np.ndarray  # n-1 strictly increasing cut points, months
    n: int

    def assign(self, time: float) -> int:
        """Bin index = number of edges strictly below the time."""
        return int(np.sum(self.edges < time))


def fit_bins(times, censorships, n: int = DEFAULT_BINS) -> BinEdges:
    """Quantile cut points over uncensored event times only."""
    times = np.asarray(times, dtype=np.float64)
    cens = np.asarray(censorships)
    if times.shape != cens.shape:
        raise ContractError("times and censorships must align")
    if n < 2:
        raise ContractError(f"need at least 2 bins, got {n}")
    events = times[cens == 0]
    if np.unique(events).size < n:
        raise FitError(
            f"need at least {n} distinct uncensored event times, "
            f"got {np.unique(events).size}"
        )
    qs = np.arange(1, n) / n
    edges = np.quantile(events, qs)
    if np.any(np.diff(edges) <= 0):
        raise FitError("quantile edges are not strictly increasing")
    return BinEdges(edges, n)


def assign_bins(records, edges: BinEdges) -> None:
    for rec in records:
        rec.bin_index = edges.assign(rec.time)


@dataclass
class HazardOutput:
    """Plain-array view of one patient's head output."""

    logits: np.ndarray
    hazards: np.ndarray
    survival: np.ndarray
    risk: float


def hazard_curve(logits: np.ndarray, risk_mode: str = RISK_MODES[0]) -> HazardOutput:
    """Numpy mirror of the on-tape hazard/survival/risk computation."""
    if risk_mode not in RISK_MODES:
        raise ContractError(f"unknown risk mode {risk_mode!r}")
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    hazards = np.clip(_sigmoid(logits), HAZARD_CLAMP, 1.0 - HAZARD_CLAMP)
    survival = np.cumprod(1.0 - hazards)
    if risk_mode == "neg_sum_survival":
        risk = -float(survival.sum())
    else:
        risk = -float(logits.sum())
    return HazardOutput(logits, hazards, survival, risk)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class SurvivalHead:
    """Two-layer MLP from the pooled 2d embedding to n bin logits."""

    def __init__(self, d: int, n_bins: int, rng):
        self.d = int(d)
        self.n_bins = int(n_bins)
        self.w1 = ad.Parameter.glorot(2 * d, d, "head.w1", rng)
        self.b1 = ad.Parameter.zeros(1, d, "head.b1")
        self.w2 = ad.Parameter.glorot(d, n_bins, "head.w2", rng)
        self.b2 = ad.Parameter.zeros(1, n_bins, "head.b2")

    def parameters(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2]

    def logits(self, pooled: ad.Tensor) -> ad.Tensor:
        if pooled.data.shape != (1, 2 * self.d):
            raise ContractError(
                f"head expects a 1x{2 * self.d} embedding, got {pooled.data.shape}"
            )
        tape = pooled.tape
        hidden = ad.silu(ad.add(ad.matmul(pooled, tape.read(self.w1)), tape.read(self.b1)))
        return ad.add(ad.matmul(hidden, tape.read(self.w2)), tape.read(self.b2))


def _clamped_hazards(logits: ad.Tensor) -> ad.Tensor:
    return ad.clamp(ad.sigmoid(logits), HAZARD_CLAMP, 1.0 - HAZARD_CLAMP)


def nll_survival_loss(logit_tensors, records) -> ad.Tensor:
    """Censored negative log-likelihood, summed over the batch.

    Per sample with bin y and censorship c the term is
    -[ c*log f_surv(y) + (1-c)*log f_surv(y-1) + (1-c)*log hazard_y ]
    where f_surv(j) is the product of (1 - hazard_k) for k <= j and
    f_surv(-1) is 1. The log-survival parts fold into one weighted sum
    over log(1 - hazard_k): weight 1 for k < y, weight c at k = y.
    """
    logit_tensors = list(logit_tensors)
    records = list(records)
    if len(logit_tensors) != len(records):
        raise ContractError(
            f"{len(logit_tensors)} logit rows vs {len(records)} records"
        )
    if not records:
        raise ContractError("empty batch")
    total = None
    for tensor, rec in zip(logit_tensors, records):
        if rec.bin_index is None:
            raise ContractError(f"{rec.case_id}: bin not assigned")
        n = tensor.cols
        if tensor.rows != 1 or not 0 <= rec.bin_index < n:
            raise ContractError(
                f"{rec.case_id}: bin {rec.bin_index} outside 1x{n} logits"
            )
        y, c = rec.bin_index, rec.censorship
        hazards = _clamped_hazards(tensor)
        log_one_minus = ad.log(ad.affine(hazards, -1.0, 1.0))
        weights = np.zeros((1, n))
        weights[0, :y] = 1.0
        weights[0, y] = float(c)
        term = ad.weighted_sum(log_one_minus, weights)
        if c == 0:
            pick = np.zeros((1, n))
            pick[0, y] = 1.0
            term = ad.add(term, ad.weighted_sum(ad.log(hazards), pick))
        total = term if total is None else ad.add(total, term)
    return ad.scale(total, -1.0)


def risk_tensor(logits: ad.Tensor, risk_mode: str = RISK_MODES[0]) -> ad.Tensor:
    """Scalar risk on the tape, for gradient-based attribution."""
    if risk_mode not in RISK_MODES:
        raise ContractError(f"unknown risk mode {risk_mode!r}")
    if risk_mode == "neg_sum_logits":
        return ad.scale(ad.sum_all(logits), -1.0)
    n = logits.cols
    hazards = _clamped_hazards(logits)
    log_one_minus = ad.log(ad.affine(hazards, -1.0, 1.0))
    # upper-triangular ones: column j accumulates log terms for k <= j
    tri = np.triu(np.ones((n, n)))
    log_surv = ad.matmul(log_one_minus, logits.tape.constant(tri))
    return ad.scale(ad.sum_all(ad.exp(log_surv)), -1.0)
