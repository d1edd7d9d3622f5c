"""Survival evaluation: concordance index, Kaplan-Meier, logrank, splits.

Conventions: censorship 0 means the death was observed. A pair (i, j)
is comparable for the c-index when t_i < t_j and patient i's death was
observed; risk ties score one half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ContractError, MetricError


@dataclass
class RiskedCohort:
    risks: np.ndarray
    times: np.ndarray
    censorships: np.ndarray
    case_ids: list = field(default=None, repr=False)

    def __post_init__(self):
        self.risks = np.asarray(self.risks, dtype=np.float64)
        self.times = np.asarray(self.times, dtype=np.float64)
        self.censorships = np.asarray(self.censorships, dtype=np.float64)
        if not (self.risks.shape == self.times.shape == self.censorships.shape):
            raise ContractError("cohort arrays must have equal length")
        if self.risks.ndim != 1:
            raise ContractError("cohort arrays must be 1-D")
        if np.any(self.times < 0):
            raise ContractError("negative survival time in cohort")
        if self.case_ids is not None and len(self.case_ids) != self.risks.size:
            raise ContractError("case id list does not match cohort size")

    @property
    def size(self) -> int:
        return self.risks.size


def c_index(cohort: RiskedCohort) -> float:
    numerator, comparable = _kernels.cindex_counts(
        cohort.times, cohort.censorships, cohort.risks
    )
    if comparable == 0:
        raise MetricError("c-index undefined: no comparable pair in cohort")
    return numerator / (2.0 * comparable)


@dataclass
class KMCurve:
    """Product-limit survival estimate, stepping at uncensored event times."""

    times: np.ndarray     # distinct event times, ascending
    survival: np.ndarray  # S(t) just after each event time
    at_risk: np.ndarray   # n_k at each event time

    def value_at(self, t: float) -> float:
        if self.times.size == 0:
            return 1.0
        k = int(np.searchsorted(self.times, t, side="right"))
        return 1.0 if k == 0 else float(self.survival[k - 1])


def km_estimate(times, censorships) -> KMCurve:
    times = np.asarray(times, dtype=np.float64)
    cens = np.asarray(censorships, dtype=np.float64)
    if times.size == 0:
        raise ContractError("empty cohort")
    event_times = np.unique(times[cens == 0])
    survival = np.empty(event_times.size)
    at_risk = np.empty(event_times.size, dtype=np.int64)
    s = 1.0
    for k, t in enumerate(event_times):
        n_k = int(np.sum(times >= t))
        d_k = int(np.sum((times == t) & (cens == 0)))
        s *= 1.0 - d_k / n_k
        survival[k] = s
        at_risk[k] = n_k
    return KMCurve(event_times, survival, at_risk)


def chi2_sf(x: float, df: int = 1) -> float:
    """Chi-square survival function; the two-group logrank needs df=1,
    where it reduces to erfc(sqrt(x/2))."""
    if df != 1:
        raise ContractError(f"only df=1 is supported, got {df}")
    if x < 0:
        raise ContractError(f"chi-square statistic must be >= 0, got {x}")
    return math.erfc(math.sqrt(x / 2.0))


def logrank_test(group_a: RiskedCohort, group_b: RiskedCohort):
    """Two-group logrank chi-square statistic and its df=1 p-value."""
    if group_a.size == 0 or group_b.size == 0:
        raise ContractError("both groups must be nonempty")
    pooled_times = np.concatenate([group_a.times, group_b.times])
    pooled_cens = np.concatenate([group_a.censorships, group_b.censorships])
    event_times = np.unique(pooled_times[pooled_cens == 0])
    if event_times.size == 0:
        raise MetricError("logrank undefined: no events in either group")

    observed_a = 0.0
    expected_a = 0.0
    variance = 0.0
    for t in event_times:
        n1 = float(np.sum(group_a.times >= t))
        n2 = float(np.sum(group_b.times >= t))
        d1 = float(np.sum((group_a.times == t) & (group_a.censorships == 0)))
        d2 = float(np.sum((group_b.times == t) & (group_b.censorships == 0)))
        n = n1 + n2
        d = d1 + d2
        observed_a += d1
        expected_a += d * n1 / n
        if n > 1:
            variance += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1)
    if variance == 0.0:
        if observed_a == expected_a:
            return 0.0, 1.0
        raise MetricError("logrank undefined: zero variance with unequal counts")
    stat = (observed_a - expected_a) ** 2 / variance
    return stat, chi2_sf(stat)


def median_split(cohort: RiskedCohort):
    """Indices strictly above the median risk vs the rest."""
    if cohort.size < 2:
        raise ContractError("median split needs at least 2 patients")
    median = float(np.median(cohort.risks))
    high = np.where(cohort.risks > median)[0]
    low = np.where(cohort.risks <= median)[0]
    return high, low


def subset(cohort: RiskedCohort, indices) -> RiskedCohort:
    ids = None
    if cohort.case_ids is not None:
        ids = [cohort.case_ids[i] for i in indices]
    return RiskedCohort(
        cohort.risks[indices], cohort.times[indices],
        cohort.censorships[indices], ids,
    )
