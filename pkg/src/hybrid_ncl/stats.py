"""Friedman test and Nemenyi critical differences over method x dataset error tables."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

# Critical values q_alpha of the two-tailed Nemenyi test (studentized range
# statistic divided by sqrt(2), infinite degrees of freedom). K = 2..10 are
# the commonly published values (Demsar, JMLR 2006); K = 11..20 are
# scipy.stats.studentized_range.ppf(1 - alpha, K, inf) / sqrt(2) rounded to 3 dp.
NEMENYI_Q = {
    0.05: (1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
           3.219, 3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544),
    0.10: (1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920,
           2.978, 3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319),
}


@dataclass(frozen=True)
class RankTable:
    errors: np.ndarray  # D x K
    ranks: np.ndarray  # 1 = best, ties averaged
    mean_ranks: np.ndarray
    methods: tuple[str, ...] = ()
    datasets: tuple[str, ...] = ()

    @property
    def D(self) -> int:
        return self.errors.shape[0]

    @property
    def K(self) -> int:
        return self.errors.shape[1]


def rank_table(errors, methods=None, datasets=None) -> RankTable:
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2:
        raise ValueError("errors must be a D x K matrix")
    ranks = np.vstack([rankdata(row, method="average") for row in errors])
    methods = tuple(methods) if methods is not None else tuple(f"M{k}" for k in range(errors.shape[1]))
    datasets = tuple(datasets) if datasets is not None else tuple(f"D{d}" for d in range(errors.shape[0]))
    return RankTable(errors, ranks, ranks.mean(axis=0), methods, datasets)


def _gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) (series below a+1, Lentz continued fraction above)."""
    if x <= 0:
        return 1.0
    log_prefix = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1:
        term = total = 1.0 / a
        ap = a
        for _ in range(1000):
            ap += 1
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return max(0.0, 1.0 - total * math.exp(log_prefix))
    tiny = 1e-300
    b = x + 1 - a
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-16:
            break
    return math.exp(log_prefix) * h


def chi2_sf(x: float, dof: int) -> float:
    return _gammainc_upper(dof / 2.0, x / 2.0)


def friedman_statistic(table: RankTable) -> tuple[float, float]:
    """Friedman chi-square from mean ranks and its chi-square(K-1) p-value."""
    D, K = table.D, table.K
    if D < 2 or K < 2:
        raise ValueError("need at least two datasets and two methods")
    R = table.mean_ranks
    chi2 = 12.0 * D / (K * (K + 1)) * (float(R @ R) - K * (K + 1) ** 2 / 4.0)
    chi2 = max(chi2, 0.0)  # rounding can leave -1e-15 on fully tied tables
    return chi2, chi2_sf(chi2, K - 1)


def nemenyi_cd(K: int, D: int, alpha: float = 0.05) -> float:
    if alpha not in NEMENYI_Q:
        raise ValueError(f"alpha must be one of {sorted(NEMENYI_Q)}")
    if not 2 <= K <= 20:
        raise ValueError("K must be between 2 and 20")
    if D < 1:
        raise ValueError("D must be positive")
    q = NEMENYI_Q[alpha][K - 2]
    return q * math.sqrt(K * (K + 1) / (6.0 * D))


def significance_pairs(table: RankTable, cd: float) -> set[tuple[str, str]]:
    R = table.mean_ranks
    return {(table.methods[a], table.methods[b])
            for a, b in itertools.combinations(range(table.K), 2)
            if abs(R[a] - R[b]) > cd}


def write_cd_csv(table: RankTable, cd: float, path) -> None:
    """CD-diagram data: each method's mean rank with a +/- cd/2 interval.

    Two intervals fail to overlap exactly when the rank gap exceeds ``cd``.
    """
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "mean_rank", "interval_low", "interval_high"])
        for name, r in zip(table.methods, table.mean_ranks):
            w.writerow([name, repr(float(r)), repr(float(r - cd / 2)), repr(float(r + cd / 2))])
