"""Nonparametric model comparison: Friedman mean ranks and exact Wilcoxon signed-rank."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

EXACT_MAX_N = 25


@dataclass(frozen=True)
class FriedmanResult:
    models: list[str]
    mean_ranks: np.ndarray
    statistic: float
    p_value: float

    def as_dict(self) -> dict:
        return {"mean_ranks": dict(zip(self.models, map(float, self.mean_ranks))),
                "chi_square": self.statistic, "p_value": self.p_value}


@dataclass(frozen=True)
class WilcoxonResult:
    r_plus: float
    r_minus: float
    p_value: float
    n: int

    def __iter__(self):
        return iter((self.r_plus, self.r_minus, self.p_value))


def friedman_mean_ranks(cells, models=None) -> FriedmanResult:
    """Rank models within each row (1 = lowest error, ties averaged) and average.

    ``cells`` is a (cases x models) array-like, or any object with ``mean`` and
    ``models`` attributes such as :class:`~ngcn.evaluation.ComparisonTable`.
    The chi-square statistic is the classic uncorrected Friedman form.
    """
    if hasattr(cells, "mean") and hasattr(cells, "models"):
        models = list(cells.models)
        cells = cells.mean
    x = np.asarray(cells, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 2:
        raise ValueError("need a cases x models table with at least two models")
    if not np.all(np.isfinite(x)):
        raise ValueError("incomplete table: every cell must hold a finite value")
    n, k = x.shape
    ranks = stats.rankdata(x, axis=1)
    mean_ranks = ranks.mean(axis=0)
    chi2 = 12.0 * n / (k * (k + 1)) * (np.sum(mean_ranks ** 2) - k * (k + 1) ** 2 / 4.0)
    p = float(stats.chi2.sf(chi2, k - 1))
    if models is None:
        models = [f"M{i + 1}" for i in range(k)]
    return FriedmanResult(list(models), mean_ranks, float(chi2), p)


def _exact_upper_tail(doubled_ranks: np.ndarray, observed: int) -> float:
    """P(T >= observed) where T sums a random subset of ``doubled_ranks``.

    Ranks are doubled so that average (half-integer) ranks stay integral; the
    counting recursion is equivalent to enumerating all 2^n sign vectors.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks.astype(int):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return float(counts[observed:].sum() / 2.0 ** len(doubled_ranks))


def wilcoxon_signed_rank(diffs) -> WilcoxonResult:
    """Signed-rank statistics for paired differences.

    Positive differences count toward ``r_plus``. The one-sided p-value is
    ``P(T >= r_plus)`` under the symmetric null; exact for up to 25 nonzero
    differences, normal approximation with continuity correction beyond.
    """
    d = np.asarray(diffs, dtype=float).ravel()
    d = d[d != 0]
    if d.size == 0:
        raise ValueError("all differences are zero")
    ranks = stats.rankdata(np.abs(d))
    r_plus = float(ranks[d > 0].sum())
    r_minus = float(ranks[d < 0].sum())
    n = d.size
    if n <= EXACT_MAX_N:
        p = _exact_upper_tail(2 * ranks, int(round(2 * r_plus)))
    else:
        mu = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
        p = float(stats.norm.sf((r_plus - mu - 0.5) / np.sqrt(var)))
    return WilcoxonResult(r_plus, r_minus, p, n)
