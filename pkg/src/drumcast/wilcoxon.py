"""Wilcoxon signed-rank test for paired samples."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from .exceptions import ConfigError, LengthMismatch, TooFewPairs

__all__ = ["WilcoxonResult", "wilcoxon_signed_rank", "signed_rank_null_counts", "EXACT_MAX_N"]

EXACT_MAX_N = 20
MIN_PAIRS = 5
ALTERNATIVES = ("a_less", "a_greater", "two_sided")


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float
    n: int
    method: str

    @property
    def all_zero(self) -> bool:
        return self.method == "all-zero"


def signed_rank_null_counts(doubled_ranks) -> np.ndarray:
    """Number of sign assignments giving each value of ``2 * W+``.

    ``doubled_ranks`` are twice the (possibly tied, averaged) ranks, so they
    are integers. Entry ``k`` of the result counts the assignments among all
    ``2**n`` whose positive-rank sum equals ``k / 2``.
    """
    r = np.asarray(doubled_ranks, dtype=np.int64)
    counts = np.zeros(int(r.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    top = 0
    for rank in r.tolist():
        counts[rank : top + rank + 1] += counts[: top + 1].copy()
        top += rank
    return counts


def wilcoxon_signed_rank(pairs_a, pairs_b, alternative: str = "a_less") -> WilcoxonResult:
    """Paired signed-rank test on ``d = a - b``.

    ``alternative`` is ``"a_less"`` (a tends to be smaller), ``"a_greater"``
    or ``"two_sided"``. Zero differences are dropped. With at most 20
    non-zero differences the p-value is exact (ties get average ranks and
    the null distribution is counted over every sign assignment); above that
    a normal approximation with tie and continuity corrections is used.

    The reported statistic is ``W+``, the rank sum of positive differences,
    except for ``two_sided`` where it is ``min(W+, W-)``. When every
    difference is zero the result is ``statistic=0, p_value=1`` with
    ``method="all-zero"``.
    """
    if alternative not in ALTERNATIVES:
        raise ConfigError(f"alternative must be one of {ALTERNATIVES}")
    a = np.asarray(pairs_a, dtype=np.float64).ravel()
    b = np.asarray(pairs_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"paired samples differ in length: {a.size} vs {b.size}")
    if a.size < MIN_PAIRS:
        raise TooFewPairs(f"need at least {MIN_PAIRS} pairs, got {a.size}")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "all-zero")

    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    total = n * (n + 1) / 2.0
    w_minus = total - w_plus
    stat = min(w_plus, w_minus) if alternative == "two_sided" else w_plus

    if n <= EXACT_MAX_N:
        p = _exact_p(ranks, w_plus, alternative)
        method = "exact"
    else:
        p = _normal_p(ranks, w_plus, n, alternative)
        method = "normal"
    return WilcoxonResult(stat, float(min(1.0, max(0.0, p))), n, method)


def _exact_p(ranks, w_plus, alternative):
    doubled = np.rint(2 * ranks).astype(np.int64)
    counts = signed_rank_null_counts(doubled)
    k = int(round(2 * w_plus))
    n_total = float(counts.sum())
    lower = counts[: k + 1].sum() / n_total
    upper = counts[k:].sum() / n_total
    if alternative == "a_less":
        return lower
    if alternative == "a_greater":
        return upper
    return 2.0 * min(lower, upper)


def _normal_p(ranks, w_plus, n, alternative):
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_sizes**3 - tie_sizes) / 48.0
    sd = np.sqrt(var)
    if alternative == "a_less":
        return float(ndtr((w_plus - mean + 0.5) / sd))
    if alternative == "a_greater":
        return float(ndtr(-(w_plus - mean - 0.5) / sd))
    z = max(abs(w_plus - mean) - 0.5, 0.0) / sd
    return float(2.0 * ndtr(-z))
