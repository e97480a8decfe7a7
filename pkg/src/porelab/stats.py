"""Statistical primitives for the warm-start study.

Quantiles use the linear-interpolation (type-7) convention. The bootstrap
confidence interval for the median is the percentile bootstrap. The paired
Wilcoxon signed-rank test drops zero differences, averages tied ranks, uses
the exact conditional null distribution up to n = 25 and a normal
approximation with continuity and tie corrections beyond.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import ParameterError

EXACT_LIMIT = 25


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float
    degenerate: bool = False


def quantile(values, p: float) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ParameterError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ParameterError("quantile level must lie in [0, 1]")
    return float(np.quantile(values, p))


def bootstrap_ci_median(values, n_resamples: int = 2000, level: float = 0.95,
                        seed: int = 0) -> tuple[float, float]:
    """Percentile-bootstrap confidence interval for the median."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 5:
        raise ParameterError("bootstrap needs at least 5 observations")
    if n_resamples < 1000:
        raise ParameterError("use at least 1000 bootstrap resamples")
    if not 0.0 < level < 1.0:
        raise ParameterError("confidence level must lie in (0, 1)")
    if np.all(values == values[0]):
        c = float(values[0])
        return c, c
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_resamples, n))
    medians = np.median(values[idx], axis=1)
    tail = (1.0 - level) / 2.0
    return quantile(medians, tail), quantile(medians, 1.0 - tail)


def _average_ranks(magnitudes: np.ndarray) -> np.ndarray:
    """Ranks 1..n of the magnitudes with ties replaced by their average."""
    order = np.argsort(magnitudes, kind="stable")
    ranks = np.empty(magnitudes.size, dtype=np.float64)
    sorted_mags = magnitudes[order]
    i = 0
    while i < magnitudes.size:
        j = i
        while j + 1 < magnitudes.size and sorted_mags[j + 1] == sorted_mags[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_two_sided_p(doubled_ranks: np.ndarray, doubled_w_plus: int) -> float:
    """Exact p over all 2^n sign assignments, conditional on the tie pattern.

    Works on ranks doubled to integers so tied (half-integer) ranks stay
    exact; dynamic programming over achievable positive-rank sums.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        r = int(r)
        counts[r:] += counts[: counts.size - r].copy()
    n_assignments = counts.sum()
    count_le = counts[: doubled_w_plus + 1].sum()
    count_ge = counts[doubled_w_plus:].sum()
    return min(1.0, 2.0 * min(count_le, count_ge) / n_assignments)


def wilcoxon_signed_rank(x, y) -> WilcoxonResult:
    """Two-sided paired signed-rank test; returns (W, p, degenerate)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("paired samples must be 1-D and equally long")
    diffs = x - y
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, degenerate=True)
    if n < 5:
        raise ParameterError("need at least 5 nonzero differences")

    magnitudes = np.abs(diffs)
    ranks = _average_ranks(magnitudes)
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks.sum()) - w_plus
    statistic = min(w_plus, w_minus)

    if n <= EXACT_LIMIT:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        p = _exact_two_sided_p(doubled, int(round(2.0 * w_plus)))
        return WilcoxonResult(statistic=statistic, p_value=p)

    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(magnitudes, return_counts=True)
    variance -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    centered = w_plus - mean
    if centered == 0.0:
        return WilcoxonResult(statistic=statistic, p_value=1.0)
    correction = 0.5 * math.copysign(1.0, centered)
    z = (centered - correction) / math.sqrt(variance)
    p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    return WilcoxonResult(statistic=statistic, p_value=p)
