"""Round-level statistics and their aggregation.

All entropies in the package go through entropy_from_counts so that numpy's
length-dependent pairwise summation can never make two code paths disagree:
callers always supply counts over the full variant space (zeros included),
which fixes the summation tree. Convergence is detected by exact comparison
with 0.0, which is safe because a unanimous round's entropy is computed as
-(1.0 * log2(1.0)) == 0.0 with no rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyRoundError,
    InsufficientDataError,
    InvalidParamsError,
    LengthMismatchError,
    SeriesTooShortError,
)


def entropy_from_counts(counts: np.ndarray) -> np.ndarray:
    """Shannon entropy (bits) along the last axis of a counts array.

    Zero counts contribute exactly 0.0; the result is normalized so a
    unanimous distribution yields +0.0, never -0.0.
    """
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=-1, keepdims=True)
    probs = counts / totals
    safe = np.where(counts > 0, probs, 1.0)
    terms = np.where(counts > 0, probs * np.log2(safe), 0.0)
    return -terms.sum(axis=-1) + 0.0


def entropy(productions: Sequence[int], n_variants: int) -> float:
    """Entropy of one round's productions over a variant space of n_variants."""
    if len(productions) == 0:
        raise EmptyRoundError("cannot take the entropy of an empty round")
    if n_variants < 1:
        raise InvalidParamsError(f"n_variants must be positive, got {n_variants}")
    arr = np.asarray(productions, dtype=np.int64)
    if arr.min() < 0 or arr.max() >= n_variants:
        raise InvalidParamsError("production outside the variant space")
    counts = np.bincount(arr, minlength=n_variants)
    return float(entropy_from_counts(counts))


def entropy_normalized(productions: Sequence[int], n_variants: int) -> float:
    """Entropy as a fraction of its maximum log2(n_variants)."""
    if n_variants < 2:
        raise InvalidParamsError("normalized entropy needs at least 2 variants")
    return entropy(productions, n_variants) / math.log2(n_variants)


def adaptiveness(productions: Sequence[int], high_quality: Iterable[int]) -> float:
    """Share of one round's productions that are high-quality variants."""
    if len(productions) == 0:
        raise EmptyRoundError("cannot take the adaptiveness of an empty round")
    high = frozenset(high_quality)
    return sum(1 for p in productions if p in high) / len(productions)


def delta_adaptiveness(series: Sequence[float]) -> list[float]:
    """First differences of an adaptiveness series (one element shorter)."""
    if len(series) < 2:
        raise SeriesTooShortError("need at least two rounds to difference")
    return [float(series[t] - series[t - 1]) for t in range(1, len(series))]


def time_to_convergence(entropy_series: Sequence[float]) -> int | None:
    """First 1-based round whose entropy is exactly zero, or None if censored."""
    for t, h in enumerate(entropy_series, start=1):
        if h == 0.0:
            return t
    return None


@dataclass(frozen=True)
class AggregateStats:
    """Mean, sample SD, normal-approximation 95% half-width, and count."""

    mean: float
    sd: float
    ci95: float
    n: int


def aggregate(values: Sequence[float]) -> AggregateStats:
    """Mean / sample SD (n-1 denominator) / 1.96*sd/sqrt(n) over >= 2 values."""
    n = len(values)
    if n < 2:
        raise InsufficientDataError(f"need at least 2 values, got {n}")
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    return AggregateStats(mean, sd, 1.96 * sd / math.sqrt(n), n)


def pooled(stats: Sequence[AggregateStats]) -> AggregateStats:
    """Exactly merge per-group stats into the stats of the concatenated data.

    Uses the total-sum-of-squares identity, so pooling summaries equals
    aggregating the raw values (up to float round-off).
    """
    if not stats:
        raise InsufficientDataError("nothing to pool")
    total_n = sum(s.n for s in stats)
    if total_n < 2:
        raise InsufficientDataError("pooled sample needs at least 2 values")
    mean = sum(s.n * s.mean for s in stats) / total_n
    ss = sum((s.n - 1) * s.sd**2 + s.n * (s.mean - mean) ** 2 for s in stats)
    sd = math.sqrt(max(ss, 0.0) / (total_n - 1))
    return AggregateStats(mean, sd, 1.96 * sd / math.sqrt(total_n), total_n)


def detect_bursts(series: Sequence[float], prominence: float = 0.01) -> list[int]:
    """1-based positions of local maxima exceeding both neighbours by >= prominence.

    Endpoints are compared one-sided (only against their single neighbour).
    """
    if len(series) < 3:
        raise SeriesTooShortError("burst detection needs at least three points")
    if prominence < 0:
        raise InvalidParamsError(f"prominence must be nonnegative, got {prominence}")
    out = []
    last = len(series) - 1
    for i, v in enumerate(series):
        left_ok = i == 0 or v - series[i - 1] >= prominence
        right_ok = i == last or v - series[i + 1] >= prominence
        if left_ok and right_ok:
            out.append(i + 1)
    return out


def condition_gap(
    series_a: Sequence[float], series_b: Sequence[float], n_agents: int
) -> np.ndarray:
    """Per-round difference of two entropy series on the normalized scale."""
    if len(series_a) != len(series_b):
        raise LengthMismatchError(
            f"series lengths differ: {len(series_a)} vs {len(series_b)}"
        )
    if n_agents < 2:
        raise InvalidParamsError("need at least 2 agents for a normalized gap")
    a = np.asarray(series_a, dtype=np.float64)
    b = np.asarray(series_b, dtype=np.float64)
    return (a - b) / math.log2(n_agents)
