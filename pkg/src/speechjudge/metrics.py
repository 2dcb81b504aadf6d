"""Numerical kernels: character error rate, score reversal, LCC, SRCC, histograms.

All functions are pure and reentrant. Correlations on degenerate input raise
DegenerateSeries instead of returning 0, so a constant label column can never
silently fabricate agreement.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from speechjudge.errors import BadEdges, DegenerateSeries, EmptyReference


@dataclass(frozen=True)
class PairedSeries:
    """Aligned (prediction, ground-truth) vectors for one metric pair.

    ``dropped_count`` records how many manifest pairs were excluded because
    either side was absent; ``len(values) + dropped_count`` equals the
    manifest pair count.
    """

    name_x: str
    name_y: str
    values: tuple[tuple[float, float], ...]
    dropped_count: int = 0

    def xs(self) -> list[float]:
        return [v[0] for v in self.values]

    def ys(self) -> list[float]:
        return [v[1] for v in self.values]


@dataclass(frozen=True)
class Histogram:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    total: int = field(default=0)


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance over Unicode scalar characters, unit costs.

    Two-row dynamic program; O(len(a) * len(b)) time, O(min) space.
    """
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1,        # deletion
                               current[j - 1] + 1,     # insertion
                               previous[j - 1] + cost))  # substitution / match
        previous = current
    return previous[-1]


def cer(reference: str, hypothesis: str) -> float:
    """Character error rate, clamped to [0, 1].

    Both strings are expected already normalized (see asr.normalize_text).
    Insertions can push the raw ratio above 1; the clamp keeps the declared
    0-1 range.
    """
    if not reference:
        raise EmptyReference("reference is empty after normalization")
    raw = edit_distance(reference, hypothesis) / len(reference)
    return min(1.0, raw)


def reverse_cer(c: float) -> float:
    """1 - clamp(c, 0, 1): reversed CER so that higher is better."""
    return 1.0 - min(1.0, max(0.0, c))


def _moments(xs: list[float]) -> tuple[float, float]:
    """(mean, sum of squared deviations)."""
    n = len(xs)
    mean = math.fsum(xs) / n
    ss = math.fsum((x - mean) ** 2 for x in xs)
    return mean, ss


def pearson(s: PairedSeries) -> float:
    """Sample Pearson correlation, in [-1, 1].

    Raises DegenerateSeries for fewer than two pairs or zero variance on
    either coordinate.
    """
    n = len(s.values)
    if n < 2:
        raise DegenerateSeries(f"need at least 2 pairs, got {n}")
    xs, ys = s.xs(), s.ys()
    mx, ssx = _moments(xs)
    my, ssy = _moments(ys)
    if ssx == 0.0 or ssy == 0.0:
        side = s.name_x if ssx == 0.0 else s.name_y
        raise DegenerateSeries(f"zero variance in '{side}'")
    cov = math.fsum((x - mx) * (y - my) for x, y in s.values)
    r = cov / math.sqrt(ssx * ssy)
    # floating rounding can leave |r| a hair above 1
    return max(-1.0, min(1.0, r))


def average_ranks(values: list[float]) -> list[float]:
    """1-based ranks; ties receive the mean of the ranks they span."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1  # ranks i+1 .. j+1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(s: PairedSeries) -> float:
    """Spearman rank correlation: Pearson on average ranks.

    Ties get average ranks. Raises DegenerateSeries when all x or all y
    are equal (rank variance is zero).
    """
    n = len(s.values)
    if n < 2:
        raise DegenerateSeries(f"need at least 2 pairs, got {n}")
    rx = average_ranks(s.xs())
    ry = average_ranks(s.ys())
    ranked = PairedSeries(s.name_x, s.name_y, tuple(zip(rx, ry)),
                          dropped_count=s.dropped_count)
    return pearson(ranked)


def histogram(values: list[float], edges: list[float]) -> Histogram:
    """Counts per half-open bin [e_i, e_{i+1}); the last bin is closed.

    Values below the first edge join bin 0; values above the last edge join
    the final bin, so counts always sum to len(values).
    """
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise BadEdges(f"edges must be strictly increasing with >= 2 entries: {edges}")
    n_bins = len(edges) - 1
    counts = [0] * n_bins
    for v in values:
        idx = bisect_right(edges, v) - 1
        counts[min(max(idx, 0), n_bins - 1)] += 1
    return Histogram(tuple(edges), tuple(counts), total=len(values))


def equal_width_edges(lo: float, hi: float, bins: int = 20) -> list[float]:
    if not (hi > lo) or bins < 1:
        raise BadEdges(f"bad range ({lo}, {hi}) or bin count {bins}")
    return [lo + (hi - lo) * i / bins for i in range(bins + 1)]
