"""Independent reference implementations used only to check the kernels.

Deliberately written with different algorithms than the package: full-matrix
edit distance instead of two rows, comparison-counting ranks instead of
sorting, textbook correlation sums instead of fsum-based moments.
"""

from __future__ import annotations

import math


def edit_distance_matrix(a: str, b: str) -> int:
    """Full (len(a)+1) x (len(b)+1) dynamic-programming table."""
    rows, cols = len(a) + 1, len(b) + 1
    table = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        table[i][0] = i
    for j in range(cols):
        table[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(table[i - 1][j] + 1,
                              table[i][j - 1] + 1,
                              table[i - 1][j - 1] + cost)
    return table[-1][-1]


def pearson_naive(xs, ys) -> float:
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    num = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    den_x = sum((x - mean_x) ** 2 for x in xs)
    den_y = sum((y - mean_y) ** 2 for y in ys)
    return num / math.sqrt(den_x * den_y)


def ranks_by_counting(values) -> list[float]:
    """Average rank of each value via pairwise comparison counting."""
    out = []
    for v in values:
        smaller = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        out.append(smaller + (equal + 1) / 2)
    return out


def spearman_naive(xs, ys) -> float:
    return pearson_naive(ranks_by_counting(xs), ranks_by_counting(ys))


def rescale_naive(x: float, from_max: float, lo: float, hi: float) -> float:
    """Affine map of x from (0, from_max) onto (lo, hi)."""
    return lo + (x / from_max) * (hi - lo)
