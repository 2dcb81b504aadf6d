"""Pearson and Spearman kernels: frozen fixtures, oracles, invariances."""

from __future__ import annotations

import math
import random

import pytest

from speechjudge.errors import DegenerateSeries
from speechjudge.metrics import PairedSeries, average_ranks, pearson, spearman

from _oracles import pearson_naive, spearman_naive


def series(xs, ys):
    return PairedSeries("x", "y", tuple(zip(xs, ys)))


def test_pearson_perfect_positive():
    assert pearson(series([1, 2, 3], [2, 4, 6])) == pytest.approx(1.0)


def test_pearson_perfect_negative():
    assert pearson(series([1, 2, 3], [3, 2, 1])) == pytest.approx(-1.0)


def test_pearson_hand_derived():
    # cov = 4, var_x = var_y = 5, so r = 4/5
    assert pearson(series([1, 2, 3, 4], [1, 3, 2, 4])) == pytest.approx(0.8, abs=1e-12)


def test_pearson_degenerate():
    with pytest.raises(DegenerateSeries):
        pearson(series([1], [2]))
    with pytest.raises(DegenerateSeries):
        pearson(series([1, 1, 1], [1, 2, 3]))
    with pytest.raises(DegenerateSeries):
        pearson(series([1, 2, 3], [4, 4, 4]))


def test_spearman_monotone_is_one():
    xs = [0.5, 1.2, 3.3, 8.0]
    assert spearman(series(xs, [math.exp(x) for x in xs])) == pytest.approx(1.0)


def test_spearman_with_ties_hand_derived():
    got = spearman(series([1, 2, 2, 3], [1, 2, 3, 4]))
    assert got == pytest.approx(0.9486832980505138, abs=1e-12)


def test_spearman_reversal_is_minus_one():
    assert spearman(series([1, 2, 3, 4], [9, 7, 5, 1])) == pytest.approx(-1.0)


def test_spearman_degenerate_on_constant_side():
    with pytest.raises(DegenerateSeries):
        spearman(series([2, 2, 2], [1, 2, 3]))


def test_average_ranks_with_ties():
    assert average_ranks([10.0, 20.0, 20.0, 30.0]) == [1.0, 2.5, 2.5, 4.0]
    assert average_ranks([5.0, 5.0, 5.0]) == [2.0, 2.0, 2.0]


def test_matches_naive_oracles_on_random_series():
    rng = random.Random(20240817)
    for _ in range(300):
        n = rng.randint(2, 60)
        xs = [rng.uniform(-10, 10) for _ in range(n)]
        ys = [rng.uniform(-10, 10) for _ in range(n)]
        if n == 2 and (xs[0] == xs[1] or ys[0] == ys[1]):
            continue
        s = series(xs, ys)
        assert pearson(s) == pytest.approx(pearson_naive(xs, ys), abs=1e-9)
        assert spearman(s) == pytest.approx(spearman_naive(xs, ys), abs=1e-9)


def test_spearman_ties_match_oracle_exhaustive_small():
    # all series of length <= 4 over {1, 2, 3} on both coordinates
    import itertools
    for n in (2, 3, 4):
        for xs in itertools.product((1, 2, 3), repeat=n):
            if len(set(xs)) == 1:
                continue
            for ys in itertools.product((1, 2, 3), repeat=n):
                if len(set(ys)) == 1:
                    continue
                s = series(xs, ys)
                assert spearman(s) == pytest.approx(
                    spearman_naive(list(xs), list(ys)), abs=1e-12)


def test_pearson_affine_invariance():
    rng = random.Random(7)
    for _ in range(50):
        n = rng.randint(3, 40)
        xs = [rng.gauss(0, 3) for _ in range(n)]
        ys = [rng.gauss(0, 3) for _ in range(n)]
        a, b = rng.uniform(0.1, 5), rng.uniform(-9, 9)
        c, d = rng.uniform(0.1, 5), rng.uniform(-9, 9)
        base = pearson(series(xs, ys))
        scaled = pearson(series([a * x + b for x in xs],
                                [c * y + d for y in ys]))
        assert scaled == pytest.approx(base, abs=1e-9)


def test_spearman_monotone_transform_invariance_exact():
    rng = random.Random(11)
    for _ in range(50):
        n = rng.randint(3, 40)
        xs = [rng.gauss(0, 2) for _ in range(n)]
        ys = [rng.gauss(0, 2) for _ in range(n)]
        base = spearman(series(xs, ys))
        assert spearman(series([x ** 3 for x in xs], ys)) == base
        assert spearman(series(xs, [math.exp(y) for y in ys])) == base


def test_correlations_bounded_by_one():
    rng = random.Random(99)
    for _ in range(1000):
        n = rng.randint(2, 30)
        xs = [rng.uniform(0, 1) for _ in range(n)]
        ys = [rng.uniform(0, 1) for _ in range(n)]
        s = series(xs, ys)
        try:
            assert abs(pearson(s)) <= 1.0 + 1e-12
            assert abs(spearman(s)) <= 1.0 + 1e-12
        except DegenerateSeries:
            pass


def test_matches_scipy_cross_check():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = random.Random(4242)
    for _ in range(40):
        n = rng.randint(3, 80)
        xs = [rng.uniform(-5, 5) for _ in range(n)]
        ys = [round(rng.uniform(-2, 2), 1) for _ in range(n)]  # forces ties
        s = series(xs, ys)
        assert pearson(s) == pytest.approx(
            float(scipy_stats.pearsonr(xs, ys)[0]), abs=1e-9)
        assert spearman(s) == pytest.approx(
            float(scipy_stats.spearmanr(xs, ys)[0]), abs=1e-9)
