"""Histogram binning convention and seeded-sampling sanity bound."""

from __future__ import annotations

import random

import pytest

from speechjudge.errors import BadEdges
from speechjudge.metrics import equal_width_edges, histogram


def test_boundary_convention():
    h = histogram([0, 0.5, 1], [0, 0.5, 1])
    assert h.counts == (1, 2)  # 0.5 opens bin 1; last bin is closed
    assert h.total == 3


def test_empty_values():
    h = histogram([], [0, 1, 2])
    assert h.counts == (0, 0)
    assert h.total == 0


def test_out_of_range_values_absorbed_at_ends():
    h = histogram([-5.0, 0.1, 3.7, 99.0], [0, 1, 2])
    assert h.counts == (2, 2)
    assert sum(h.counts) == h.total == 4


def test_bad_edges_rejected():
    with pytest.raises(BadEdges):
        histogram([1.0], [0.0])
    with pytest.raises(BadEdges):
        histogram([1.0], [0.0, 0.0, 1.0])
    with pytest.raises(BadEdges):
        histogram([1.0], [1.0, 0.5])


def test_uniform_seeded_counts_within_binomial_bound():
    rng = random.Random(123)
    values = [rng.uniform(0, 1) for _ in range(1000)]
    h = histogram(values, equal_width_edges(0.0, 1.0, 4))
    assert sum(h.counts) == 1000
    for count in h.counts:
        assert abs(count - 250) <= 60  # 3 sigma of Binomial(1000, 1/4) is ~41


def test_equal_width_edges():
    edges = equal_width_edges(0.0, 5.0, 20)
    assert len(edges) == 21
    assert edges[0] == 0.0 and edges[-1] == 5.0
    steps = {round(b - a, 12) for a, b in zip(edges, edges[1:])}
    assert steps == {0.25}
    with pytest.raises(BadEdges):
        equal_width_edges(1.0, 1.0, 4)
