"""Character error rate and edit distance against an independent oracle."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import given, strategies as st

from speechjudge.errors import EmptyReference
from speechjudge.metrics import cer, edit_distance, reverse_cer

from _oracles import edit_distance_matrix


def test_cer_identity():
    assert cer("你好世界", "你好世界") == 0.0


def test_cer_full_deletion():
    assert cer("abc", "") == 1.0


def test_cer_single_substitution():
    # oracle: distance("abc", "axc") == 1, so CER = 1/3
    assert edit_distance_matrix("abc", "axc") == 1
    assert cer("abc", "axc") == pytest.approx(1 / 3, abs=1e-12)


def test_cer_clamped_at_one():
    # oracle gives distance 2 for two pure insertions; raw 2/2 clamps to 1
    assert edit_distance_matrix("ab", "abcd") == 2
    assert cer("ab", "abcd") == 1.0


def test_cer_empty_reference_is_error():
    with pytest.raises(EmptyReference):
        cer("", "abc")


def test_distance_symmetric_but_cer_is_not():
    r, h = "abc", "abcdef"
    assert edit_distance(r, h) == edit_distance(h, r)
    assert cer(r, h) == 1.0          # 3 insertions / 3 chars, clamped
    assert cer(h, r) == pytest.approx(0.5)  # 3 deletions / 6 chars


@given(st.text(alphabet="abc", max_size=8), st.text(alphabet="abc", max_size=8))
def test_distance_matches_oracle_random(a, b):
    assert edit_distance(a, b) == edit_distance_matrix(a, b)


def test_distance_matches_oracle_exhaustive_small():
    strings = [""]
    for length in range(1, 4):
        strings += ["".join(p) for p in itertools.product("abc", repeat=length)]
    for a in strings:
        for b in strings:
            assert edit_distance(a, b) == edit_distance_matrix(a, b)


def test_reverse_cer_endpoints_and_clamp():
    assert reverse_cer(0.0) == 1.0
    assert reverse_cer(0.2) == pytest.approx(0.8)
    assert reverse_cer(1.7) == 0.0
    assert reverse_cer(-0.4) == 1.0


@given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
def test_reverse_cer_involution_on_unit_interval(c):
    assert reverse_cer(reverse_cer(c)) == pytest.approx(c, abs=1e-15)
