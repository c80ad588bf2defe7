import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from quadtherm.symbolic import (
    PhasedSpec,
    SignWord,
    block_count,
    block_count_by_enumeration,
    count_zeros,
    count_zeros_by_enumeration,
    kneading_compare,
    kneading_word,
    phased_itinerary,
)

SPECS = [PhasedSpec(1, 1), PhasedSpec(2, 2), PhasedSpec(3, 2), PhasedSpec(4, 2)]


def test_phased_spec_precondition():
    with pytest.raises(ValueError):
        PhasedSpec(5, 2)


def test_phased_examples():
    assert phased_itinerary(PhasedSpec(2, 2), 11) == "11110011100"
    word = phased_itinerary(PhasedSpec(1, 1), 5)
    assert [k for k, ch in enumerate(word) if ch == "0"] == [1, 4]
    assert phased_itinerary(PhasedSpec(3, 2), 1) == "1"


@given(
    st.sampled_from(SPECS),
    st.integers(min_value=1, max_value=400),
)
@settings(max_examples=60, deadline=None)
def test_phased_prefix_stability(spec, K):
    assert phased_itinerary(spec, K) == phased_itinerary(spec, K + 1)[:K]


def test_count_zeros_and_blocks_examples():
    spec = PhasedSpec(2, 2)
    assert count_zeros(spec, 4) == 0 and block_count(spec, 4) == 1
    assert count_zeros(spec, 6) == 2 and block_count(spec, 6) == 2


@given(st.sampled_from(SPECS), st.integers(min_value=1, max_value=3000))
@settings(max_examples=80, deadline=None)
def test_closed_forms_match_enumeration(spec, k):
    assert count_zeros(spec, k) == count_zeros_by_enumeration(spec, k)
    assert block_count(spec, k) == block_count_by_enumeration(spec, k)


def test_block_and_zero_bounds_small_range():
    for spec in SPECS:
        for k in range(spec.l0**2 + 1, 4000):
            nk, bk = count_zeros(spec, k), block_count(spec, k)
            rk = math.sqrt(k)
            assert bk <= 2 * (rk - spec.l0) + 3
            assert spec.N * (rk - spec.l0) <= nk <= spec.N * rk
        for k in range(1, spec.l0**2 + 1):
            assert count_zeros(spec, k) == 0
            assert block_count(spec, k) == 1


def test_kneading_word_examples():
    assert kneading_word(mp.mpf(-2), 4).signs == "-++++"
    w = kneading_word(mp.mpf(-1), 4)
    assert w.critical_index == 1
    assert w.signs[0] == "-" and w.signs[1] == "0"
    assert kneading_word(mp.mpf("-0.5"), 3).signs == "----"


def test_kneading_compare_basics():
    a = SignWord("-++")
    assert kneading_compare(a, a) == 0
    # differ at index 0: empty prefix, direct order
    assert kneading_compare(SignWord("+--"), SignWord("---")) == 1
    # one '-' before index 2: odd parity reverses the direct order
    assert kneading_compare(SignWord("-++"), SignWord("-+-")) == -1


def test_kneading_compare_rejects_flags():
    w = kneading_word(mp.mpf(-1), 3)
    with pytest.raises(ValueError):
        kneading_compare(w, kneading_word(mp.mpf(-1.5), 3))


def test_kneading_compare_total_order_exhaustive():
    """Antisymmetry and transitivity on all flag-free words of length <= 8:
    sorting by the comparator and checking pairwise consistency covers both."""
    import functools
    import itertools

    for length in (3, 8):
        words = [
            SignWord("".join(w)) for w in itertools.product("-+", repeat=length)
        ]
        ordered = sorted(words, key=functools.cmp_to_key(kneading_compare))
        for i, wi in enumerate(ordered):
            for j in range(i + 1, len(ordered)):
                assert kneading_compare(wi, ordered[j]) == -1
                assert kneading_compare(ordered[j], wi) == 1


def test_kneading_order_matches_parameter_order():
    """100 real parameters sorted by c must sort identically by their
    kneading words under the parity-adjusted order."""
    rng = random.Random(20240811)
    cs = sorted(mp.mpf(rng.uniform(-2.0, -0.8)) for _ in range(100))
    words = []
    for c in cs:
        w = kneading_word(c, 12, prec=106)
        if w.critical_index is not None:
            continue
        words.append(w)
    violations = 0
    for a, b in zip(words[:-1], words[1:]):
        cmp = kneading_compare(a, b)
        if cmp == 1:
            violations += 1
    assert violations == 0
