import random

import pytest
from mpmath import mp

from quadtherm.core import iterate
from quadtherm.param_search import (
    SearchExhaustedError,
    find_parameter,
    kn_membership,
    kn_membership_with_prefix,
    refine_eventually_periodic,
)
from quadtherm.symbolic import PhasedSpec, phased_itinerary

from conftest import PHASED_PREFIX_6


def test_membership_refuted_at_chebyshev():
    # the orbit of -2 sits on the fixed point 2, so the first失 violated
    # sign condition is f^{n+1}(c) < 0
    rep = kn_membership(mp.mpf(-2), 6, 1)
    assert rep.verdict == "refuted"
    name, epoch, idx = rep.first_failure
    assert name == "post1_negative" and epoch == 0 and idx == 7


def test_membership_refuted_in_preperiod():
    rep = kn_membership(mp.mpf("-0.9"), 6, 0)
    assert rep.verdict == "refuted"
    name, epoch, idx = rep.first_failure
    assert name == "pre_positive" and idx == 1


def test_membership_of_certified_midpoint(certified_interval):
    ci = certified_interval
    rep = kn_membership_with_prefix(ci.midpoint, 8, ci.itinerary, prec=ci.prec)
    assert rep.verdict == "verified"
    assert rep.margin > 0
    # re-verification at doubled precision never flips a verified verdict
    rep2 = kn_membership_with_prefix(ci.midpoint, 8, ci.itinerary, prec=2 * ci.prec)
    assert rep2.verdict == "verified"


def test_find_parameter_contract(certified_interval):
    ci = certified_interval
    assert ci.width <= mp.mpf("1e-10")
    assert ci.epochs_verified == 6
    assert -2 < ci.midpoint < mp.mpf("-1.9")
    # the itinerary symbols of the midpoint match the prefix
    orb = iterate(ci.midpoint, ci.midpoint, 8 + 3 * 6, prec=250)
    symbols = "".join(
        "1" if orb.points[8 + 3 * k] > 0 else "0" for k in range(6)
    )
    assert symbols == PHASED_PREFIX_6


def test_find_parameter_deterministic(certified_interval):
    again = find_parameter(8, PHASED_PREFIX_6, mp.mpf("1e-10"))
    assert again.lo == certified_interval.lo
    assert again.hi == certified_interval.hi


def test_find_parameter_prefix_nesting():
    tol = mp.mpf("1e-6")
    w = phased_itinerary(PhasedSpec(2, 2), 5)
    ws = phased_itinerary(PhasedSpec(2, 2), 6)
    outer = find_parameter(8, w, tol)
    inner = find_parameter(8, ws, tol)
    assert outer.lo <= inner.lo and inner.hi <= outer.hi


def test_find_parameter_single_symbol_lands_in_trap():
    ci = find_parameter(8, "1", mp.mpf("1e-6"))
    orb = iterate(ci.midpoint, ci.midpoint, 8, prec=200)
    assert orb.points[8] > 0


def test_find_parameter_approaches_chebyshev_with_depth():
    prev = None
    for n in (6, 8, 10, 12):
        ci = find_parameter(n, "1", mp.mpf("1e-6"))
        dist = abs(ci.midpoint + 2)
        if prev is not None:
            assert dist < prev
        prev = dist


def test_find_parameter_soundness_near_midpoints(certified_interval):
    """Random verified points re-checked at doubled precision never flip."""
    ci = certified_interval
    rng = random.Random(11)
    flips = 0
    checked = 0
    for _ in range(200):
        c = ci.lo + (ci.hi - ci.lo) * mp.mpf(rng.random())
        rep = kn_membership_with_prefix(c, 8, ci.itinerary, prec=ci.prec)
        if rep.verdict != "verified":
            continue
        checked += 1
        rep2 = kn_membership_with_prefix(c, 8, ci.itinerary, prec=2 * ci.prec)
        if rep2.verdict == "refuted":
            flips += 1
    assert checked > 0
    assert flips == 0


def test_find_parameter_rejects_bad_prefix():
    with pytest.raises(ValueError):
        find_parameter(8, "120", mp.mpf("1e-6"))
    with pytest.raises(ValueError):
        find_parameter(2, "1", mp.mpf("1e-6"))


def test_find_parameter_exhaustion_reports():
    # an impossible window: no admissible parameter right of -3/4
    with pytest.raises(SearchExhaustedError):
        find_parameter(8, "1", mp.mpf("1e-6"), window=(mp.mpf("-0.7"), mp.mpf("-0.6")))


def test_refine_eventually_periodic_at_chebyshev():
    """g(c) = f^{n+3}(c) - f^n(c) has the root c = -2 (orbit reaches the
    fixed point after one step)."""
    root = refine_eventually_periodic(
        3, 0, 1, (mp.mpf("-2.05"), mp.mpf("-1.99")), prec=150
    )
    assert abs(root + 2) < mp.mpf(2) ** -120
    orb = iterate(root, root, 6, prec=170)
    resid = abs(orb.points[6] - orb.points[3])
    assert resid <= mp.mpf(2) ** -(150 - 8)
    # transversality: |g'(root)| > 0 by finite differences
    h = mp.mpf("1e-12")
    with mp.workprec(170):
        def g_of(c):
            o = iterate(c, c, 6, prec=170)
            return o.points[6] - o.points[3]

        deriv = (g_of(root + h) - g_of(root - h)) / (2 * h)
        assert abs(deriv) > 1


def test_refine_eventually_periodic_needs_bracket():
    with pytest.raises(ValueError):
        refine_eventually_periodic(3, 0, 1, (mp.mpf("-1.7"), mp.mpf("-1.6")))
