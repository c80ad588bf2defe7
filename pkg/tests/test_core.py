import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from quadtherm.core import (
    CyclesNotRealError,
    Parameter,
    cheb_pressure_reference,
    chebyshev_eval,
    fixed_points,
    iterate,
    multiplier_c_derivative,
    period3_orbits,
)


def test_iterate_chebyshev_orbit():
    orb = iterate(-2, 0, 3)
    assert [float(x) for x in orb.points] == [0.0, -2.0, 2.0, 2.0]
    assert orb.critical_hit_at == 0


def test_iterate_log_derivative_at_minus_two():
    orb = iterate(-2, -2, 5)
    with mp.workprec(106):
        assert abs(orb.log_abs_derivative[5] - 5 * mp.log(4)) < mp.mpf(2) ** -96


def test_iterate_fixed_point_of_square():
    orb = iterate(0, 1, 4)
    assert all(x == 1 for x in orb.points)
    with mp.workprec(106):
        assert abs(orb.log_abs_derivative[4] - 4 * mp.log(2)) < mp.mpf(2) ** -96


def test_iterate_escape_flag():
    orb = iterate(0.3, 10, 50)
    assert orb.escaped and orb.escaped_at == 0
    assert len(orb.points) == 1


def test_log_derivative_matches_direct_product():
    """The log-space sum loses no accuracy against the direct product of
    |2 z_j| over the same orbit points (product taken at width 200)."""
    m = 40
    z0 = mp.mpf("0.37")
    low = iterate(-1.7, z0, m, prec=53)
    with mp.workprec(220):
        direct = mp.fprod([2 * abs(z) for z in low.points[:m]])
        rel = abs(mp.exp(low.log_abs_derivative[m]) / direct - 1)
        assert rel <= m * mp.mpf(2) ** (1 - 53)


@pytest.mark.parametrize(
    "c, expected",
    [(-2, (-1, 2)), (0, (0, 1)), (-0.75, (-0.5, 1.5))],
)
def test_fixed_points_values(c, expected):
    a, b = fixed_points(mp.mpf(c), 106)
    assert abs(a - expected[0]) < 1e-28
    assert abs(b - expected[1]) < 1e-28


def test_fixed_points_satisfy_equation():
    for c in ("-1.87", "-1.2", "0.2"):
        cval = mp.mpf(c)
        a, b = fixed_points(cval, 106)
        with mp.workprec(106):
            for z in (a, b):
                assert abs(z * z + cval - z) < 4 * mp.mpf(2) ** -106


def test_fixed_points_complex_parameter():
    with mp.workprec(106):
        c = mp.mpc(0.3, 0.4)
        a, b = fixed_points(c, 106)
        assert abs(a * a + c - a) < 1e-28
        assert abs(b * b + c - b) < 1e-28


def test_period3_cycles_at_chebyshev():
    cp, cq = period3_orbits(-2, 106)
    with mp.workprec(120):
        expect_p = sorted(2 * mp.cos(2 * mp.pi * k / 7) for k in (1, 2, 3))
        expect_q = sorted(2 * mp.cos(2 * mp.pi * k / 9) for k in (1, 2, 4))
        for got, want in zip(sorted(cp.points), expect_p):
            assert abs(got - want) < 1e-28
        for got, want in zip(sorted(cq.points), expect_q):
            assert abs(got - want) < 1e-28
    # the in-piece points come first: p < 0 < pt
    assert cp.points[0] < 0 < cq.points[0]
    assert -1 < cp.points[0] < 1 and -1 < cq.points[0] < 1


def test_period3_multipliers_at_chebyshev():
    cp, cq = period3_orbits(-2, 106)
    assert cp.multiplier_sign == 1
    assert cq.multiplier_sign == -1
    with mp.workprec(106):
        assert abs(cp.multiplier() - 8) < 1e-26
        assert abs(cq.multiplier() + 8) < 1e-26


def test_period3_not_real_far_from_chebyshev():
    with pytest.raises(CyclesNotRealError):
        period3_orbits(mp.mpf("0.2"), 106)


def test_multiplier_derivative_closed_form():
    cp, cq = period3_orbits(-2, 106)
    dp = multiplier_c_derivative(-2, cp, 106)
    dq = multiplier_c_derivative(-2, cq, 106)
    assert abs(dp + 16) < 1e-12
    assert abs(dq - 24) < 1e-12


def test_multiplier_derivative_symmetric_functions():
    # e1 = -1, e2 = -2, e3 = 1 gives -8 (-14 - 20 + 48)/7 = -16
    cp, _ = period3_orbits(-2, 106)
    with mp.workprec(106):
        x0, x1, x2 = cp.points
        e1, e2, e3 = x0 + x1 + x2, x0 * x1 + x1 * x2 + x2 * x0, x0 * x1 * x2
        assert abs(e1 + 1) < 1e-26 and abs(e2 + 2) < 1e-26 and abs(e3 - 1) < 1e-26


@pytest.mark.parametrize("c", ["-2", "-1.99", "-1.95"])
def test_multiplier_derivative_finite_difference(c):
    cval = mp.mpf(c)
    for cyc in period3_orbits(cval, 128):
        closed = multiplier_c_derivative(cval, cyc, 128)
        fd = multiplier_c_derivative(cval, cyc, 128, mode="finite_difference")
        assert abs(closed - fd) < 1e-4


def test_chebyshev_small_values():
    assert chebyshev_eval(3, 0) == 0
    assert chebyshev_eval(4, 0) == 1


def test_chebyshev_cosine_identity():
    with mp.workprec(106):
        th = mp.mpf("0.8131")
        for k in (1, 2, 5, 9):
            assert abs(chebyshev_eval(k, mp.cos(th)) - mp.cos(k * th)) < 1e-28


@given(st.floats(min_value=-2.0, max_value=2.0, allow_nan=False))
@settings(max_examples=20, deadline=None)
def test_chebyshev_cycle_polynomial_identities(x):
    """The deflated period-3 factor identities, as polynomial identities."""
    with mp.workprec(106):
        xm = mp.mpf(x)
        ulp = mp.mpf(2) ** -96
        lhs = 2 * chebyshev_eval(4, xm / 2) - 2 * chebyshev_eval(3, xm / 2)
        rhs = (xm - 2) * (xm**3 + xm**2 - 2 * xm - 1)
        assert abs(lhs - rhs) <= 10 * ulp * max(1, abs(lhs))
        lhs2 = 2 * chebyshev_eval(5, xm / 2) - 2 * chebyshev_eval(4, xm / 2)
        rhs2 = (xm - 2) * (xm + 1) * (xm**3 - 3 * xm + 1)
        assert abs(lhs2 - rhs2) <= 10 * ulp * max(1, abs(lhs2))


def test_cheb_identity_sample_points():
    # x = 0: both sides of the first identity equal -1
    with mp.workprec(80):
        val = (2 * chebyshev_eval(4, mp.mpf(0)) - 2 * chebyshev_eval(3, mp.mpf(0))) / (0 - 2)
        assert abs(val + 1) < 1e-20
        val2 = (2 * chebyshev_eval(5, mp.mpf("0.5")) - 2 * chebyshev_eval(4, mp.mpf("0.5"))) / (
            (1 - 2) * (1 + 1)
        )
        assert abs(val2 + 1) < 1e-20


def test_cheb_pressure_reference_values():
    with mp.workprec(80):
        assert abs(cheb_pressure_reference(0) - mp.log(2)) < 1e-20
        assert abs(cheb_pressure_reference(-1) - mp.log(4)) < 1e-20
        assert abs(cheb_pressure_reference(2) + mp.log(2)) < 1e-20


def test_parameter_caches_derived_points():
    p = Parameter.make("-1.9", 106)
    with mp.workprec(106):
        assert abs(p.alpha * p.alpha + p.c - p.alpha) < 1e-28
        assert abs(p.beta * p.beta + p.c - p.beta) < 1e-28
        assert p.alpha < 0 < p.beta
        lo, hi = p.interval
        assert lo == p.c and abs(hi - (p.c * p.c + p.c)) < 1e-28
