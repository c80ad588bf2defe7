"""Core dynamics of f_c(z) = z^2 + c.

Orbit iteration with log-domain derivative accumulation, the distinguished
fixed points alpha/beta, the two real period-3 cycles near c = -2 with their
multiplier calculus, and the Chebyshev utilities used as oracles throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from mpmath import mp

from .precision import DEFAULT_PREC, to_mpf


class CyclesNotRealError(ValueError):
    """Raised when the two period-3 cycles are not both real."""


@dataclass(frozen=True)
class Parameter:
    """A map parameter c with cached derived points.

    ``alpha`` and ``beta`` are the fixed points of f_c (alpha inside the
    central puzzle piece, beta the landing point of the zero-angle ray);
    ``interval`` is the invariant interval [c, f_c(c)] for real c < 0.
    """

    c: object
    prec: int
    alpha: object
    beta: object
    interval: tuple

    @classmethod
    def make(cls, c, prec: int = DEFAULT_PREC) -> "Parameter":
        with mp.workprec(prec):
            cval = mp.mpf(c) if not isinstance(c, (complex, mp.mpc)) else mp.mpc(c)
            a, b = fixed_points(cval, prec)
            fc = cval * cval + cval
            return cls(c=cval, prec=prec, alpha=a, beta=b, interval=(cval, fc))

    @property
    def is_real(self) -> bool:
        return isinstance(self.c, mp.mpf)


def _as_c(c):
    """Accept a Parameter or a bare scalar."""
    return c.c if isinstance(c, Parameter) else c


def fixed_points(c, prec: int = DEFAULT_PREC):
    """Fixed points (alpha, beta) of z^2 + c, beta = (1 + sqrt(1-4c))/2.

    For real c <= 1/4 both are real with alpha <= beta; otherwise the two
    complex roots are returned in the same (1 -/+ sqrt)/2 convention.
    """
    cval = _as_c(c)
    with mp.workprec(prec):
        disc = 1 - 4 * mp.mpf(cval) if not isinstance(cval, mp.mpc) else 1 - 4 * cval
        root = mp.sqrt(disc)
        beta = (1 + root) / 2
        alpha = (1 - root) / 2
        return alpha, beta


@dataclass
class OrbitLog:
    """Forward orbit with log-domain derivative accumulation.

    ``points[k] = f_c^k(z0)`` and ``log_abs_derivative[k] = log|Df_c^k(z0)|
    = sum_{j<k} log|2*points[j]|``, with the k = 0 entry stored explicitly
    as 0.  The two sequences have equal length unless the orbit hits the
    critical point exactly, in which case ``critical_hit_at`` is set and the
    log sequence stops at that index instead of propagating -inf.
    ``escaped`` is set when |z| exceeded the escape radius; the orbit is
    truncated just after the first escaping point.
    """

    points: list
    log_abs_derivative: list
    escaped: bool = False
    escaped_at: Optional[int] = None
    critical_hit_at: Optional[int] = None

    def __len__(self) -> int:
        return len(self.points)


def escape_radius_for(c) -> object:
    """Standard escape bound for quadratics: max(4, |c| + 2)."""
    cval = _as_c(c)
    return max(mp.mpf(4), abs(cval) + 2)


def iterate(c, z0, m: int, prec: int = DEFAULT_PREC, escape_radius=None) -> OrbitLog:
    """Orbit z0, f(z0), ..., f^m(z0) with log|Df^k| accumulated in log space.

    Never forms the raw derivative product, so overflow cannot occur.  Stops
    early (with ``escaped=True``) once |z| exceeds the escape radius.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    cval = _as_c(c)
    with mp.workprec(prec):
        if escape_radius is None:
            escape_radius = escape_radius_for(cval)
        z = z0 if isinstance(z0, mp.mpc) else mp.mpf(z0)
        if isinstance(cval, mp.mpc):
            z = mp.mpc(z)
        points = [z]
        logs = [mp.mpf(0)]
        crit_at = 0 if z == 0 else None
        escaped = False
        escaped_at = None
        for k in range(m):
            zprev = points[-1]
            if abs(zprev) > escape_radius:
                escaped = True
                escaped_at = k
                break
            z = zprev * zprev + cval
            points.append(z)
            if crit_at is None:
                if zprev == 0:
                    crit_at = k
                else:
                    logs.append(logs[-1] + mp.log(2 * abs(zprev)))
            if z == 0 and crit_at is None:
                crit_at = k + 1
        return OrbitLog(
            points=points,
            log_abs_derivative=logs,
            escaped=escaped,
            escaped_at=escaped_at,
            critical_hit_at=crit_at,
        )


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic cycle with multiplier data.

    ``points`` follows the orbit order starting from the distinguished point
    (for the period-3 cycles: the point inside the central piece (alpha,
    -alpha)).  The multiplier of f^period is prod 2*points[j]; its sign and
    log-modulus are stored separately.
    """

    period: int
    points: tuple
    multiplier_sign: int
    log_abs_multiplier: object

    def multiplier(self):
        return self.multiplier_sign * mp.exp(self.log_abs_multiplier)


# (f^3(z) - z) / (f(z) - z) as a polynomial in z; coefficients exact in c.
def _period3_factor_coeffs(cval):
    return [
        mp.mpf(1),
        mp.mpf(1),
        3 * cval + 1,
        2 * cval + 1,
        3 * cval * cval + 3 * cval + 1,
        cval * cval + 2 * cval + 1,
        cval**3 + 2 * cval * cval + cval + 1,
    ]


def _polyval(coeffs: Sequence, x):
    acc = coeffs[0]
    for a in coeffs[1:]:
        acc = acc * x + a
    return acc


def _bisect_newton(func, dfunc, lo, hi, prec: int):
    """Root of func on a bracketing interval: bisection with Newton handoff."""
    with mp.workprec(prec):
        flo = func(lo)
        fhi = func(hi)
        if flo == 0:
            return lo
        if fhi == 0:
            return hi
        if (flo > 0) == (fhi > 0):
            raise ValueError("no sign change on bracket")
        # bisection down to ~20 correct bits, then Newton
        for _ in range(24):
            mid = (lo + hi) / 2
            fm = func(mid)
            if fm == 0:
                return mid
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi, fhi = mid, fm
        x = (lo + hi) / 2
        tol = mp.ldexp(1, -prec + 4) * max(mp.mpf(1), abs(x))
        for _ in range(80):
            fx = func(x)
            dx = dfunc(x)
            if dx == 0:
                break
            step = fx / dx
            xn = x - step
            if not (lo <= xn <= hi):
                # Newton left the bracket; fall back to bisection step
                fm = fx
                if (fm > 0) == (flo > 0):
                    lo = x
                else:
                    hi = x
                xn = (lo + hi) / 2
            if abs(xn - x) <= tol:
                return xn
            x = xn
        return x


def period3_orbits(c, prec: int = DEFAULT_PREC):
    """The two real period-3 cycles (cycleP through p(c) < 0, cycleQ through
    p~(c) > 0), for real c near -2.

    Fixed points are deflated analytically; the remaining degree-6 factor is
    bracketed by sign scanning on [-2 - eps, 2 + eps] and polished by
    bisection-to-Newton.  Each cycle is listed starting from its point inside
    (alpha, -alpha).
    """
    cval = _as_c(c)
    with mp.workprec(prec + 16):
        cval = mp.mpf(cval)
        coeffs = _period3_factor_coeffs(cval)
        dcoeffs = [coeffs[i] * (6 - i) for i in range(6)]

        def poly(x):
            return _polyval(coeffs, x)

        def dpoly(x):
            return _polyval(dcoeffs, x)

        lo, hi = mp.mpf(-2) - mp.mpf("0.25"), mp.mpf(2) + mp.mpf("0.25")
        ncells = 1 << 12
        step = (hi - lo) / ncells
        roots = []
        xprev = lo
        fprev = poly(xprev)
        for i in range(1, ncells + 1):
            x = lo + i * step
            fx = poly(x)
            if fx == 0:
                roots.append(x)
            elif (fx > 0) != (fprev > 0):
                roots.append(_bisect_newton(poly, dpoly, xprev, x, prec + 16))
            xprev, fprev = x, fx
        if len(roots) != 6:
            raise CyclesNotRealError(
                f"cycles not real at this parameter: found {len(roots)} real roots"
            )

        alpha, _ = fixed_points(cval, prec + 16)
        minus_alpha = -alpha

        def orbit_from(x0):
            pts = [x0]
            for _ in range(2):
                pts.append(pts[-1] * pts[-1] + cval)
            return pts

        def nearest_root(y):
            return min(roots, key=lambda r: abs(r - y))

        # group the 6 roots into the 2 cycles by following the dynamics
        remaining = list(roots)
        cycles = []
        while remaining:
            x0 = remaining[0]
            pts = orbit_from(x0)
            cyc = [nearest_root(pt) for pt in pts]
            for r in cyc:
                remaining = [q for q in remaining if q != r]
            cycles.append(cyc)
        if len(cycles) != 2:
            raise CyclesNotRealError("period-3 roots did not form two cycles")

        def build(cyc):
            inside = [x for x in cyc if alpha < x < minus_alpha]
            if len(inside) != 1:
                raise CyclesNotRealError(
                    "cycle does not have exactly one point in the central piece"
                )
            pts = orbit_from(inside[0])
            # snap the iterated points back onto polished roots
            pts = [pts[0], nearest_root(pts[1]), nearest_root(pts[2])]
            logmult = mp.fsum(mp.log(2 * abs(x)) for x in pts)
            sign = 1
            for x in pts:
                if x < 0:
                    sign = -sign
            return PeriodicOrbit(
                period=3,
                points=tuple(to_mpf(x, prec) for x in pts),
                multiplier_sign=sign,
                log_abs_multiplier=to_mpf(logmult, prec),
            )

        built = [build(cyc) for cyc in cycles]
        cycle_p = next(o for o in built if o.points[0] < 0)
        cycle_q = next(o for o in built if o.points[0] > 0)
        return cycle_p, cycle_q


def multiplier_c_derivative(
    c,
    cycle: PeriodicOrbit,
    prec: int = DEFAULT_PREC,
    mode: str = "closed_form",
    h=None,
):
    """d/dc of Df_c^3 along a period-3 cycle.

    Closed form: -8 (7 e2 - 10 c e1 + 12 c^2) / (8 e3 - 1) with e_j the
    elementary symmetric functions of the cycle points.  The finite
    difference mode re-solves the cycle at c +/- h and differences the log
    multipliers, scaled back by the signed multiplier at c.
    """
    if cycle.period != 3:
        raise ValueError("cycle must have period 3")
    cval = _as_c(c)
    with mp.workprec(prec):
        cval = mp.mpf(cval)
        if mode == "closed_form":
            x0, x1, x2 = cycle.points
            e1 = x0 + x1 + x2
            e2 = x0 * x1 + x1 * x2 + x2 * x0
            e3 = x0 * x1 * x2
            denom = 8 * e3 - 1
            if abs(denom) < mp.ldexp(1, -prec // 2):
                raise ZeroDivisionError("derivative formula singular: 8 e3 - 1 ~ 0")
            return -8 * (7 * e2 - 10 * cval * e1 + 12 * cval * cval) / denom
        if mode == "finite_difference":
            if h is None:
                h = mp.mpf(10) ** -6
            h = mp.mpf(h)
            target = cycle.points[0]

            def log_mult_at(cc):
                p_cyc, q_cyc = period3_orbits(cc, prec)
                cand = min(
                    (p_cyc, q_cyc),
                    key=lambda o: abs(o.points[0] - target),
                )
                return cand.log_abs_multiplier

            dlog = (log_mult_at(cval + h) - log_mult_at(cval - h)) / (2 * h)
            return cycle.multiplier() * dlog
        raise ValueError(f"unknown mode {mode!r}")


def chebyshev_eval(k: int, x, prec: int = DEFAULT_PREC):
    """T_k(x) by the stable three-term recurrence; T_k(cos t) = cos(k t)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    with mp.workprec(prec):
        x = mp.mpf(x) if not isinstance(x, mp.mpc) else x
        if k == 0:
            return mp.mpf(1)
        tprev, t = mp.mpf(1), x
        for _ in range(k - 1):
            tprev, t = t, 2 * x * t - tprev
        return t


def cheb_pressure_reference(t, prec: int = DEFAULT_PREC):
    """Exact geometric pressure of f_{-2}: max(-t log 4, (1 - t) log 2)."""
    with mp.workprec(prec):
        t = mp.mpf(t)
        log2 = mp.log(2)
        return max(-2 * t * log2, (1 - t) * log2)
