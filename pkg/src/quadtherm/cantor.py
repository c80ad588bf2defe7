"""Real trace of the period-3 Markov structure near c = -2.

The second iterate pullback identity f^{-3}(P_1(0)) cap P_1(0) = f^{-1}(V_2)
has real trace {x in (alpha, -alpha) : f^3(x) in (alpha, -alpha)}, which
consists of exactly two intervals: the traps trap_y (negative side, symbol 0)
and trap_yt (positive side, symbol 1).  g = f^3 maps each monotonically onto
(alpha, -alpha); its fixed points p < 0 < p~ carry the multiplier ratio
eta = |Dg(p)| / |Dg(p~)| that controls the phased-itinerary construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from mpmath import mp

from .core import _as_c, _bisect_newton, fixed_points, iterate
from .precision import DEFAULT_PREC, ulp_at


class TrapEscapeError(ValueError):
    """An iterate left both traps during coding."""

    def __init__(self, index: int, value):
        self.index = index
        self.value = value
        super().__init__(f"iterate {index} left both traps (value {mp.nstr(value, 12)})")


@dataclass(frozen=True)
class CantorSystem:
    """Immutable real trace of the g = f^3 trap structure at one parameter."""

    c: object
    prec: int
    alpha: object
    trap_y: Tuple[object, object]
    trap_yt: Tuple[object, object]
    p: object
    pt: object
    log_mult_p: object
    log_mult_pt: object
    eta: object

    def g(self, x):
        c = self.c
        for _ in range(3):
            x = x * x + c
        return x

    def dg_log_abs(self, x):
        c = self.c
        acc = mp.mpf(0)
        for _ in range(3):
            acc += mp.log(2 * abs(x))
            x = x * x + c
        return acc

    def trap_of(self, x) -> Optional[int]:
        """0 for trap_y, 1 for trap_yt, None if in neither (closed traps)."""
        if self.trap_y[0] <= x <= self.trap_y[1]:
            return 0
        if self.trap_yt[0] <= x <= self.trap_yt[1]:
            return 1
        return None


def _f3(cval):
    def g(x):
        for _ in range(3):
            x = x * x + cval
        return x

    return g


def _f3_deriv(cval):
    def dg(x):
        d = mp.mpf(1)
        for _ in range(3):
            d *= 2 * x
            x = x * x + cval
        return d

    return dg


def build_cantor_system(c, prec: int = DEFAULT_PREC, scan_cells: int = 4096) -> CantorSystem:
    """Locate the traps, trap fixed points, multipliers and eta at real c.

    Trap endpoints solve f^3(x) = +/-alpha inside (alpha, -alpha); the
    solution set of {x in (alpha,-alpha) : f^3(x) in (alpha,-alpha)} must
    have exactly two components, else the parameter is outside the
    admissible window.
    """
    cval = _as_c(c)
    work = prec + 16
    with mp.workprec(work):
        cval = mp.mpf(cval)
        alpha, _ = fixed_points(cval, work)
        if not (alpha < 0):
            raise ValueError("parameter outside admissible window: alpha >= 0")
        lo, hi = alpha, -alpha
        g = _f3(cval)
        dg = _f3_deriv(cval)

        # all roots of f^3(x) = +/-alpha in (alpha, -alpha), by sign scan
        cuts = [lo, hi]
        for target in (alpha, -alpha):
            fn = lambda x, tt=target: g(x) - tt
            step = (hi - lo) / scan_cells
            xprev, fprev = lo, fn(lo)
            for i in range(1, scan_cells + 1):
                x = lo + i * step if i < scan_cells else hi
                fx = fn(x)
                if fx == 0:
                    cuts.append(x)
                elif (fx > 0) != (fprev > 0):
                    cuts.append(
                        _bisect_newton(fn, dg, xprev, x, work)
                    )
                xprev, fprev = x, fx
        cuts = sorted(set(cuts))

        comps = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            midv = g((a + b) / 2)
            good = lo < midv < hi
            if good:
                if comps and comps[-1][1] == a:
                    comps[-1] = (comps[-1][0], b)
                else:
                    comps.append((a, b))
        comps = [(a, b) for a, b in comps if not (a == lo or b == hi)]
        if len(comps) != 2:
            raise ValueError(
                f"parameter outside admissible window: {len(comps)} trap components"
            )
        trap_y, trap_yt = comps
        if not (trap_y[1] < 0 < trap_yt[0]):
            raise ValueError("trap components not separated by the critical point")

        def fixed_point_in(trap):
            fn = lambda x: g(x) - x
            dfn = lambda x: dg(x) - 1
            return _bisect_newton(fn, dfn, trap[0], trap[1], work)

        p = fixed_point_in(trap_y)
        pt = fixed_point_in(trap_yt)
        log_mult = lambda x: iterate(cval, x, 3, work).log_abs_derivative[3]
        lm_p = log_mult(p)
        lm_pt = log_mult(pt)
        with mp.workprec(prec):
            return CantorSystem(
                c=+cval,
                prec=prec,
                alpha=+alpha,
                trap_y=(+trap_y[0], +trap_y[1]),
                trap_yt=(+trap_yt[0], +trap_yt[1]),
                p=+p,
                pt=+pt,
                log_mult_p=+lm_p,
                log_mult_pt=+lm_pt,
                eta=mp.exp(lm_p - lm_pt),
            )


def eta_positive_check(sys: CantorSystem) -> Optional[bool]:
    """True iff eta > 1 with a certified margin, None when the margin
    straddles 1 (e.g. at c = -2 where eta = 1 exactly)."""
    with mp.workprec(sys.prec):
        margin = abs(sys.log_mult_p - sys.log_mult_pt)
        # outward-rounded slack on the two accumulated 3-term log sums
        slack = 16 * ulp_at(sys.log_mult_p, sys.prec)
        if margin <= slack:
            return None
        return sys.log_mult_p > sys.log_mult_pt


def _inverse_branch(sys: CantorSystem, symbol: int, y, work: int):
    """Solve g(x) = y for x in the (closed) trap selected by ``symbol``.

    The trap endpoints are themselves roots of g(x) = +/-alpha, so the
    bracket is padded by a few ulps to keep boundary targets solvable.
    """
    trap = sys.trap_y if symbol == 0 else sys.trap_yt
    cval = sys.c
    g = _f3(cval)
    dg = _f3_deriv(cval)
    fn = lambda x: g(x) - y
    pad = mp.ldexp(max(1, abs(trap[0]) + abs(trap[1])), -work + 24)
    lo, hi = trap[0] - pad, trap[1] + pad
    try:
        return _bisect_newton(fn, dg, lo, hi, work)
    except ValueError:
        flo, fhi = fn(lo), fn(hi)
        end, fend = (lo, flo) if abs(flo) < abs(fhi) else (hi, fhi)
        if abs(fend) <= mp.ldexp(max(1, abs(y)), -work + 32):
            return end
        raise


def point_from_itinerary(sys: CantorSystem, word: str, prec: Optional[int] = None):
    """Point whose g-itinerary matches ``word``; returns (x, interval_width).

    Successive inverse-branch pullbacks of the closure of (alpha, -alpha)
    contract geometrically; the final bracketing width is reported.
    """
    if not word or set(word) - set("01"):
        raise ValueError("word must be a nonempty 0/1 string")
    prec = prec or sys.prec
    work = prec + 16
    with mp.workprec(work):
        lo, hi = sys.alpha, -sys.alpha
        for sym in reversed(word):
            nlo = _inverse_branch(sys, int(sym), lo, work)
            nhi = _inverse_branch(sys, int(sym), hi, work)
            lo, hi = (nlo, nhi) if nlo <= nhi else (nhi, nlo)
        with mp.workprec(prec):
            return (lo + hi) / 2, hi - lo


def itinerary_of_point(sys: CantorSystem, x, L: int) -> str:
    """Trap symbols of x, g(x), ..., g^{L-1}(x); raises TrapEscapeError with
    the escape index if an iterate leaves both (closed) traps."""
    if L < 1:
        raise ValueError("L must be >= 1")
    work = sys.prec + 16
    with mp.workprec(work):
        x = mp.mpf(x)
        out = []
        for k in range(L):
            sym = sys.trap_of(x)
            if sym is None:
                raise TrapEscapeError(k, x)
            out.append(str(sym))
            x = sys.g(x)
        return "".join(out)


@dataclass(frozen=True)
class ChiEstimate:
    """Lower Lyapunov exponent of the critical orbit.

    ``estimate`` is the finite-horizon value log|Df^horizon(c)| / horizon.
    ``formula_value`` is log|Dg(p~)| / 3, which equals the true exponent
    only when the zero-density of the parameter's itinerary tends to 0; the
    flag records that caveat.
    """

    estimate: object
    formula_value: object
    formula_conditional: str = "valid when the itinerary zero-density tends to 0"


def chi_crit(c, n: int, horizon: int, prec: int = DEFAULT_PREC) -> ChiEstimate:
    """Finite-horizon estimate of chi_crit(c) plus the trap-multiplier
    formula value; horizon must reach at least the entry depth n."""
    if horizon < max(n, 1):
        raise ValueError("horizon must be >= n")
    cval = _as_c(c)
    with mp.workprec(prec):
        orb = iterate(cval, mp.mpf(cval), horizon, prec)
        if orb.critical_hit_at is not None:
            raise ValueError(f"critical hit in orbit at index {orb.critical_hit_at}")
        est = orb.log_abs_derivative[horizon] / horizon
        sys = build_cantor_system(cval, prec)
        formula = sys.log_mult_pt / 3
        return ChiEstimate(estimate=est, formula_value=formula)
