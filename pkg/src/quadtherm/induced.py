"""First return map to the central interval V = (-s, s) on the real line.

Branch discovery follows the real puzzle refinement: maintain maximal
intervals on which some iterate is monotone and has not yet met V, splitting
at preimages of the V endpoints.  Orbit endpoints of pieces are postcritical
or boundary-chain points, which never enter V at admissible parameters, so a
piece image either misses V or covers it outright; covering pieces yield a
branch mapping monotonically ONTO V.

Deep branches of level k (contained in the depth n+3k+2 central piece) are
built directly by pulling landing components back along the critical orbit,
two mirror branches per landing component, which is the only route that
reaches return times n+3k+3 for k up to 4 or 5 at realistic n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from mpmath import mp

from .core import _as_c, fixed_points
from .precision import DEFAULT_PREC


class TruncationUnsoundError(RuntimeError):
    """Partition-sum tail does not decay; raise M_max."""


class RefinementError(RuntimeError):
    """Partition refinement hit an inconsistent configuration."""


@dataclass(frozen=True)
class CentralInterval:
    """V = P_{n+1}(0) on the real line: (-s, s) with s = sqrt(a_{n-1} - c).

    ``alpha_chain`` holds the inverse-branch chain at0, ..., at_{n-2} (the
    positive-branch iterates of -alpha) followed by a_{n-1} (one negative
    branch applied last)."""

    n: int
    s: object
    alpha_chain: tuple
    c: object
    prec: int


def _alpha_tilde_chain(cval, count: int):
    """at_0 = -alpha, at_{j+1} = +sqrt(at_j - c); fails if an argument < c."""
    alpha, _ = fixed_points(cval, mp.prec)
    chain = [-alpha]
    for _ in range(count):
        arg = chain[-1] - cval
        if arg < 0:
            raise ValueError("degenerate at this parameter: chain argument < c")
        chain.append(mp.sqrt(arg))
    return chain


def central_interval(c, n: int, prec: int = DEFAULT_PREC) -> CentralInterval:
    """Real trace of the depth n+1 central puzzle piece."""
    if n < 2:
        raise ValueError("n must be >= 2")
    cval = _as_c(c)
    with mp.workprec(prec + 16):
        cval = mp.mpf(cval)
        at = _alpha_tilde_chain(cval, n - 2)  # at_0 .. at_{n-2}
        arg = at[-1] - cval
        if arg < 0:
            raise ValueError("degenerate at this parameter")
        a_last = -mp.sqrt(arg)  # a_{n-1}
        s_arg = a_last - cval
        if s_arg < 0:
            raise ValueError("degenerate at this parameter")
        s = mp.sqrt(s_arg)
        with mp.workprec(prec):
            return CentralInterval(
                n=n,
                s=+s,
                alpha_chain=tuple(+x for x in at) + (+a_last,),
                c=+cval,
                prec=prec,
            )


def _critical_orbit_signs(cval, length: int):
    signs = []
    z = cval
    for _ in range(length):
        if z == 0:
            raise ValueError("critical orbit hit 0; signs undefined")
        signs.append(1 if z > 0 else -1)
        z = z * z + cval
    return signs  # signs of f^0(c) .. f^{length-1}(c)


def _pullback_along_orbit(cval, lo, hi, m_back: int, signs):
    """Inverse branch of f^{m_back} selected by the critical orbit's signs,
    applied to the interval (lo, hi) inside the depth-1 central piece.
    Returns the real trace of the corresponding piece around the critical
    value."""
    for j in range(m_back, 0, -1):
        arg_lo, arg_hi = lo - cval, hi - cval
        if arg_lo < 0:
            raise RefinementError(
                "pullback chain is not real here (parameter outside the "
                "admissible window)"
            )
        r_lo, r_hi = mp.sqrt(arg_lo), mp.sqrt(arg_hi)
        if signs[j - 1] > 0:
            lo, hi = r_lo, r_hi
        else:
            lo, hi = -r_hi, -r_lo
    return lo, hi


def central_halfwidths(c, n: int, k_max: int, prec: int = DEFAULT_PREC):
    """Half-widths sigma_k of P_{n+3k+2}(0) cap R for k = 0..k_max.

    P_{n+3k+2}(0) is the f-preimage of the critical value's piece of depth
    n+3k+1, which is the pullback of the depth-1 central piece along the
    critical orbit; so sigma_k = sqrt(hi - c) with hi the upper end of that
    pullback.  Requires the critical value inside its own pullback piece
    (true on the admissible set; fails e.g. at c = -2)."""
    cval = _as_c(c)
    with mp.workprec(prec + 16):
        cval = mp.mpf(cval)
        alpha, _ = fixed_points(cval, mp.prec)
        signs = _critical_orbit_signs(cval, n + 3 * k_max) if k_max >= 0 else []
        out = []
        for k in range(k_max + 1):
            m_back = n + 3 * k
            lo, hi = _pullback_along_orbit(cval, alpha, -alpha, m_back, signs)
            if not (lo <= cval <= hi):
                raise ValueError(
                    "critical value outside its pullback piece; levels are "
                    "undefined at this parameter"
                )
            out.append(mp.sqrt(hi - cval))
        return [+x for x in out]


@dataclass(frozen=True)
class ReturnBranch:
    """One maximal monotone branch of the first return map.

    ``f^return_time`` maps (lo, hi) monotonically onto V; derivative bounds
    are log-domain with sampled distortion widening; ``level`` is the
    largest k with (lo, hi) inside the depth n+3k+2 central piece."""

    lo: object
    hi: object
    return_time: int
    level: int
    monotone_sign: int
    log_inf_df: object
    log_sup_df: object
    distortion: object
    onto_residual: object


@dataclass(frozen=True)
class LandingBranch:
    """First-landing branch: same shape as ReturnBranch, domain outside V."""

    lo: object
    hi: object
    landing_time: int
    monotone_sign: int
    log_inf_df: object
    log_sup_df: object
    distortion: object
    onto_residual: object


@dataclass
class BranchInventory:
    branches: List[ReturnBranch]
    residual_measure: object
    M_max: int
    n: int
    c: object
    s: object
    prec: int

    def __iter__(self):
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)


def _fm(cval, x, m: int):
    for _ in range(m):
        x = x * x + cval
    return x


def _dfm_log(cval, x, m: int):
    """log|Df^m(x)|, accumulated in log space."""
    acc = mp.mpf(0)
    for _ in range(m):
        acc += mp.log(2 * abs(x))
        x = x * x + cval
    return acc


def _solve_fm(cval, m: int, target, a, b, work: int):
    """Solve f^m(x) = target on [a, b] where f^m is monotone."""
    with mp.workprec(work):
        fn = lambda x: _fm(cval, x, m) - target

        def dfn(x):
            d = mp.mpf(1)
            for _ in range(m):
                d *= 2 * x
                x = x * x + cval
            return d

        fa, fb = fn(a), fn(b)
        if fa == 0:
            return a
        if fb == 0:
            return b
        if (fa > 0) == (fb > 0):
            raise RefinementError("target not bracketed by piece")
        lo, hi, flo = a, b, fa
        for _ in range(28):
            mid = (lo + hi) / 2
            fm_ = fn(mid)
            if fm_ == 0:
                return mid
            if (fm_ > 0) == (flo > 0):
                lo, flo = mid, fm_
            else:
                hi = mid
        x = (lo + hi) / 2
        tol = mp.ldexp(1, -work + 4) * max(mp.mpf(1), abs(x))
        for _ in range(120):
            fx = fn(x)
            dx = dfn(x)
            if dx == 0:
                break
            xn = x - fx / dx
            if not (lo <= xn <= hi):
                if (fx > 0) == (flo > 0):
                    lo = x
                else:
                    hi = x
                xn = (lo + hi) / 2
            if abs(xn - x) <= tol:
                return xn
            x = xn
        return x


def _branch_derivative_bounds(cval, lo, hi, m: int, samples: int = 7):
    """Sampled log|Df^m| bounds on (lo, hi), widened by half the spread."""
    xs = [lo + (hi - lo) * mp.mpf(i) / (samples - 1) for i in range(samples)]
    logs = [_dfm_log(cval, x, m) for x in xs]
    lo_l, hi_l = min(logs), max(logs)
    spread = hi_l - lo_l
    return lo_l - spread / 2, hi_l + spread / 2


def _assign_level(lo, hi, sigmas) -> int:
    """Largest k with the branch inside P_{n+3k+2}(0); -1 when the branch
    is not even inside the level-0 piece (possible off the admissible set,
    e.g. at c = -2 where the critical orbit sits on beta)."""
    level = -1
    bound = max(abs(lo), abs(hi))
    for k in range(len(sigmas)):
        if bound < sigmas[k]:
            level = k
        else:
            break
    return level


def _refine_region(cval, s, pieces, M_max: int, work: int, collect_onto_v=True):
    """Shared partition-refinement driver.

    ``pieces`` are (a, b, orient, img_lo, img_hi, tau) with f^tau monotone on
    (a, b), orient = sign of Df^tau there, image (img_lo, img_hi) disjoint
    from V = (-s, s).  Yields (x1, x2, m, sign) for branches mapping onto V
    and returns the surviving pieces at time M_max.
    """
    found = []
    alive = list(pieces)
    for _ in range(M_max):
        nxt = []
        for a, b, orient, ilo, ihi, tau in alive:
            if tau >= M_max:
                nxt.append((a, b, orient, ilo, ihi, tau))
                continue
            # apply f to the image; monotone since the image avoids 0 in V
            increasing = ilo >= 0
            nlo, nhi = (
                (ilo * ilo + cval, ihi * ihi + cval)
                if increasing
                else (ihi * ihi + cval, ilo * ilo + cval)
            )
            norient = orient if increasing else -orient
            ntau = tau + 1
            if nhi <= -s or nlo >= s:
                nxt.append((a, b, norient, nlo, nhi, ntau))
                continue
            if nlo <= -s and nhi >= s:
                # piece image covers V: carve out the onto-branch
                if norient > 0:
                    x1 = _solve_fm(cval, ntau, -s, a, b, work)
                    x2 = _solve_fm(cval, ntau, s, x1, b, work)
                else:
                    x1 = _solve_fm(cval, ntau, s, a, b, work)
                    x2 = _solve_fm(cval, ntau, -s, x1, b, work)
                if collect_onto_v:
                    found.append((x1, x2, ntau, norient))
                if nlo < -s:
                    left_img = (nlo, -s) if norient > 0 else (s, nhi)
                    nxt.append((a, x1, norient, left_img[0], left_img[1], ntau))
                if nhi > s:
                    right_img = (s, nhi) if norient > 0 else (nlo, -s)
                    nxt.append((x2, b, norient, right_img[0], right_img[1], ntau))
            else:
                raise RefinementError(
                    "piece image partially overlaps V; insufficient precision "
                    "or inadmissible parameter"
                )
        alive = nxt
    return found, alive


def enumerate_return_branches(
    c, n: int, M_max: int, prec: int = DEFAULT_PREC, k_max_levels: int = 8
) -> BranchInventory:
    """All maximal monotone first-return branches with return time <= M_max.

    Requires the critical orbit to avoid the closure of V through M_max
    steps (checked).  Branch intervals are pairwise disjoint and each maps
    onto V with endpoint residual at the working precision.
    """
    cval = _as_c(c)
    work = prec + 2 * M_max + 32
    with mp.workprec(work):
        cval = mp.mpf(cval)
        ci = central_interval(cval, n, work)
        s = ci.s
        # critical orbit must stay off the closure of V
        z = mp.mpf(0)
        for j in range(1, M_max + 2):
            z = z * z + cval
            if abs(z) <= s:
                raise ValueError(
                    f"critical orbit enters V at step {j}; inventory undefined"
                )
        zero = mp.mpf(0)
        fs = s * s + cval  # f(+-s)
        fzero = cval
        init = [
            (-s, zero, -1, fzero, fs, 1),
            (zero, s, 1, fzero, fs, 1),
        ]
        # f decreasing on (-s, 0): image of (-s,0) is (f(0), f(-s)) = (c, f(s))
        found, alive = _refine_region(cval, s, init, M_max, work)

        k_cap = max(1, min(k_max_levels, (M_max - n - 1) // 3 + 1))
        try:
            sigmas = central_halfwidths(cval, n, k_cap, work)
        except (ValueError, RefinementError):
            sigmas = []  # levels undefined at this parameter (e.g. c = -2)
        branches = []
        for x1, x2, m_time, sign in found:
            lo, hi = (x1, x2) if x1 <= x2 else (x2, x1)
            li, ls = _branch_derivative_bounds(cval, lo, hi, m_time)
            resid = max(
                abs(_fm(cval, lo, m_time)) - s,
                abs(_fm(cval, hi, m_time)) - s,
            )
            branches.append(
                ReturnBranch(
                    lo=lo,
                    hi=hi,
                    return_time=m_time,
                    level=_assign_level(lo, hi, sigmas),
                    monotone_sign=sign,
                    log_inf_df=li,
                    log_sup_df=ls,
                    distortion=mp.exp(ls - li),
                    onto_residual=abs(resid),
                )
            )
        branches.sort(key=lambda br: br.lo)
        residual = mp.fsum(b - a for a, b, *_ in alive)
        return BranchInventory(
            branches=branches,
            residual_measure=residual,
            M_max=M_max,
            n=n,
            c=cval,
            s=s,
            prec=prec,
        )


@dataclass
class ExponentReport:
    """Per-branch landing expansion rates (1/m) log inf|DL| and the fitted
    lower-bound shape rate*m - log_c1."""

    min_rate: object
    min_rate_deep: object
    deep_threshold: int
    fitted_rate: object
    fitted_log_c1: object
    count: int


def landing_scan(
    c,
    n: int,
    M_max: int,
    prec: int = DEFAULT_PREC,
    region: str = "invariant_interval",
    deep_threshold: int = 20,
) -> Tuple[List[LandingBranch], ExponentReport]:
    """First-landing branches (domains off V) and expansion diagnostics.

    ``region`` selects the initial domain: the invariant interval minus the
    closure of V, or the central piece (alpha, -alpha) minus it (the part
    used by the level decomposition).
    """
    cval = _as_c(c)
    work = prec + 2 * M_max + 32
    with mp.workprec(work):
        cval = mp.mpf(cval)
        ci = central_interval(cval, n, work)
        s = ci.s
        alpha, _ = fixed_points(cval, work)
        if region == "invariant_interval":
            left = (cval, -s)
            right = (s, cval * cval + cval)
        elif region == "central_piece":
            left = (alpha, -s)
            right = (s, -alpha)
        else:
            raise ValueError(f"unknown region {region!r}")
        init = []
        for (a, b) in (left, right):
            if b <= a:
                continue
            init.append((a, b, 1, a, b, 0))
        found, _alive = _refine_region(cval, s, init, M_max, work)
        branches = []
        for x1, x2, m_time, sign in found:
            lo, hi = (x1, x2) if x1 <= x2 else (x2, x1)
            li, ls = _branch_derivative_bounds(cval, lo, hi, m_time)
            resid = max(
                abs(_fm(cval, lo, m_time)) - s,
                abs(_fm(cval, hi, m_time)) - s,
            )
            branches.append(
                LandingBranch(
                    lo=lo,
                    hi=hi,
                    landing_time=m_time,
                    monotone_sign=sign,
                    log_inf_df=li,
                    log_sup_df=ls,
                    distortion=mp.exp(ls - li),
                    onto_residual=abs(resid),
                )
            )
        branches.sort(key=lambda br: br.lo)
        rates = [(br.landing_time, br.log_inf_df / br.landing_time) for br in branches]
        min_rate = min((r for _, r in rates), default=mp.mpf("nan"))
        deep = [r for m_t, r in rates if m_t >= deep_threshold]
        min_deep = min(deep) if deep else mp.mpf("nan")
        # least-squares fit log inf|DL| ~ rate*m - log_c1
        if len(branches) >= 2 and len({br.landing_time for br in branches}) >= 2:
            ms = [mp.mpf(br.landing_time) for br in branches]
            ys = [br.log_inf_df for br in branches]
            N = len(ms)
            sm, sy = mp.fsum(ms), mp.fsum(ys)
            smm = mp.fsum(x * x for x in ms)
            smy = mp.fsum(x * y for x, y in zip(ms, ys))
            denom = N * smm - sm * sm
            rate = (N * smy - sm * sy) / denom
            intercept = (sy - rate * sm) / N
        else:
            rate, intercept = mp.mpf("nan"), mp.mpf("nan")
        report = ExponentReport(
            min_rate=min_rate,
            min_rate_deep=min_deep,
            deep_threshold=deep_threshold,
            fitted_rate=rate,
            fitted_log_c1=-intercept,
            count=len(branches),
        )
        return branches, report


def level_branches(
    c,
    n: int,
    k: int,
    prec: int = DEFAULT_PREC,
    landing_M: int = 10,
    landing: Optional[List[LandingBranch]] = None,
) -> List[ReturnBranch]:
    """Level-k return branches via the postcritical pullback.

    Every level-k branch W satisfies f(W) inside the depth n+3k+1 piece of
    the critical value; pulling a landing component (or V itself, for the
    two minimal branches with return time n+3k+1) back along the critical
    orbit and taking the two mirror square-root preimages enumerates the
    level exactly, truncated at landing time ``landing_M``.
    """
    cval = _as_c(c)
    m_back = n + 3 * k
    work = prec + 2 * (m_back + landing_M + 4) + 32
    with mp.workprec(work):
        cval = mp.mpf(cval)
        ci = central_interval(cval, n, work)
        s = ci.s
        if landing is None:
            landing, _ = landing_scan(
                cval, n, landing_M, prec=work, region="central_piece"
            )
        signs = _critical_orbit_signs(cval, m_back)
        try:
            sigmas = central_halfwidths(cval, n, k + 1, work)
        except (ValueError, RefinementError):
            sigmas = []

        targets = [(-s, s, 0)] + [
            (br.lo, br.hi, br.landing_time) for br in landing
        ]
        out = []
        for t_lo, t_hi, m_land in targets:
            lo, hi = _pullback_along_orbit(cval, t_lo, t_hi, m_back, signs)
            # lo, hi bracket a sub-piece of the critical-value piece.  Only
            # targets landing right of c have real f-preimages; the others
            # are the complex-conjugate branch pairs off the real axis.
            if hi < cval:
                continue
            if lo <= cval:
                raise RefinementError(
                    "pullback target straddles the critical value"
                )
            r_lo, r_hi = mp.sqrt(lo - cval), mp.sqrt(hi - cval)
            m_total = m_back + 1 + m_land
            for w_lo, w_hi in ((-r_hi, -r_lo), (r_lo, r_hi)):
                li, ls = _branch_derivative_bounds(cval, w_lo, w_hi, m_total)
                resid = max(
                    abs(_fm(cval, w_lo, m_total)) - s,
                    abs(_fm(cval, w_hi, m_total)) - s,
                )
                img_lo = _fm(cval, w_lo, m_total)
                sign = 1 if img_lo < 0 else -1
                out.append(
                    ReturnBranch(
                        lo=w_lo,
                        hi=w_hi,
                        return_time=m_total,
                        level=_assign_level(w_lo, w_hi, sigmas),
                        monotone_sign=sign,
                        log_inf_df=li,
                        log_sup_df=ls,
                        distortion=mp.exp(ls - li),
                        onto_residual=abs(resid),
                    )
                )
        out.sort(key=lambda br: br.lo)
        return out


def special_branch(c, n: int, k: int, prec: int = DEFAULT_PREC) -> ReturnBranch:
    """The level-k branch with return time n+3k+3 (built from the landing
    components of time 2 adjacent to the traps); the negative-side branch
    with the smaller derivative is returned."""
    cand = [
        br
        for br in level_branches(c, n, k, prec=prec, landing_M=2)
        if br.return_time == n + 3 * k + 3
    ]
    if not cand:
        raise RefinementError(f"special branch not found at level {k}")
    return min(cand, key=lambda br: br.log_sup_df)


def minimal_branches(c, n: int, k: int, prec: int = DEFAULT_PREC) -> List[ReturnBranch]:
    """The two level-k branches of minimal return time n+3k+1."""
    return [
        br
        for br in level_branches(c, n, k, prec=prec, landing_M=1)
        if br.return_time == n + 3 * k + 1
    ]


def _log_sum_exp(values) -> object:
    vals = [v for v in values if v is not None]
    if not vals:
        return mp.mpf("-inf")
    m_ = max(vals)
    if mp.isinf(m_):
        return m_
    return m_ + mp.log(mp.fsum(mp.exp(v - m_) for v in vals))


@dataclass(frozen=True)
class PartitionSum:
    """Two-sided bound on log Z_ell(t, p) with a geometric truncation tail
    folded into the upper bound."""

    log_lower: object
    log_upper: object
    ell: int
    tail_log: object
    tail_ratio: object


def z_partition_sum(branches, t, p, ell: int = 1, tail: bool = True) -> PartitionSum:
    """log of the ell-word partition sum with inf/sup derivative bounds.

    Word sums factorize over positions, so the ell-fold sum is exactly ell
    times the single-branch bound in log domain.  The truncation tail is
    extrapolated geometrically from the last return-time blocks and refused
    when the measured ratio is above 1 - 2^-4.
    """
    if ell not in (1, 2, 3):
        raise ValueError("ell must be 1, 2, or 3")
    blist = list(branches)
    if not blist:
        raise ValueError("no branches")
    t = mp.mpf(t)
    p = mp.mpf(p)
    lower_terms = []
    upper_terms = []
    by_m = {}
    for br in blist:
        m_t = br.return_time
        lo_term = -m_t * p - t * br.log_sup_df
        up_term = -m_t * p - t * br.log_inf_df
        lower_terms.append(lo_term)
        upper_terms.append(up_term)
        by_m.setdefault(m_t, []).append(up_term)
    log_low = _log_sum_exp(lower_terms)
    log_up = _log_sum_exp(upper_terms)
    tail_log = mp.mpf("-inf")
    ratio = mp.mpf("nan")
    if tail:
        ms = sorted(by_m)
        blocks = [(m_t, _log_sum_exp(by_m[m_t])) for m_t in ms]
        if len(blocks) >= 3:
            last = blocks[-5:]
            ratios = []
            for (m0, b0), (m1, b1) in zip(last[:-1], last[1:]):
                ratios.append(mp.exp((b1 - b0) / (m1 - m0)))
            ratio = max(ratios)
            if ratio >= 1 - mp.mpf(2) ** -4:
                raise TruncationUnsoundError(
                    f"truncation unsound (block ratio {mp.nstr(ratio, 6)}), raise M_max"
                )
            tail_log = blocks[-1][1] + mp.log(ratio / (1 - ratio))
            log_up = _log_sum_exp([log_up, tail_log])
    return PartitionSum(
        log_lower=ell * log_low,
        log_upper=ell * log_up,
        ell=ell,
        tail_log=tail_log,
        tail_ratio=ratio,
    )


def bowen_root(branches, t, prec: int = DEFAULT_PREC, p_range=None):
    """Root in p of the one-word partition sum: (p_star, bracket).

    Bisection on the signs of the distortion-widened two-sided bounds of
    log Z_1(t, p); the bracket encloses the roots of both bounds.
    """
    blist = list(branches)
    t = mp.mpf(t)
    with mp.workprec(prec):
        def upper(p):
            return z_partition_sum(blist, t, p, ell=1, tail=True).log_upper

        def lower(p):
            return z_partition_sum(blist, t, p, ell=1, tail=False).log_lower

        if p_range is None:
            p_lo, p_hi = -2 * t * mp.log(2) - 4, mp.log(2) + 3
        else:
            p_lo, p_hi = mp.mpf(p_range[0]), mp.mpf(p_range[1])

        def find_root(fn):
            # log Z is strictly decreasing in p and tail soundness is
            # upward-closed in p, so walk down from the sound side until the
            # sign flips, then bisect inside the (sound) bracket.
            hi = p_hi
            fhi = fn(hi)
            if fhi > 0:
                raise ValueError(
                    f"log Z still positive at p = {mp.nstr(hi, 6)}; widen p_range"
                )
            step = mp.mpf("0.25")
            lo = hi
            while lo - step >= p_lo:
                cand = lo - step
                try:
                    fc_ = fn(cand)
                except TruncationUnsoundError:
                    # cannot certify below cand: report the last sound p as a
                    # conservative bound for this root
                    return lo
                if fc_ > 0:
                    lo = cand
                    break
                lo = cand
            else:
                raise ValueError(
                    "bounds do not change sign on the search range "
                    f"[{mp.nstr(p_lo, 6)}, {mp.nstr(p_hi, 6)}]"
                )
            hi = lo + step
            for _ in range(max(60, prec // 2)):
                mid = (lo + hi) / 2
                if fn(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            return (lo + hi) / 2

        root_up = find_root(upper)
        root_lo = find_root(lower)
        lo_b, hi_b = (root_lo, root_up) if root_lo <= root_up else (root_up, root_lo)
        return (lo_b + hi_b) / 2, (lo_b, hi_b)


@dataclass(frozen=True)
class LevelContribution:
    k: int
    log_level_sum: object
    log_level_sum_lower: object
    log_level_sum_upper: object
    log_postcritical_term: object
    log_ratio: object
    branch_count: int


def level_decomposition(
    c,
    n: int,
    t,
    p,
    k_max: int = 4,
    branches=None,
    landing_M: int = 8,
    prec: int = DEFAULT_PREC,
) -> List[LevelContribution]:
    """Per-level branch sums against the postcritical terms
    exp(-(n+3k) p) |Df^{n+3k}(c)|^{-t/2}.

    With ``branches`` given (a full inventory), levels are read off the
    inventory; otherwise each level is enumerated by the postcritical
    pullback, truncated at landing time ``landing_M``.
    """
    cval = _as_c(c)
    t = mp.mpf(t)
    p = mp.mpf(p)
    with mp.workprec(prec):
        cval = mp.mpf(cval)
        landing = None
        if branches is None:
            landing, _ = landing_scan(
                cval, n, landing_M, prec=prec, region="central_piece"
            )
        out = []
        orbit_log = mp.mpf(0)
        z = cval
        for _ in range(n):  # log|Df^n(c)| accumulates below per level
            orbit_log += mp.log(2 * abs(z))
            z = z * z + cval
        for k in range(k_max + 1):
            if branches is not None:
                lvl = [br for br in branches if br.level == k]
            else:
                lvl = level_branches(
                    cval, n, k, prec=prec, landing_M=landing_M, landing=landing
                )
            if not lvl:
                continue
            lower = _log_sum_exp(
                [-br.return_time * p - t * br.log_sup_df for br in lvl]
            )
            upper = _log_sum_exp(
                [-br.return_time * p - t * br.log_inf_df for br in lvl]
            )
            mid = (lower + upper) / 2
            log_term = -(n + 3 * k) * p - (t / 2) * orbit_log
            out.append(
                LevelContribution(
                    k=k,
                    log_level_sum=mid,
                    log_level_sum_lower=lower,
                    log_level_sum_upper=upper,
                    log_postcritical_term=log_term,
                    log_ratio=mid - log_term,
                    branch_count=len(lvl),
                )
            )
            for _ in range(3):
                orbit_log += mp.log(2 * abs(z))
                z = z * z + cval
        return out


def periodic_point_in_branch(c, br: ReturnBranch, prec: int = DEFAULT_PREC):
    """The fixed point of f^return_time in the closure of the branch."""
    cval = _as_c(c)
    m_t = br.return_time
    work = prec + 2 * m_t + 32
    with mp.workprec(work):
        cval = mp.mpf(cval)
        fn = lambda x: _fm(cval, x, m_t) - x

        def dfn(x):
            d = mp.mpf(1)
            x0 = x
            for _ in range(m_t):
                d *= 2 * x0
                x0 = x0 * x0 + cval
            return d - 1

        from .core import _bisect_newton

        x = _bisect_newton(fn, dfn, br.lo, br.hi, work)
        lyap = _dfm_log(cval, x, m_t) / m_t
        resid = abs(_fm(cval, x, m_t) - x)
        with mp.workprec(prec):
            return +x, +lyap, +resid
