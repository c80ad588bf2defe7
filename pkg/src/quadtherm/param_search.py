"""Certified location of parameters with a prescribed itinerary prefix.

Membership tests run in outward-rounded interval arithmetic (mpmath.iv), so
"verified" and "refuted" verdicts are rigorous at the working precision.
The trap condition f^{n+3k}(c) in Y cup Y~ is realized through the real
trace of the maximal-invariant identity: a real point of the central piece
(alpha, -alpha) lies in a trap exactly when its third image is again in
(alpha, -alpha).  This form needs only alpha(c) = (1 - sqrt(1-4c))/2 and is
uniform over parameter cells.

Sign conditions are scanned before trap conditions when attributing a
refutation, so the first failure reported for an escaping orbit is the
earliest violated sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from mpmath import iv, mp

from .core import _as_c
from .precision import DEFAULT_PREC, iv_endpoints


class SearchExhaustedError(RuntimeError):
    """No certified cell found at the maximum subdivision depth."""


@dataclass(frozen=True)
class MembershipReport:
    verdict: str  # verified | refuted | undecided
    first_failure: Optional[Tuple[str, int, int]]  # (condition id, epoch, iterate index)
    margin: Optional[object]  # smallest certified distance to a condition boundary

    def __post_init__(self):
        if self.verdict not in ("verified", "refuted", "undecided"):
            raise ValueError(f"bad verdict {self.verdict!r}")


@dataclass(frozen=True)
class CertifiedInterval:
    lo: object
    hi: object
    epochs_verified: int
    itinerary: str
    margin: object
    prec: int

    @property
    def midpoint(self):
        return (self.lo + self.hi) / 2

    @property
    def width(self):
        return self.hi - self.lo


def _orbit_iv(c_iv, length: int):
    """Critical value orbit f^j(c) for j = 0..length as intervals."""
    pts = [c_iv]
    for _ in range(length):
        z = pts[-1]
        pts.append(z**2 + c_iv)
    return pts


def _cond_sign(x, want_positive: bool):
    """(status, margin): certified sign check of an interval scalar."""
    lo, hi = iv_endpoints(x)
    if want_positive:
        if lo > 0:
            return "true", lo
        if hi <= 0:
            return "false", -hi
    else:
        if hi < 0:
            return "true", -hi
        if lo >= 0:
            return "false", lo
    return "unknown", None


def _cond_central(x, alpha_iv, minus_alpha_iv):
    """(status, margin): certified x in (alpha, -alpha)."""
    xlo, xhi = iv_endpoints(x)
    alo, ahi = iv_endpoints(alpha_iv)
    mlo, mhi = iv_endpoints(minus_alpha_iv)
    m1 = xlo - ahi  # distance above alpha
    m2 = mlo - xhi  # distance below -alpha
    if m1 > 0 and m2 > 0:
        return "true", min(m1, m2)
    if xhi <= alo or xlo >= mhi:
        return "false", max(alo - xhi, xlo - mhi)
    return "unknown", None


def _evaluate_conditions(c_iv, n: int, K: int, prefix: str, prec: int):
    """Certified evaluation of the depth-n membership conditions on a
    parameter interval, plus itinerary-symbol conditions for ``prefix``.

    Epochs 0..K carry the sign conditions f^{n+3k+1}(c) < 0 and
    f^{n+3k+2}(c) > 0 and the trap condition (central membership of both
    f^{n+3k}(c) and f^{n+3(k+1)}(c)).  Returns a MembershipReport.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    old = iv.prec
    iv.prec = prec
    try:
        with mp.workprec(prec):
            orbit = _orbit_iv(c_iv, n + 3 * (K + 1))
            alpha_iv = (1 - iv.sqrt(1 - 4 * c_iv)) / 2
            minus_alpha_iv = -alpha_iv

            sign_conditions = [("c_negative", 0, 0, False)]
            for j in range(1, n):
                sign_conditions.append(("pre_positive", 0, j, True))
            for k in range(K + 1):
                sign_conditions.append(("post1_negative", k, n + 3 * k + 1, False))
                sign_conditions.append(("post2_positive", k, n + 3 * k + 2, True))
            for k, sym in enumerate(prefix):
                if k > K:
                    break
                sign_conditions.append(
                    ("symbol", k, n + 3 * k, sym == "1")
                )
            sign_conditions.sort(key=lambda t: t[2])

            margins = []
            unresolved = False
            for name, k, j, want_pos in sign_conditions:
                status, margin = _cond_sign(orbit[j], want_pos)
                if status == "false":
                    return MembershipReport("refuted", (name, k, j), margin)
                if status == "unknown":
                    unresolved = True
                else:
                    margins.append(margin)

            for k in range(K + 2):
                j = n + 3 * k
                epoch = min(k, K)
                name = "in_central" if k <= K else "trap_return"
                status, margin = _cond_central(orbit[j], alpha_iv, minus_alpha_iv)
                if status == "false":
                    return MembershipReport("refuted", (name, epoch, j), margin)
                if status == "unknown":
                    unresolved = True
                else:
                    margins.append(margin)

            if unresolved:
                return MembershipReport("undecided", None, None)
            return MembershipReport("verified", None, min(margins))
    finally:
        iv.prec = old


def kn_membership(c, n: int, K: int, prec: int = DEFAULT_PREC) -> MembershipReport:
    """Certified membership test of a single parameter value.

    Checks c < 0, the pre-entry positivity f^j(c) > 0 for 1 <= j <= n-1,
    and for each epoch 0 <= k <= K the sign pattern and the trap condition.
    ``undecided`` means some condition straddles its boundary at this
    precision; callers should widen precision.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    cval = _as_c(c)
    old = iv.prec
    iv.prec = prec
    try:
        with mp.workprec(prec):
            c_iv = iv.mpf(mp.mpf(cval))
    finally:
        iv.prec = old
    return _evaluate_conditions(c_iv, n, K, prefix="", prec=prec)


def kn_membership_with_prefix(c, n: int, prefix: str, prec: int = DEFAULT_PREC) -> MembershipReport:
    """Membership through epoch K = len(prefix) with symbol conditions."""
    cval = _as_c(c)
    old = iv.prec
    iv.prec = prec
    try:
        with mp.workprec(prec):
            c_iv = iv.mpf(mp.mpf(cval))
    finally:
        iv.prec = old
    return _evaluate_conditions(c_iv, n, len(prefix), prefix, prec=prec)


def _cell_iv(lo, hi, prec: int):
    old = iv.prec
    iv.prec = prec
    try:
        return iv.mpf([lo, hi])
    finally:
        iv.prec = old


def find_parameter(
    n: int,
    prefix: str,
    tol,
    prec: int = DEFAULT_PREC,
    window: Tuple[float, float] = None,
    max_depth: int = 200,
) -> CertifiedInterval:
    """Certified interval of parameters whose itinerary starts with ``prefix``.

    Maintains a work list of parameter cells over the search window; refuted
    cells are dropped, undecided cells split (leftmost first), and the hull
    of the surviving cells is refined until its width is at most ``tol`` and
    its midpoint passes the membership test with positive margin.  Identical
    inputs traverse identical cell sequences, so results are deterministic.
    """
    if not prefix or set(prefix) - set("01"):
        raise ValueError("prefix must be a nonempty 0/1 string")
    if n < 3:
        raise ValueError("n must be >= 3")
    K = len(prefix)

    with mp.workprec(prec + 64):
        tol = mp.mpf(tol)
        if tol <= 0:
            raise ValueError("tol must be positive")
        if window is None:
            window = (mp.mpf(-2), mp.mpf("-0.75"))
        lo0, hi0 = mp.mpf(window[0]), mp.mpf(window[1])

    def eval_prec(depth: int) -> int:
        return max(prec, 70 + depth + 2 * (n + 3 * (K + 1)))

    cells = [(lo0, hi0, "unknown")]
    prev_hull_width = None
    stagnant = 0
    for depth in range(max_depth):
        pe = eval_prec(depth)
        with mp.workprec(pe):
            survivors = []
            for lo, hi, status in cells:
                if status != "verified":
                    rep = _evaluate_conditions(_cell_iv(lo, hi, pe), n, K, prefix, pe)
                    if rep.verdict == "refuted":
                        continue
                    status = rep.verdict
                survivors.append((lo, hi, status))
            if not survivors:
                raise SearchExhaustedError(
                    f"no parameter cell survives for prefix {prefix!r} at depth {depth}"
                )
            hull_lo = survivors[0][0]
            hull_hi = survivors[-1][1]
            hull_width = hull_hi - hull_lo

            def certify(mid, out_lo, out_hi) -> Optional[CertifiedInterval]:
                rep_mid = _evaluate_conditions(
                    _cell_iv(mid, mid, pe), n, K, prefix, pe
                )
                if rep_mid.verdict != "verified":
                    return None
                return CertifiedInterval(
                    lo=+out_lo,
                    hi=+out_hi,
                    epochs_verified=K,
                    itinerary=prefix,
                    margin=rep_mid.margin,
                    prec=pe,
                )

            if prev_hull_width is not None and hull_width > prev_hull_width * mp.mpf("0.95"):
                stagnant += 1
            else:
                stagnant = 0

            # The finite-depth condition set can have several components and
            # be intrinsically wider than tol (deep signs are free), so once
            # the hull fits in tol or has stopped shrinking, pin a certified
            # midpoint: the hull center if it verifies, else the center of a
            # verified cell (largest first, then leftmost).
            if hull_width <= tol or stagnant >= 3:
                hull_mid = (hull_lo + hull_hi) / 2
                if hull_width <= tol:
                    out = certify(hull_mid, hull_lo, hull_hi)
                    if out is not None:
                        return out
                half = min(tol, hull_width) / 2
                verified_cells = [
                    (lo, hi) for lo, hi, v in survivors if v == "verified"
                ]
                candidates = [] if hull_width <= tol else [hull_mid]
                candidates += [
                    (lo + hi) / 2
                    for lo, hi in sorted(
                        verified_cells, key=lambda ab: (ab[0] - ab[1], ab[0])
                    )
                ]
                for mid in candidates:
                    out = certify(mid, mid - half, mid + half)
                    if out is not None:
                        return out

            next_cells = []
            for lo, hi, status in survivors:
                if status == "verified":
                    next_cells.append((lo, hi, status))
                    continue
                mid = (lo + hi) / 2
                next_cells.append((lo, mid, "unknown"))
                next_cells.append((mid, hi, "unknown"))
            cells = next_cells
            prev_hull_width = hull_width

    raise SearchExhaustedError(
        f"not found at this precision/depth: prefix {prefix!r}, n={n}, "
        f"final hull width {mp.nstr(prev_hull_width, 6) if prev_hull_width is not None else '?'}"
    )


def refine_eventually_periodic(
    n: int,
    preperiod: int,
    period: int,
    seed: Tuple[object, object],
    prec: int = DEFAULT_PREC,
):
    """Newton refinement of the eventually-periodic anchor equation
    g(c) = f^{n+3(preperiod+period)}(c) - f^{n+3 preperiod}(c) = 0.

    ``seed`` is a (lo, hi) bracket with a sign change of g (a
    CertifiedInterval works via its lo/hi).  Newton steps use the exact
    forward-mode derivative d/dc f^m(c); steps leaving the bracket fall back
    to bisection.  Returns the root at full working precision.
    """
    if period < 1 or preperiod < 0:
        raise ValueError("need period >= 1 and preperiod >= 0")
    m_hi = n + 3 * (preperiod + period)
    m_lo = n + 3 * preperiod
    lo = getattr(seed, "lo", None)
    hi = getattr(seed, "hi", None)
    if lo is None:
        lo, hi = seed

    def g_and_dg(cc):
        z = cc
        u = mp.mpf(1)
        vals = {}
        for j in range(1, m_hi + 1):
            u = 2 * z * u + 1
            z = z * z + cc
            if j == m_lo:
                vals["lo"] = (z, u)
        zl, ul = vals["lo"]
        return z - zl, u - ul

    with mp.workprec(prec + 16):
        lo, hi = mp.mpf(lo), mp.mpf(hi)
        glo = g_and_dg(lo)[0]
        ghi = g_and_dg(hi)[0]
        if glo == 0:
            return +lo
        if ghi == 0:
            return +hi
        if (glo > 0) == (ghi > 0):
            raise ValueError("seed does not bracket a sign change of g")
        x = (lo + hi) / 2
        tol = mp.ldexp(1, -(prec - 8))
        for _ in range(200):
            gx, dgx = g_and_dg(x)
            if gx == 0:
                break
            if dgx != 0:
                xn = x - gx / dgx
            else:
                xn = mp.mpf("nan")
            if not (lo < xn < hi):
                if (gx > 0) == (glo > 0):
                    lo = x
                else:
                    hi = x
                xn = (lo + hi) / 2
            else:
                if (gx > 0) == (glo > 0):
                    lo = x
                else:
                    hi = x
            if abs(xn - x) <= tol * max(1, abs(xn)):
                x = xn
                break
            x = xn
        with mp.workprec(prec):
            return +x
