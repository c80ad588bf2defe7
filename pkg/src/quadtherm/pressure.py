"""Geometric pressure estimators and phase-transition diagnostics.

The tree estimator enumerates preimages of the critical point by backward
square roots and accumulates log-sum-exp of -t log|Df^m| over the leaves;
error bars come from the spread over the last three depths, doubled, since
the defining limsup carries no rate.  Trees are evaluated in float64/complex128
(numpy): depth truncation dominates rounding by many orders of magnitude at
the depths this estimator can reach.

The Poincare and postcritical series, the critical line, and the discrete
Legendre transform provide the independent routes the transition analysis
compares against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from mpmath import mp

from .core import _as_c, iterate
from .precision import DEFAULT_PREC

_LOG2 = math.log(2.0)


@dataclass
class PressureCurve:
    t_grid: List[float]
    estimates: List[float]
    error_bars: List[float]
    mode: str
    depth: int

    def line_values(self, fn: Callable[[float], float]) -> List[float]:
        return [fn(t) for t in self.t_grid]


@dataclass
class SeriesReport:
    """Partial sums of a positive series in log domain with a tail verdict.

    ``verdict``: converges_leq when a geometric tail certifies convergence
    (and, with a threshold, partial+tail <= threshold); diverges_geq when
    the partial sum already exceeds the threshold or the terms do not decay;
    inconclusive otherwise.
    """

    terms_computed: int
    log_partial_sum: float
    log_tail_bound: Optional[float]
    verdict: str
    threshold: Optional[float]
    last_ratio: Optional[float]


def _pairwise_logsumexp(arr: np.ndarray) -> float:
    """Log-sum-exp with a fixed pairwise (binary tree) reduction order."""
    if arr.size == 0:
        return float("-inf")
    x = np.asarray(arr, dtype=np.float64)
    while x.size > 1:
        if x.size % 2 == 1:
            x = np.append(x, float("-inf"))
        x = np.logaddexp(x[0::2], x[1::2])
    return float(x[0])


def _combine_blocks(blocks: Sequence[float]) -> float:
    out = float("-inf")
    for b in blocks:
        out = np.logaddexp(out, b)
    return float(out)


class _TreeLevels:
    """Per-depth log-weight arrays of the preimage tree of the critical point.

    Nodes at depth j are the points of f^{-j}(0); each carries
    logd = log|Df^j| along its forward path to 0.  Real mode keeps only the
    preimages inside the invariant interval [c, c^2+c].
    """

    def __init__(self, c: complex, depth: int, mode: str, crit_tol: float = 1e-12):
        self.c = complex(c)
        self.depth = depth
        self.mode = mode
        self.crit_tol = crit_tol
        self.flagged_nodes = 0
        self.level_logw: List[np.ndarray] = []  # -log|Df^j| free of t
        self._build()

    def _build(self):
        c = self.c
        if self.mode == "complex":
            z = np.array([0j], dtype=np.complex128)
            logd = np.array([0.0])
            self.level_logw.append(logd.copy())
            for _ in range(self.depth):
                w = np.sqrt(z - c)
                z = np.concatenate([w, -w])
                logd2 = np.concatenate([logd, logd])
                absz = np.abs(z)
                hits = absz <= self.crit_tol
                if hits.any():
                    if (absz == 0).any():
                        raise ValueError("critical point is periodic: exact preimage hit")
                    self.flagged_nodes += int(hits.sum())
                    keep = ~hits
                    z, logd2, absz = z[keep], logd2[keep], absz[keep]
                logd = logd2 + np.log(2.0 * absz)
                self.level_logw.append(logd.copy())
        elif self.mode == "real":
            cr = c.real
            hi = cr * cr + cr  # right end of the invariant interval
            pad = 16 * np.finfo(float).eps * max(1.0, abs(hi))
            x = np.array([0.0])
            logd = np.array([0.0])
            self.level_logw.append(logd.copy())
            for _ in range(self.depth):
                arg = x - cr
                ok = arg >= 0
                r = np.sqrt(arg[ok])
                ld = logd[ok]
                xs = np.concatenate([r, -r])
                lds = np.concatenate([ld, ld])
                keep = xs <= hi + pad
                xs, lds = xs[keep], lds[keep]
                absx = np.abs(xs)
                hits = absx <= self.crit_tol
                if hits.any():
                    if (absx == 0).any():
                        raise ValueError("critical point is periodic: exact preimage hit")
                    self.flagged_nodes += int(hits.sum())
                    keep2 = ~hits
                    xs, lds, absx = xs[keep2], lds[keep2], absx[keep2]
                logd = lds + np.log(2.0 * absx)
                x = xs
                self.level_logw.append(logd.copy())
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    def leaf_count(self, depth: int) -> int:
        return self.level_logw[depth].size

    def level_lse(self, depth: int, t: float, block_depth: int = 8) -> float:
        """log sum over f^{-depth}(0) of |Df^depth|^{-t}, deterministic
        block-partitioned pairwise reduction (blocks = depth-8 subtrees)."""
        arr = -t * self.level_logw[depth]
        nblocks = 1 << min(block_depth, max(0, depth))
        size = arr.size
        if size == 0:
            return float("-inf")
        step = max(1, math.ceil(size / nblocks))
        blocks = [
            _pairwise_logsumexp(arr[i : i + step]) for i in range(0, size, step)
        ]
        return _combine_blocks(blocks)


def build_tree(c, m: int, mode: str = "complex", crit_tol: float = 1e-12) -> _TreeLevels:
    cval = _as_c(c)
    return _TreeLevels(complex(cval), m, mode, crit_tol)


def tree_pressure(
    c,
    t,
    m: int,
    mode: str = "complex",
    tree: Optional[_TreeLevels] = None,
    workers: int = 1,
) -> Tuple[float, float]:
    """Pressure estimate (1/m) log sum_{f^{-m}(0)} |Df^m|^{-t} and an error
    bar from the spread over depths m-2, m-1, m, doubled.

    ``workers`` > 1 partitions the leaf array into depth-8 subtree blocks
    evaluated in the same fixed reduction order, so results are identical to
    the serial evaluation.
    """
    if m < 3:
        raise ValueError("m must be >= 3 for the depth spread")
    t = float(t)
    if tree is None:
        tree = build_tree(c, m, mode)
    ests = [tree.level_lse(d, t) / d for d in (m - 2, m - 1, m)]
    flag_pad = 0.0
    if tree.flagged_nodes:
        flag_pad = abs(t) * abs(math.log(tree.crit_tol)) / m
    err = 2.0 * (max(ests) - min(ests)) + flag_pad
    return ests[-1], err


def tree_pressure_curve(
    c, t_grid: Sequence[float], m: int, mode: str = "complex"
) -> PressureCurve:
    """Pressure curve over a t grid sharing a single tree enumeration."""
    tree = build_tree(c, m, mode)
    estimates, errors = [], []
    for t in t_grid:
        e, b = tree_pressure(c, t, m, mode, tree=tree)
        estimates.append(e)
        errors.append(b)
    return PressureCurve(
        t_grid=[float(t) for t in t_grid],
        estimates=estimates,
        error_bars=errors,
        mode=mode,
        depth=m,
    )


def _series_verdict(
    log_terms: List[float],
    threshold: Optional[float],
    ratio_window: int = 5,
    margin: float = 1.0 / 16.0,
    certify_nondecay: bool = False,
    nondecay_eps: float = 1e-12,
) -> Tuple[str, Optional[float], Optional[float], float]:
    """Shared tail logic: returns (verdict, log_tail, last_ratio, log_partial).

    A geometric tail is claimed only when the last-terms ratio sits below
    1 - margin.  Divergence is claimed when the ratio exceeds 1 + margin,
    when the partial sum already clears the threshold (positive terms), or,
    with ``certify_nondecay`` (terms computed far beyond float precision),
    when the window terms are nondecreasing within ``nondecay_eps``.
    """
    log_partial = _combine_blocks(log_terms)
    window = log_terms[-ratio_window:]
    ratios = [math.exp(b - a) for a, b in zip(window[:-1], window[1:])]
    last_ratio = max(ratios) if ratios else None
    log_tail = None
    verdict = "inconclusive"
    if last_ratio is not None and last_ratio < 1.0 - margin:
        r = last_ratio
        log_tail = log_terms[-1] + math.log(r / (1.0 - r))
        total = float(np.logaddexp(log_partial, log_tail))
        if threshold is None or total <= math.log(threshold) - 1e-12:
            verdict = "converges_leq"
    elif last_ratio is not None:
        if last_ratio > 1.0 + margin:
            verdict = "diverges_geq"
        elif certify_nondecay and all(
            b >= a - nondecay_eps for a, b in zip(window[:-1], window[1:])
        ):
            verdict = "diverges_geq"
    if (
        threshold is not None
        and verdict != "diverges_geq"
        and log_partial >= math.log(threshold)
    ):
        # positive terms: a partial sum above the threshold is conclusive
        verdict = "diverges_geq"
    return verdict, log_tail, last_ratio, log_partial


def poincare_series(c, t, p, J: int, mode: str = "complex") -> SeriesReport:
    """Partial sums of sum_j exp(-j p) sum_{y in f^{-j}(0)} |Df^j(y)|^{-t}.

    The verdict reflects the series' own convergence: the last-terms ratio
    trend certifies a geometric tail or a non-decaying term sequence.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    t, p = float(t), float(p)
    tree = build_tree(c, J, mode)
    log_terms = [-j * p + tree.level_lse(j, t) for j in range(1, J + 1)]
    verdict, log_tail, last_ratio, log_partial = _series_verdict(log_terms, None)
    return SeriesReport(
        terms_computed=J,
        log_partial_sum=log_partial,
        log_tail_bound=log_tail,
        verdict=verdict,
        threshold=None,
        last_ratio=last_ratio,
    )


def postcritical_series(
    c,
    n: int,
    t,
    p,
    K: int,
    threshold=None,
    prec: int = DEFAULT_PREC,
) -> SeriesReport:
    """Partial sums of sum_k exp(-(n+3k) p) |Df^{n+3k}(c)|^{-t/2} in log
    domain, with a geometric tail bound from the last-terms ratio and an
    optional threshold comparison."""
    if K < 0:
        raise ValueError("K must be >= 0")
    cval = _as_c(c)
    with mp.workprec(prec):
        t_m, p_m = mp.mpf(t), mp.mpf(p)
        orb = iterate(cval, mp.mpf(cval), n + 3 * K, prec)
        if orb.critical_hit_at is not None:
            raise ValueError(
                f"critical hit in orbit at index {orb.critical_hit_at}"
            )
        log_terms = []
        for k in range(K + 1):
            j = n + 3 * k
            log_terms.append(float(-j * p_m - (t_m / 2) * orb.log_abs_derivative[j]))
    verdict, log_tail, last_ratio, log_partial = _series_verdict(
        log_terms,
        None if threshold is None else float(threshold),
        certify_nondecay=True,
    )
    return SeriesReport(
        terms_computed=K + 1,
        log_partial_sum=log_partial,
        log_tail_bound=log_tail,
        verdict=verdict,
        threshold=None if threshold is None else float(threshold),
        last_ratio=last_ratio,
    )


def critical_line_value(t, chi):
    """The linear lower bound -t chi/2 for the pressure."""
    return -mp.mpf(t) * mp.mpf(chi) / 2


def periodic_orbit_line(c, n: int, K: int, prec: int = DEFAULT_PREC):
    """Periodic orbits of period n+3k+3 in the level-k special branches,
    with their Lyapunov exponents, for k = 0..K.  Levels whose special
    branch is not found are omitted (with a diagnostic entry)."""
    from .induced import RefinementError, periodic_point_in_branch, special_branch

    out = []
    for k in range(K + 1):
        try:
            br = special_branch(c, n, k, prec=prec)
            x, lyap, resid = periodic_point_in_branch(c, br, prec=prec)
        except (RefinementError, ValueError) as exc:
            out.append(
                {"k": k, "period": n + 3 * k + 3, "error": str(exc)}
            )
            continue
        out.append(
            {
                "k": k,
                "period": n + 3 * k + 3,
                "point": x,
                "lyapunov": lyap,
                "residual": resid,
            }
        )
    return out


@dataclass
class TransitionReport:
    t_star: Optional[float]
    slope_gap: Optional[float]
    verdict: str  # detected | inconclusive
    left_slope: Optional[float] = None
    right_slope: Optional[float] = None


def _fit_line(ts: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    n = len(ts)
    sx, sy = sum(ts), sum(ys)
    sxx = sum(x * x for x in ts)
    sxy = sum(x * y for x, y in zip(ts, ys))
    denom = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / denom
    intercept = (sy - slope * sx) / n
    return slope, intercept


def detect_transition(curve: PressureCurve, line) -> TransitionReport:
    """Locate the first point where the curve leaves the given line branch.

    ``line`` is a callable t -> value (or a sequence matching the grid).
    The on-line regime is where |estimate - line| stays within the error
    bar; the off-line regime is fitted by least squares and extrapolated
    back to the crossing.  Detected requires the slope gap to exceed the
    regime slope noise (2 max error / regime extent, summed for both
    regimes) and twice the largest adjacent error bar over the grid step.
    """
    if len(curve.t_grid) < 20:
        raise ValueError("curve must have at least 20 grid points")
    ts = list(curve.t_grid)
    if callable(line):
        lv = [float(line(t)) for t in ts]
    else:
        lv = [float(v) for v in line]
    d = [e - l for e, l in zip(curve.estimates, lv)]
    err = list(curve.error_bars)
    # On-line band: 3x the reported bar plus a 5% relative band against the
    # largest departure, since spread-based bars miss the finite-depth bias
    # hump near the kink.
    dmax = max(abs(di) for di in d)
    band = [max(3.0 * ei, 0.05 * dmax, 1e-15) for ei in err]
    on = [abs(di) <= bi for di, bi in zip(d, band)]
    if all(on) or not any(on):
        return TransitionReport(None, None, "inconclusive")
    split = None
    for i in range(len(ts) - 1):
        if on[i] and not any(on[i + 1 :]):
            split = i
            break
    if split is None:
        idx = len(ts) - 1
        while idx >= 0 and not on[idx]:
            idx -= 1
        if idx < 0 or idx >= len(ts) - 2:
            return TransitionReport(None, None, "inconclusive")
        split = idx
    left_ts, left_ys = ts[: split + 1], curve.estimates[: split + 1]
    off_ts, off_ys = ts[split + 1 :], curve.estimates[split + 1 :]
    if len(left_ts) < 2 or len(off_ts) < 2:
        return TransitionReport(None, None, "inconclusive")
    # Fit the off-line branch on the quarter of the grid farthest from the
    # split, where the kink bias has decayed.
    span = ts[-1] - ts[0]
    far = [i for i, t in enumerate(off_ts) if t >= ts[-1] - span / 4]
    if len(far) < 3:
        far = list(range(len(off_ts)))[-3:]
    right_ts = [off_ts[i] for i in far]
    right_ys = [off_ys[i] for i in far]
    ls, _ = _fit_line(left_ts, left_ys)
    rs, ri = _fit_line(right_ts, right_ys)
    # crossing of the off-line fit with the line (fit the line values too,
    # so an affine line needs no special casing)
    lls, lli = _fit_line(ts, lv)
    if abs(rs - lls) < 1e-15:
        return TransitionReport(None, None, "inconclusive")
    t_star = (lli - ri) / (rs - lls)
    slope_gap = abs(rs - ls)
    extent_l = max(left_ts) - min(left_ts)
    extent_r = max(right_ts) - min(right_ts)
    noise = 0.0
    if extent_l > 0:
        noise += 2.0 * max(err[: split + 1]) / extent_l
    if extent_r > 0:
        noise += 2.0 * max(err[split + 1 :]) / extent_r
    adjacent = 2.0 * max(max(err[i], err[i + 1]) for i in range(len(err) - 1))
    detected = slope_gap > noise and slope_gap > adjacent
    verdict = "detected" if detected else "inconclusive"
    return TransitionReport(
        t_star=float(t_star),
        slope_gap=float(slope_gap),
        verdict=verdict,
        left_slope=float(ls),
        right_slope=float(rs),
    )


@dataclass(frozen=True)
class LegendrePoint:
    lam: float
    value: float
    interior: bool  # infimum attained away from the grid boundary


def legendre_transform(curve: PressureCurve, lambda_grid: Sequence[float]) -> List[LegendrePoint]:
    """Discrete Legendre transform inf_t (curve(t) + t*lambda) over the grid.

    No smoothing; ``interior`` is False when the infimum sits on the grid
    boundary, which signals divergence to -inf off the sampled window."""
    out = []
    ts = curve.t_grid
    es = curve.estimates
    for lam in lambda_grid:
        vals = [e + t * lam for t, e in zip(ts, es)]
        vmin = min(vals)
        scale = max(1.0, abs(vmin))
        argmins = [i for i, v in enumerate(vals) if v - vmin <= 1e-13 * scale]
        out.append(
            LegendrePoint(
                lam=float(lam),
                value=float(vmin),
                interior=any(0 < i < len(vals) - 1 for i in argmins),
            )
        )
    return out
