"""Green functions, Boettcher coordinates, external rays, equipotentials,
puzzle-piece boundaries and Julia images.

All rendering numerics run in float64/complex128: the target tolerances
(1e-6 landings, 1e-10 functional equations) sit far above double rounding,
and ray points are the output of locally convergent Newton solves.  Angles
are exact Fractions so doubling never drifts.

Rays are traced by the potential-halving ladder: the point at potential v
on the ray of angle theta satisfies f^k(z) = w, where w is the big-modulus
Boettcher preimage of exp(2^k v + 2 pi i 2^k theta); each halving is split
into sub-steps and solved by Newton seeded from the previous point.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple


class OutsideDomainError(ValueError):
    """Point outside the Boettcher domain (or escaping window)."""


def ray_angle(numerator: int, denominator: int) -> Fraction:
    """Exact angle p/q mod 1 with q of the form 2^k or 3*2^k."""
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    q = denominator
    while q % 2 == 0:
        q //= 2
    if q not in (1, 3):
        raise ValueError(
            f"denominator {denominator} is not of the form 2^k or 3*2^k"
        )
    return Fraction(numerator, denominator) % 1


def double_angle(theta: Fraction) -> Fraction:
    return (2 * theta) % 1


@dataclass
class Polyline:
    points: List[Tuple[float, float]]
    kind: str  # ray | equipotential | boundary-ray | boundary-arc
    meta: dict = field(default_factory=dict)
    landing_estimate: Optional[Tuple[float, float]] = None
    flags: List[str] = field(default_factory=list)

    def as_json_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "points": [[x, y] for x, y in self.points],
        }
        out.update(self.meta)
        if self.landing_estimate is not None:
            out["landing_estimate"] = list(self.landing_estimate)
        if self.flags:
            out["flags"] = self.flags
        return out


def green_function(
    c, z, max_iter: int = 2048, big: float = 1e8
) -> Tuple[float, Optional[str]]:
    """Escape-rate potential G_c(z); (0.0, "boundary-unresolved") when the
    orbit neither escapes nor provably stays bounded within the budget."""
    c = complex(c)
    z = complex(z)
    for n_it in range(max_iter):
        az = abs(z)
        if az > big:
            # G = 2^-n log|z_n| + sum_{j >= n} 2^-(j+1) log|1 + c/z_j^2|
            g = math.log(az)
            corr = 0.0
            w = z
            for j in range(2):
                corr += 0.5 ** (j + 1) * math.log(abs(1 + c / (w * w)))
                w = w * w + c
            return (g + corr) * 0.5**n_it, None
        z = z * z + c
    return 0.0, "boundary-unresolved"


def _bottcher_big(c: complex, w: complex, terms: int = 48) -> complex:
    """phi_c(w) by the product formula, valid for |w| well above the Julia
    set (each factor principal)."""
    acc = w
    z = w
    for j in range(terms):
        fac = 1 + c / (z * z)
        acc *= fac ** (0.5 ** (j + 1))
        z = z * z + c
        if abs(z) > 1e120:
            break
    return acc


def _bottcher_big_inverse(c: complex, target: complex) -> complex:
    """Solve phi_c(w) = target at large |target| by fixed-point correction."""
    w = target
    for _ in range(12):
        val = _bottcher_big(c, w)
        w = w * target / val
        if abs(val / target - 1) < 1e-15:
            break
    return w


def bottcher(c, z) -> complex:
    """Boettcher coordinate phi_c(z) for z with G_c(z) > G_c(0).

    Iterates to large modulus, applies the product formula there, and pulls
    the value back by square roots whose branch is chosen to track the
    orbit (the root closer to the orbit point)."""
    c = complex(c)
    z = complex(z)
    gz, flag_z = green_function(c, z)
    g0, _ = green_function(c, 0)
    if flag_z is not None or gz <= g0:
        raise OutsideDomainError("z is outside the Boettcher domain U_c")
    big = max(1e6, 4 * abs(c) + 16)
    orbit = [z]
    while abs(orbit[-1]) <= big:
        orbit.append(orbit[-1] * orbit[-1] + c)
        if len(orbit) > 4096:
            raise OutsideDomainError("orbit did not reach the asymptotic regime")
    w = _bottcher_big(c, orbit[-1])
    for zj in reversed(orbit[:-1]):
        r = cmath.sqrt(w)
        w = r if abs(r - zj) <= abs(-r - zj) else -r
    return w


def _ladder_points(
    c: complex,
    theta: Fraction,
    g_min: float,
    g_work: float,
    substeps: int,
    newton_tol: float,
    param_plane: bool,
) -> Tuple[List[Tuple[complex, float]], List[str]]:
    """Shared ray-descent ladder.

    In the dynamical plane the unknown is the point z with f^k(z) = w_k; in
    the parameter plane the unknown is the parameter c with f_c^k(c) = w_k
    (so the ray is traced for the Mandelbrot potential Phi).
    Returns [(point, potential)] from high to low potential, with flags.
    """
    flags: List[str] = []
    pts: List[Tuple[complex, float]] = []

    def f_iter(zz, cc, k):
        val = zz
        deriv = 1.0 + 0j
        for _ in range(k):
            deriv = 2 * val * deriv
            val = val * val + cc
        return val, deriv

    def f_iter_param(cc, k):
        # z_{j+1} = z_j^2 + c with z_0 = c; derivative d z_k / d c
        val = cc
        deriv = 1.0 + 0j
        for _ in range(k):
            deriv = 2 * val * deriv + 1
            val = val * val + cc
        return val, deriv

    # stage 0: the point at potential g_work on the straight asymptote
    ang = theta
    z = cmath.exp(g_work + 2j * math.pi * float(ang))
    cc = z if param_plane else c
    z = _bottcher_big_inverse(cc, z)
    pts.append((z, g_work))
    v = g_work
    k = 0
    ang_k = theta
    while v > g_min:
        k += 1
        ang_k = double_angle(ang_k)
        # during stage k the potential descends from g_work 2^-(k-1) to
        # g_work 2^-k; targets live at modulus e^{g_work}..e^{2 g_work}
        for s_i in range(1, substeps + 1):
            v = g_work * 0.5 ** (k - 1) * 0.5 ** (s_i / substeps)
            if v < g_min:
                v = g_min
            big_pot = v * (2.0**k)
            tgt_angle = 2j * math.pi * float(ang_k)
            cc = z if param_plane else c
            w = _bottcher_big_inverse(cc, cmath.exp(big_pot + tgt_angle))
            ok = False
            zn = z
            for _ in range(60):
                if param_plane:
                    val, deriv = f_iter_param(zn, k)
                    w = _bottcher_big_inverse(zn, cmath.exp(big_pot + tgt_angle))
                else:
                    val, deriv = f_iter(zn, c, k)
                h = val - w
                # accept at the prescribed residual or at the float noise
                # floor of the deep iterate (which still pins zn to ~eps)
                noise_floor = 64 * 2.3e-16 * abs(deriv) * max(1.0, abs(zn))
                if abs(h) <= max(newton_tol * max(1.0, abs(w)), noise_floor):
                    ok = True
                    break
                if deriv == 0:
                    break
                zn = zn - h / deriv
            if not ok:
                flags.append("stalled")
                return pts, flags
            z = zn
            pts.append((z, v))
            if v <= g_min:
                break
    return pts, flags


def _aitken_landing(pts: List[Tuple[complex, float]]) -> Optional[complex]:
    if len(pts) < 3:
        return None
    z2, z1, z0 = pts[-3][0], pts[-2][0], pts[-1][0]
    d1, d0 = z1 - z2, z0 - z1
    denom = d0 - d1
    if denom == 0:
        return z0
    return z0 - d0 * d0 / denom


def trace_ray_dynamical(
    c,
    angle,
    g_min: float = 1e-8,
    g_work: float = math.log(1e6),
    substeps: int = 4,
    newton_tol: float = 1e-12,
    g_max: Optional[float] = None,
) -> Polyline:
    """External ray R_c(angle) traced down to potential g_min.

    The polyline descends the potential ladder; ``landing_estimate`` is the
    Richardson/Aitken extrapolation of the last three points (flagged,
    never asserted exact).  ``g_max`` clips the emitted points to
    potentials at most g_max (the full ladder is still traced)."""
    theta = angle if isinstance(angle, Fraction) else Fraction(angle)
    c = complex(c)
    raw, flags = _ladder_points(
        c, theta, g_min, g_work, substeps, newton_tol, param_plane=False
    )
    pts = [(p, v) for p, v in raw if g_max is None or v <= g_max]
    landing = _aitken_landing(pts if pts else raw)
    return Polyline(
        points=[(p.real, p.imag) for p, _ in pts],
        kind="ray",
        meta={
            "angle": [theta.numerator, theta.denominator],
            "potentials": [v for _, v in pts],
            "c": [c.real, c.imag],
        },
        landing_estimate=None if landing is None else (landing.real, landing.imag),
        flags=flags,
    )


def trace_ray_parameter(
    angle,
    g_min: float = 1e-6,
    g_work: float = math.log(1e6),
    substeps: int = 4,
    newton_tol: float = 1e-10,
) -> Polyline:
    """External ray of the Mandelbrot set, traced through Phi(c) = phi_c(c).

    Newton runs on c -> f_c^k(c) - w with the forward-mode derivative; the
    target w is refreshed from the current parameter (its c-dependence is
    the finite-difference-small correction)."""
    theta = angle if isinstance(angle, Fraction) else Fraction(angle)
    raw, flags = _ladder_points(
        0j, theta, g_min, g_work, substeps, newton_tol, param_plane=True
    )
    landing = _aitken_landing(raw)
    return Polyline(
        points=[(p.real, p.imag) for p, _ in raw],
        kind="ray",
        meta={
            "plane": "parameter",
            "angle": [theta.numerator, theta.denominator],
            "potentials": [v for _, v in raw],
        },
        landing_estimate=None if landing is None else (landing.real, landing.imag),
        flags=flags,
    )


def equipotential(
    c, level: float, samples: int = 256, g_work: float = math.log(1e6),
    newton_tol: float = 1e-12,
) -> Polyline:
    """The level set G_c = level, sampled at ``samples`` angles."""
    if level <= 0:
        raise ValueError("level must be positive")
    c = complex(c)
    k = max(0, math.ceil(math.log2(g_work / level)))
    big_pot = level * 2.0**k
    pts: List[complex] = []
    flags: List[str] = []
    z = None
    for i in range(samples + 1):
        theta = Fraction(i % samples, samples)
        ang_k = (2**k * theta) % 1
        w = _bottcher_big_inverse(c, cmath.exp(big_pot + 2j * math.pi * float(ang_k)))
        if z is None:
            z = _bottcher_big_inverse(c, cmath.exp(level + 2j * math.pi * float(theta)))
        ok = False
        zn = z
        for _ in range(80):
            val = zn
            deriv = 1 + 0j
            for _ in range(k):
                deriv = 2 * val * deriv
                val = val * val + c
            h = val - w
            noise_floor = 64 * 2.3e-16 * abs(deriv) * max(1.0, abs(zn))
            if abs(h) <= max(newton_tol * max(1.0, abs(w)), noise_floor):
                ok = True
                break
            if deriv == 0:
                break
            zn = zn - h / deriv
        if not ok:
            flags.append("stalled")
            break
        z = zn
        pts.append(z)
    return Polyline(
        points=[(p.real, p.imag) for p in pts],
        kind="equipotential",
        meta={"level": level, "c": [c.real, c.imag]},
        flags=flags,
    )


def equipotential_parameter(
    level: float, samples: int = 256, newton_tol: float = 1e-10
) -> Polyline:
    """The Mandelbrot equipotential |Phi| = e^level."""
    if level <= 0:
        raise ValueError("level must be positive")
    pts: List[complex] = []
    flags: List[str] = []
    for i in range(samples + 1):
        theta = Fraction(i % samples, samples)
        raw, fl = _ladder_points(
            0j, theta, level, math.log(1e6), 4, newton_tol, param_plane=True
        )
        if fl:
            flags.extend(fl)
            break
        pts.append(raw[-1][0])
    return Polyline(
        points=[(p.real, p.imag) for p in pts],
        kind="equipotential",
        meta={"plane": "parameter", "level": level},
        flags=flags,
    )


def angle_catalog(depth: int) -> List[Fraction]:
    """J_depth: angles in [1/3, 2/3] whose 2^depth-fold doubling lands on
    {1/3, 2/3}."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    out = set()
    scale = 2**depth
    for base in (Fraction(1, 3), Fraction(2, 3)):
        k = 0
        while True:
            t = (base + k) / scale
            if t > Fraction(2, 3):
                break
            if t >= Fraction(1, 3):
                out.add(t)
            k += 1
    return sorted(out)


def _t_pair(n: int) -> Tuple[Fraction, Fraction]:
    """Angles of the rays landing at a_n: (3 2^n -/+ 1) / (3 2^(n+1))."""
    den = 3 * 2 ** (n + 1)
    return Fraction(3 * 2**n - 1, den), Fraction(3 * 2**n + 1, den)


def puzzle_angles(depth: int, which: str) -> List[Fraction]:
    """Bounding ray angles for the requested puzzle piece."""
    if which == "center":
        if depth < 1:
            raise ValueError("center pieces start at depth 1")
        if depth == 1:
            return sorted(
                [Fraction(1, 3), Fraction(2, 3), Fraction(1, 6), Fraction(5, 6)]
            )
        a, b = _t_pair(depth - 2)
        return sorted(
            [a / 2, (a + 1) / 2, b / 2, (b + 1) / 2]
        )
    if which == "minus_beta":
        if depth < 1:
            raise ValueError("minus_beta pieces start at depth 1")
        a, b = _t_pair(depth - 1)
        return sorted([a, b])
    if which == "beta":
        if depth < 1:
            raise ValueError("beta pieces start at depth 1")
        u = Fraction(1, 3 * 2**depth)
        return sorted([u, 1 - u])
    raise ValueError(f"unknown piece {which!r}; supported: center, beta, minus_beta")


def puzzle_boundary(
    c, depth: int, which: str = "center", g_min: float = 1e-8, arc_samples: int = 64
) -> List[Polyline]:
    """Bounding rays (clipped at the piece's equipotential 2^-depth) and the
    equipotential arcs of the requested puzzle piece."""
    if depth > 12:
        raise ValueError("depth must be <= 12 (exact angle denominators)")
    c = complex(c)
    angles = puzzle_angles(depth, which)
    level = 2.0**-depth
    out = []
    for a in angles:
        pl = trace_ray_dynamical(c, a, g_min=g_min, g_max=level)
        pl.kind = "boundary-ray"
        pl.meta["piece"] = which
        pl.meta["depth"] = depth
        out.append(pl)
    # equipotential arcs between the bounding angles
    if which == "center":
        arcs = [(angles[0], angles[1]), (angles[2], angles[3])]
    elif which == "minus_beta":
        arcs = [(angles[0], angles[1])]
    else:  # beta: arc through angle 0
        arcs = [(angles[1], angles[0] + 1)]
    for a0, a1 in arcs:
        pts = []
        for i in range(arc_samples + 1):
            th = Fraction(a0) + (Fraction(a1) - Fraction(a0)) * Fraction(i, arc_samples)
            pl = _equipotential_point(c, level, th)
            pts.append(pl)
        out.append(
            Polyline(
                points=[(p.real, p.imag) for p in pts],
                kind="boundary-arc",
                meta={
                    "piece": which,
                    "depth": depth,
                    "level": level,
                    "arc": [float(a0), float(a1)],
                },
            )
        )
    return out


def _equipotential_point(c: complex, level: float, theta: Fraction) -> complex:
    """Single point at potential ``level`` and angle ``theta``."""
    raw, _flags = _ladder_points(
        c, theta % 1, level, math.log(1e6), 4, 1e-12, param_plane=False
    )
    return raw[-1][0]


def julia_image(
    c,
    window: Tuple[float, float, float, float] = (-2.2, 2.2, -1.65, 1.65),
    resolution: Tuple[int, int] = (640, 480),
    max_iter: int = 256,
) -> bytes:
    """Escape-time rendering as a binary PGM (P5), one byte per pixel.

    Non-escaping pixels are black; escaping pixels are shaded by the escape
    iteration count."""
    import numpy as np

    xmin, xmax, ymin, ymax = window
    w, h = resolution
    xs = np.linspace(xmin, xmax, w)
    ys = np.linspace(ymax, ymin, h)  # top row first
    zx, zy = np.meshgrid(xs, ys)
    z = zx + 1j * zy
    cc = complex(c)
    counts = np.zeros(z.shape, dtype=np.int32)
    alive = np.ones(z.shape, dtype=bool)
    r = max(4.0, abs(cc) + 2.0)
    for it in range(1, max_iter + 1):
        z[alive] = z[alive] * z[alive] + cc
        escaped = alive & (np.abs(z) > r)
        counts[escaped] = it
        alive &= ~escaped
    shade = np.zeros(z.shape, dtype=np.uint8)
    esc = counts > 0
    shade[esc] = (55 + (200.0 * counts[esc]) / max_iter).astype(np.uint8)
    header = f"P5\n{w} {h}\n255\n".encode()
    return header + shade.tobytes()
