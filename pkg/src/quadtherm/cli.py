"""Command line entry point.

Subcommands: pressure, series, find-param, cantor, induced, bowen,
multipliers, render, verify-appendix, reproduce.  Outputs are CSV (with a
header row), JSON (UTF-8, sorted keys), or binary PGM; every CSV/JSON
output embeds the fully resolved configuration so runs are reproducible
byte for byte.

Exit codes: 0 success, 2 honest inconclusiveness (series or transition
verdicts, undecided eta checks), 1 errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

from mpmath import mp

from . import cantor, induced, param_search, pressure, render
from .core import (
    Parameter,
    cheb_pressure_reference,
    multiplier_c_derivative,
    period3_orbits,
)
from .precision import DEFAULT_PREC, PREC_ENV_VAR


@dataclass
class RunConfig:
    """Resolved run configuration.

    Precedence: command line flags override the config file, which
    overrides the QUADTHERM_PRECISION_BITS environment variable, which
    overrides the built-in default."""

    precision_bits: int = DEFAULT_PREC
    tree_depth: int = 18
    m_max: int = 12
    epochs: int = 6
    tol: float = 1e-10
    seed: int = 0
    out: Optional[str] = None

    def validate(self):
        if self.precision_bits < 53:
            raise ValueError("precision_bits must be >= 53")
        for name in ("tree_depth", "m_max", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    env = os.environ.get(PREC_ENV_VAR)
    if env:
        cfg.precision_bits = int(env)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for key in ("precision_bits", "tree_depth", "m_max", "epochs", "tol", "seed", "out"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            setattr(cfg, key, val)
    cfg.validate()
    return cfg


def _mpf_str(x, dps: int = 30) -> str:
    return mp.nstr(mp.mpf(x), dps, strip_zeros=False)


def _emit(text_or_bytes, out: Optional[str]):
    if out is None or out == "-":
        if isinstance(text_or_bytes, bytes):
            sys.stdout.buffer.write(text_or_bytes)
        else:
            sys.stdout.write(text_or_bytes)
        return
    mode = "wb" if isinstance(text_or_bytes, bytes) else "w"
    with open(out, mode) as fh:
        fh.write(text_or_bytes)


def _json_out(payload: dict, cfg: RunConfig) -> str:
    payload = dict(payload)
    payload["config"] = asdict(cfg)
    return json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n"


def _csv_out(header, rows, cfg: RunConfig) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"# config {json.dumps(asdict(cfg), sort_keys=True)}"])
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _parse_angle(text: str) -> Fraction:
    if "/" in text:
        num, den = text.split("/", 1)
        return render.ray_angle(int(num), int(den))
    return render.ray_angle(int(text), 1)


def cmd_pressure(args, cfg: RunConfig) -> int:
    with mp.workprec(cfg.precision_bits):
        if args.t is not None:
            grid = [float(args.t)]
        else:
            n_pts = args.grid
            grid = [
                args.t_min + (args.t_max - args.t_min) * i / (n_pts - 1)
                for i in range(n_pts)
            ]
        curve = pressure.tree_pressure_curve(
            mp.mpf(args.c), grid, cfg.tree_depth, args.mode
        )
    rows = [
        (repr(t), repr(e), repr(b))
        for t, e, b in zip(curve.t_grid, curve.estimates, curve.error_bars)
    ]
    _emit(_csv_out(("t", "estimate", "error"), rows, cfg), cfg.out)
    return 0


def cmd_series(args, cfg: RunConfig) -> int:
    if args.kind == "post":
        rep = pressure.postcritical_series(
            mp.mpf(args.c),
            args.n,
            args.t,
            args.p,
            args.K,
            threshold=args.threshold,
            prec=cfg.precision_bits,
        )
    else:
        rep = pressure.poincare_series(mp.mpf(args.c), args.t, args.p, args.J)
    payload = {
        "kind": args.kind,
        "terms_computed": rep.terms_computed,
        "log_partial_sum": rep.log_partial_sum,
        "log_tail_bound": rep.log_tail_bound,
        "verdict": rep.verdict,
        "threshold": rep.threshold,
        "last_ratio": rep.last_ratio,
    }
    _emit(_json_out(payload, cfg), cfg.out)
    return 2 if rep.verdict == "inconclusive" else 0


def cmd_find_param(args, cfg: RunConfig) -> int:
    ci = param_search.find_parameter(
        args.n, args.prefix, mp.mpf(args.tol if args.tol else cfg.tol),
        prec=cfg.precision_bits,
    )
    rep = param_search.kn_membership_with_prefix(
        ci.midpoint, args.n, args.prefix, prec=ci.prec
    )
    payload = {
        "lo": _mpf_str(ci.lo),
        "hi": _mpf_str(ci.hi),
        "midpoint": _mpf_str(ci.midpoint),
        "epochs_verified": ci.epochs_verified,
        "itinerary": ci.itinerary,
        "margins": {"search": _mpf_str(ci.margin), "midpoint": _mpf_str(rep.margin)},
        "verdict": rep.verdict,
    }
    _emit(_json_out(payload, cfg), cfg.out)
    return 0 if rep.verdict == "verified" else 2


def cmd_cantor(args, cfg: RunConfig) -> int:
    sysm = cantor.build_cantor_system(mp.mpf(args.c), prec=cfg.precision_bits)
    eta_ok = cantor.eta_positive_check(sysm)
    payload = {
        "c": _mpf_str(sysm.c),
        "alpha": _mpf_str(sysm.alpha),
        "trap_y": [_mpf_str(sysm.trap_y[0]), _mpf_str(sysm.trap_y[1])],
        "trap_yt": [_mpf_str(sysm.trap_yt[0]), _mpf_str(sysm.trap_yt[1])],
        "p": _mpf_str(sysm.p),
        "pt": _mpf_str(sysm.pt),
        "log_mult_p": _mpf_str(sysm.log_mult_p),
        "log_mult_pt": _mpf_str(sysm.log_mult_pt),
        "eta": _mpf_str(sysm.eta),
        "eta_greater_than_one": eta_ok,
    }
    _emit(_json_out(payload, cfg), cfg.out)
    return 2 if eta_ok is None else 0


def cmd_induced(args, cfg: RunConfig) -> int:
    inv = induced.enumerate_return_branches(
        mp.mpf(args.c), args.n, args.mmax or cfg.m_max, prec=cfg.precision_bits
    )
    payload = {
        "c": _mpf_str(inv.c),
        "n": inv.n,
        "M_max": inv.M_max,
        "s": _mpf_str(inv.s),
        "residual_measure": _mpf_str(inv.residual_measure),
        "branches": [
            {
                "lo": _mpf_str(br.lo),
                "hi": _mpf_str(br.hi),
                "return_time": br.return_time,
                "level": br.level,
                "monotone_sign": br.monotone_sign,
                "log_inf_df": _mpf_str(br.log_inf_df),
                "log_sup_df": _mpf_str(br.log_sup_df),
                "distortion": _mpf_str(br.distortion),
            }
            for br in inv.branches
        ],
    }
    _emit(_json_out(payload, cfg), cfg.out)
    return 0


def cmd_bowen(args, cfg: RunConfig) -> int:
    inv = induced.enumerate_return_branches(
        mp.mpf(args.c), args.n, args.mmax or cfg.m_max, prec=cfg.precision_bits
    )
    p_star, bracket = induced.bowen_root(inv, args.t, prec=cfg.precision_bits)
    payload = {
        "c": args.c,
        "n": args.n,
        "t": args.t,
        "p_star": _mpf_str(p_star),
        "bracket": [_mpf_str(bracket[0]), _mpf_str(bracket[1])],
    }
    _emit(_json_out(payload, cfg), cfg.out)
    return 0


def _appendix_payload(prec: int) -> dict:
    c = Parameter.make(-2, prec)
    cyc_p, cyc_q = period3_orbits(c, prec)
    d_p = multiplier_c_derivative(c, cyc_p, prec)
    d_q = multiplier_c_derivative(c, cyc_q, prec)
    fd_p = multiplier_c_derivative(c, cyc_p, prec, mode="finite_difference")
    fd_q = multiplier_c_derivative(c, cyc_q, prec, mode="finite_difference")
    return {
        "dP": _mpf_str(d_p),
        "dPt": _mpf_str(d_q),
        "dP_exact_residual": _mpf_str(abs(d_p + 16)),
        "dPt_exact_residual": _mpf_str(abs(d_q - 24)),
        "fd_check_residuals": [
            _mpf_str(abs(fd_p - d_p)),
            _mpf_str(abs(fd_q - d_q)),
        ],
        "cycle_p": [_mpf_str(x) for x in cyc_p.points],
        "cycle_q": [_mpf_str(x) for x in cyc_q.points],
        "multiplier_p": _mpf_str(cyc_p.multiplier()),
        "multiplier_q": _mpf_str(cyc_q.multiplier()),
    }


def cmd_verify_appendix(args, cfg: RunConfig) -> int:
    _emit(_json_out(_appendix_payload(cfg.precision_bits), cfg), cfg.out)
    return 0


def cmd_multipliers(args, cfg: RunConfig) -> int:
    prec = cfg.precision_bits
    c = Parameter.make(mp.mpf(args.c), prec)
    cyc_p, cyc_q = period3_orbits(c, prec)
    payload = {
        "c": args.c,
        "cycle_p": [_mpf_str(x) for x in cyc_p.points],
        "cycle_q": [_mpf_str(x) for x in cyc_q.points],
        "multiplier_p": _mpf_str(cyc_p.multiplier()),
        "multiplier_q": _mpf_str(cyc_q.multiplier()),
        "d_multiplier_p_dc": _mpf_str(multiplier_c_derivative(c, cyc_p, prec)),
        "d_multiplier_q_dc": _mpf_str(multiplier_c_derivative(c, cyc_q, prec)),
    }
    _emit(_json_out(payload, cfg), cfg.out)
    return 0


def cmd_render(args, cfg: RunConfig) -> int:
    what = args.what
    if what == "ray":
        pl = render.trace_ray_dynamical(
            complex(args.c, 0), _parse_angle(args.angle), g_min=args.gmin
        )
        _emit(_json_out(pl.as_json_dict(), cfg), cfg.out)
        return 0
    if what == "param-ray":
        pl = render.trace_ray_parameter(_parse_angle(args.angle), g_min=args.gmin)
        _emit(_json_out(pl.as_json_dict(), cfg), cfg.out)
        return 0
    if what == "equi":
        pl = render.equipotential(complex(args.c, 0), args.level)
        _emit(_json_out(pl.as_json_dict(), cfg), cfg.out)
        return 0
    if what == "puzzle":
        pls = render.puzzle_boundary(
            complex(args.c, 0), args.depth, args.piece, g_min=args.gmin
        )
        payload = {"pieces": [pl.as_json_dict() for pl in pls]}
        _emit(_json_out(payload, cfg), cfg.out)
        return 0
    if what == "julia":
        xmin, xmax, ymin, ymax = (float(v) for v in args.window.split(","))
        w, h = (int(v) for v in args.res.split(","))
        data = render.julia_image(
            complex(args.c, 0), (xmin, xmax, ymin, ymax), (w, h)
        )
        _emit(data, cfg.out)
        return 0
    raise ValueError(f"unknown render target {what!r}")


def cmd_reproduce(args, cfg: RunConfig) -> int:
    if args.what == "cheb-pressure":
        grid = [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0]
        curve = pressure.tree_pressure_curve(-2.0, grid, cfg.tree_depth, "complex")
        rows = []
        exit_code = 0
        for t, e, b in zip(curve.t_grid, curve.estimates, curve.error_bars):
            ref = float(cheb_pressure_reference(t))
            ok = abs(e - ref) <= 0.15
            if not ok:
                exit_code = 1
            rows.append((repr(t), repr(e), repr(ref), repr(abs(e - ref)), ok))
        _emit(
            _csv_out(("t", "estimate", "reference", "abs_error", "within_tol"), rows, cfg),
            cfg.out,
        )
        return exit_code
    if args.what == "transition":
        grid = [(-2 + 2 * i / 24) for i in range(25)]
        curve = pressure.tree_pressure_curve(-2.0, grid, max(cfg.tree_depth, 18), "complex")
        rep = pressure.detect_transition(curve, lambda t: -t * math.log(4))
        payload = {
            "t_star": rep.t_star,
            "slope_gap": rep.slope_gap,
            "verdict": rep.verdict,
        }
        _emit(_json_out(payload, cfg), cfg.out)
        return 0 if rep.verdict == "detected" else 2
    raise ValueError(f"unknown reproduction target {args.what!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="quadtherm",
        description="Thermodynamic formalism of real quadratic maps near c = -2",
    )
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--precision-bits", type=int, dest="precision_bits")
    ap.add_argument("--out", help="output path (default stdout)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pressure", help="tree pressure curve (CSV)")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--t", type=float)
    p.add_argument("--t-min", type=float, default=-2.0)
    p.add_argument("--t-max", type=float, default=0.0)
    p.add_argument("--grid", type=int, default=25)
    p.add_argument("--depth", type=int, dest="tree_depth")
    p.add_argument("--mode", choices=("real", "complex"), default="complex")
    p.set_defaults(func=cmd_pressure)

    p = sub.add_parser("series", help="Poincare / postcritical series (JSON)")
    p.add_argument("kind", choices=("post", "poincare"))
    p.add_argument("--c", type=float, default=-2.0)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--K", type=int, default=50)
    p.add_argument("--J", type=int, default=15)
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("find-param", help="certified parameter search (JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--prefix", required=True)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_find_param)

    p = sub.add_parser("cantor", help="trap structure at a parameter (JSON)")
    p.add_argument("--c", required=True)
    p.set_defaults(func=cmd_cantor)

    p = sub.add_parser("induced", help="first-return branch inventory (JSON)")
    p.add_argument("--c", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mmax", type=int)
    p.set_defaults(func=cmd_induced)

    p = sub.add_parser("bowen", help="Bowen root of the induced pressure (JSON)")
    p.add_argument("--c", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--mmax", type=int)
    p.set_defaults(func=cmd_bowen)

    p = sub.add_parser("multipliers", help="period-3 multiplier calculus (JSON)")
    p.add_argument("--c", type=float, default=-2.0)
    p.set_defaults(func=cmd_multipliers)

    p = sub.add_parser(
        "verify-appendix", help="multiplier derivative check at c = -2 (JSON)"
    )
    p.set_defaults(func=cmd_verify_appendix)

    p = sub.add_parser("render", help="rays / equipotentials / puzzle / julia")
    p.add_argument("what", choices=("ray", "equi", "puzzle", "julia", "param-ray"))
    p.add_argument("--c", type=float, default=-2.0)
    p.add_argument("--angle", default="0/1")
    p.add_argument("--gmin", type=float, default=1e-8)
    p.add_argument("--level", type=float, default=0.5)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--piece", choices=("center", "beta", "minus_beta"), default="center")
    p.add_argument("--window", default="-2.2,2.2,-1.65,1.65")
    p.add_argument("--res", default="320,240")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("reproduce", help="headline reproduction runs")
    p.add_argument("what", choices=("cheb-pressure", "transition"))
    p.set_defaults(func=cmd_reproduce)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, cfg)
    except (
        ValueError,
        ZeroDivisionError,
        param_search.SearchExhaustedError,
        induced.TruncationUnsoundError,
        induced.RefinementError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
