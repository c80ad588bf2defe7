"""Scalar precision conventions.

All precision-sensitive quantities are mpmath ``mpf``/``mpc`` values.  The
mantissa width (in bits) is contextual, not stored per value: every public
function that does precision-sensitive work takes a ``prec`` argument and
runs under ``mp.workprec(prec)``.  mpmath arithmetic is correctly rounded at
the context precision, and re-reading a value at a wider context is exact,
which is all the scalar layer needs to guarantee.

Certified (outward-rounded) evaluation uses mpmath's interval context
``mpmath.iv``; helpers here convert between the two worlds.

The package default of 106 bits (a double-double) resolves puzzle depths up
to ~40 at parameters near -2; override per call or via the CLI config.
"""

from __future__ import annotations

import os

from mpmath import iv, mp, mpf

DEFAULT_PREC = 106

PREC_ENV_VAR = "QUADTHERM_PRECISION_BITS"


def default_prec() -> int:
    """Package default precision in bits, honoring the environment override."""
    raw = os.environ.get(PREC_ENV_VAR)
    if raw:
        bits = int(raw)
        if bits < 53:
            raise ValueError(f"{PREC_ENV_VAR} must be >= 53, got {bits}")
        return bits
    return DEFAULT_PREC


def to_mpf(x, prec: int) -> mpf:
    """Round ``x`` to an mpf at ``prec`` bits."""
    with mp.workprec(prec):
        return +mp.mpf(x)


def iv_endpoints(x):
    """Lower/upper endpoints of an iv scalar as plain mpf values."""
    a, b = x._mpi_
    return mp.mpf(a), mp.mpf(b)


def iv_mid(x) -> mpf:
    lo, hi = iv_endpoints(x)
    return (lo + hi) / 2


def ulp_at(x, prec: int) -> mpf:
    """Size of one unit in the last place of ``x`` at ``prec`` bits."""
    with mp.workprec(prec):
        ax = abs(mp.mpf(x))
        if ax == 0:
            return mp.mpf(2) ** (-prec)
        return mp.ldexp(1, int(mp.frexp(ax)[1]) - prec)
