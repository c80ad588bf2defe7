"""Binary itineraries, the phased square-block generator, and kneading data.

Itinerary words are plain strings over "01"; sign words are strings over
"-+0" (with '0' marking an exact critical hit).  The phased generator
produces a_k = 0 exactly when some l >= l0 has l^2 <= k <= l^2 + N - 1, so
zeros come in blocks of length N anchored at the squares l0^2, (l0+1)^2, ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from mpmath import mp

from .core import _as_c
from .precision import DEFAULT_PREC


@dataclass(frozen=True)
class PhasedSpec:
    """Block length N and starting phase l0, subject to 2*l0 >= N."""

    N: int
    l0: int

    def __post_init__(self):
        if self.N < 1 or self.l0 < 1:
            raise ValueError("N and l0 must be positive")
        if 2 * self.l0 < self.N:
            raise ValueError(f"phased spec requires 2*l0 >= N, got N={self.N}, l0={self.l0}")


def phased_symbol(spec: PhasedSpec, k: int) -> int:
    """a_k of the phased itinerary.

    Since N <= 2*l0, blocks at distinct squares cannot overlap, so only
    l = isqrt(k) can witness the zero condition.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    l = math.isqrt(k)
    return 0 if (l >= spec.l0 and k - l * l <= spec.N - 1) else 1


def phased_itinerary(spec: PhasedSpec, K: int) -> str:
    """First K symbols a_0 ... a_{K-1} as a 0/1 string."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return "".join(str(phased_symbol(spec, k)) for k in range(K))


def count_zeros(spec: PhasedSpec, k: int) -> int:
    """N(k) = number of zeros among a_0 ... a_{k-1}, in closed form."""
    if k < 1:
        raise ValueError("k must be >= 1")
    L = math.isqrt(k - 1)
    if L < spec.l0:
        return 0
    return spec.N * (L - spec.l0) + min(spec.N, k - L * L)


def block_count(spec: PhasedSpec, k: int) -> int:
    """B(k) = number of constant blocks among a_0 ... a_{k-1}, closed form.

    Derived from the block structure: one leading 1-block, then for each
    square l0^2 <= l^2 <= k-1 one 0-block, plus the 1-block that follows it
    whenever the word extends past the zero run.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    L = math.isqrt(k - 1)
    if L < spec.l0:
        return 1
    blocks = 2 * (L - spec.l0) + 2
    if k - 1 >= L * L + spec.N:
        blocks += 1
    return blocks


def count_zeros_by_enumeration(spec: PhasedSpec, k: int) -> int:
    return sum(1 for j in range(k) if phased_symbol(spec, j) == 0)


def block_count_by_enumeration(spec: PhasedSpec, k: int) -> int:
    word = [phased_symbol(spec, j) for j in range(k)]
    return 1 + sum(1 for j in range(k - 1) if word[j] != word[j + 1])


@dataclass(frozen=True)
class SignWord:
    """Signs of a finite critical-orbit segment, over '-+' with optional
    exact-zero hit recorded at ``critical_index``."""

    signs: str
    critical_index: Optional[int] = None

    def __post_init__(self):
        if set(self.signs) - set("-+0"):
            raise ValueError("sign word must be over '-+0'")

    def __len__(self) -> int:
        return len(self.signs)


def kneading_word(c, M: int, prec: int = DEFAULT_PREC, zero_tol=0) -> SignWord:
    """Signs of f_c^j(c) for j = 0..M.

    An orbit value with |x| <= zero_tol is flagged (symbol '0') rather than
    guessed; certified searches must raise precision instead of trusting a
    sign that close to the boundary.
    """
    cval = _as_c(c)
    with mp.workprec(prec):
        x = mp.mpf(cval)
        signs = []
        crit = None
        for j in range(M + 1):
            if abs(x) <= zero_tol:
                signs.append("0")
                if crit is None:
                    crit = j
            else:
                signs.append("+" if x > 0 else "-")
            x = x * x + cval
        return SignWord(signs="".join(signs), critical_index=crit)


def kneading_compare(a: SignWord, b: SignWord) -> int:
    """Parity-adjusted lexicographic order on flag-free sign words.

    At the first differing index j, compare '-' < '+' directly when the
    number of '-' entries before j is even, reversed when odd.  This is the
    order in which real kneading data varies monotonically with c.
    Returns -1, 0, or 1.
    """
    if len(a) != len(b):
        raise ValueError("sign words must have equal length")
    if a.critical_index is not None or b.critical_index is not None:
        raise ValueError("incomparable: critical flag present, refine precision")
    for j, (sa, sb) in enumerate(zip(a.signs, b.signs)):
        if sa == sb:
            continue
        direct = -1 if sa == "-" else 1
        minus_before = a.signs[:j].count("-")
        return direct if minus_before % 2 == 0 else -direct
    return 0
