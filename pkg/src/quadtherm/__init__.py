"""Numerical thermodynamic formalism for the real quadratic family z^2 + c.

Subpackages cover orbit/multiplier calculus (core), binary itineraries and
kneading order (symbolic), certified parameter search (param_search), the
period-3 Cantor structure (cantor), pressure estimators and transition
detection (pressure), the first return map and Bowen root (induced), and
Green-function / external-ray rendering (render).  The ``quadtherm`` CLI
wires everything together.
"""

from .precision import DEFAULT_PREC, default_prec

__all__ = ["DEFAULT_PREC", "default_prec"]
__version__ = "0.1.0"
