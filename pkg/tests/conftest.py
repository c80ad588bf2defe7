import pytest
from mpmath import mp

from quadtherm.param_search import find_parameter
from quadtherm.symbolic import PhasedSpec, phased_itinerary

PHASED_PREFIX_6 = phased_itinerary(PhasedSpec(2, 2), 6)


@pytest.fixture(scope="session")
def certified_interval():
    """The depth-8 parameter with the first six phased symbols, certified to
    width 1e-10; shared across modules (the search is deterministic)."""
    return find_parameter(8, PHASED_PREFIX_6, mp.mpf("1e-10"))


@pytest.fixture(scope="session")
def certified_c(certified_interval):
    return certified_interval.midpoint
