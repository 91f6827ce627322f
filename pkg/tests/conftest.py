import numpy as np
import pytest

from geoentangle import harness, imps


@pytest.fixture(scope="session")
def tfim_states():
    """Cached TFIM ground states keyed by (h, chi)."""
    cache = {}

    def get(h, chi=16):
        key = (float(h), int(chi))
        if key not in cache:
            cache[key] = harness.ground_state("tfim", h, chi)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def two_level_state(p):
    """Canonical chi=2, d=4 iMPS with lambda = (sqrt p, sqrt q) and zero correlation length.

    The physical index records the bond pair (a, b), so distinct block states
    are orthogonal at every L.
    """
    lam = np.sqrt(np.array([p, 1.0 - p]))
    gamma = np.zeros((4, 2, 2))
    for a in range(2):
        for b in range(2):
            gamma[2 * a + b, a, b] = 1.0
    return imps.InfiniteMPS(gamma, lam)


# --------------------------------------------------------------------------
# acceptance summary
# --------------------------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""

    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
