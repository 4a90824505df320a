"""Shared reference setup: mLF scheme for Burgers, nu=0.5, D=0.8, shock 1 -> -1."""
import sys

import pytest

from dspstab.linop import analyze_symbol, limit_symbol, linearize
from dspstab.profile import solve_family
from dspstab.scheme import make_mlf, shock_pair

NU, D = 0.5, 0.8
U_MINUS, U_PLUS = 1.0, -1.0


@pytest.fixture(scope="session")
def scheme():
    return make_mlf(NU, D)


@pytest.fixture(scope="session")
def shock(scheme):
    return shock_pair(scheme, U_MINUS, U_PLUS)


@pytest.fixture(scope="session")
def family(scheme, shock):
    return solve_family(scheme, shock)


@pytest.fixture(scope="session")
def profile(family):
    return family.reference


@pytest.fixture(scope="session")
def op(scheme, profile):
    return linearize(scheme, profile)


@pytest.fixture(scope="session")
def symbols(scheme):
    return (analyze_symbol(limit_symbol(scheme, U_MINUS, "left")),
            analyze_symbol(limit_symbol(scheme, U_PLUS, "right")))


@pytest.fixture(scope="session")
def eigen(op, family):
    from dspstab.green import eigenvector_v
    return eigenvector_v(op, family)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion that ran."""
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    verdicts = getattr(mod, "VERDICTS", {})
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for k in sorted(verdicts):
            terminalreporter.write_line(verdicts[k])
