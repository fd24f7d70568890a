import numpy as np
import pytest

from gpstwin.scenario.constellation import BUILTIN_ALPHA, BUILTIN_BETA, builtin_nav_path
from gpstwin.scenario.ephemeris import load_ephemerides

WEEK = 2300
TOW = 284400.0


@pytest.fixture(scope="session")
def nav():
    return load_ephemerides(builtin_nav_path(), WEEK, TOW)


@pytest.fixture(scope="session")
def eph(nav):
    return nav.ephemerides[min(nav.ephemerides)]


@pytest.fixture(scope="session")
def iono():
    return BUILTIN_ALPHA, BUILTIN_BETA


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance(request):
    """Record one acceptance line; all lines are printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(n, ok, detail):
        lines.append((n, bool(ok), detail))
        return ok
    return record


_ACCEPTANCE = pytest.StashKey()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(lines, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
