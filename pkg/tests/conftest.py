import numpy as np
import pytest

from parabolica import potential as pot

TWO_CENTRE = dict(alpha=1.5, centres=[([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)])
XI_MINUS = np.array([1.0, 2.0, 2.0]) / 3.0
XI_PLUS = np.array([2.0, 1.0, -2.0]) / 3.0


@pytest.fixture(scope="session")
def two_centre():
    return pot.CentreConfiguration.from_centres(TWO_CENTRE["alpha"], TWO_CENTRE["centres"])


@pytest.fixture(scope="session")
def two_centre_constants(two_centre):
    return pot.certify_constants(two_centre)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running solves (minutes)")


@pytest.fixture(scope="session")
def r20_record(two_centre, two_centre_constants):
    """Cold solve of the standard two-centre problem at R = 20 (about ten seconds)."""
    from parabolica import continuation as ct

    return ct.solve_at_R(two_centre, XI_PLUS, XI_MINUS, 20.0, constants=two_centre_constants)


_CRITERIA = {}


def record_criterion(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    _CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
