import pytest

from bicritical import maps
from bicritical.numerics import ContinuedFraction, set_precision

ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True)
def default_precision():
    set_precision(30)
    yield
    set_precision(30)


@pytest.fixture(scope="session")
def golden():
    return maps.tune_golden_trig("0.2", 16)


@pytest.fixture(scope="session")
def engineered():
    """Digits 1, 1, 30, 1, ...: level 1 is a two-bridges level for this parameter."""
    return maps.tune_rotation(lambda a: maps.TrigBicritical(a, "0.343"), ContinuedFraction((1, 1, 30, 1)), 10)


@pytest.fixture(scope="session")
def golden_pair():
    """Two golden maps with delta = 1/2 tuned independently; not rotations of each other."""
    return maps.tune_golden_trig(0, 16), maps.tune_golden_trig(0, 16, b="0.5")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
