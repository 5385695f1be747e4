import math

import numpy as np
import pytest

from hfgalerkin.geometry import make_config, make_curve

KITE_ALPHA = (4.0 / math.sqrt(17.0), 1.0 / math.sqrt(17.0))
ELLIPSE_ALPHA = (3.0 / math.sqrt(10.0), 1.0 / math.sqrt(10.0))


@pytest.fixture(scope="session")
def circle_curve():
    return make_curve("circle", radius=1.0)


@pytest.fixture(scope="session")
def circle_config(circle_curve):
    """Unit circle, alpha = (1, 0), k = 50."""
    return make_config(circle_curve, 50.0, (1.0, 0.0))


@pytest.fixture(scope="session")
def ellipse_config():
    return make_config(make_curve("ellipse", a=2.0, b=1.0), 20.0, ELLIPSE_ALPHA)


@pytest.fixture(scope="session")
def kite_config():
    return make_config(make_curve("kite"), 20.0, KITE_ALPHA)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b))


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def check(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
