import numpy as np
import pytest

from knotform import preset


@pytest.fixture(scope="session")
def circle():
    return preset("circle")


@pytest.fixture(scope="session")
def trefoil():
    return preset("trefoil")


@pytest.fixture(scope="session")
def figure_eight():
    return preset("figure_eight")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def exterior_points(knot, rng, n, lo=0.3, hi=3.0):
    """Random points at distance >= lo from the knot (dense-sample check)."""
    pts = knot.eval(np.arange(4096) / 4096)
    out = []
    while len(out) < n:
        x = rng.uniform(-hi, hi, 3) + pts[rng.integers(len(pts))] * 0.5
        if np.linalg.norm(pts - x, axis=1).min() >= lo:
            out.append(x)
    return np.array(out)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
