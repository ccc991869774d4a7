import numpy as np
import pytest
from pathlib import Path

from coverage_ph.filtration import WeightedFiltration, rips_filtration

FIXTURES = Path(__file__).parent / "fixtures"


def random_instance(rng, n=None, w_max=10.0, d_max=50.0):
    n = int(rng.integers(3, 26)) if n is None else n
    w = rng.uniform(0, w_max, n)
    d = rng.uniform(0, d_max, (n, n))
    d = np.triu(d, 1)
    d = d + d.T
    return d, w


def euclidean(points):
    P = np.asarray(points, float)
    return np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))


def annulus(rng, n=100, r0=1.0, r1=1.3):
    # uniform by area
    r = np.sqrt(rng.uniform(r0**2, r1**2, n))
    theta = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def five_step_filtration():
    """The five-step toy filtration: a pentagon path closed by [0,3], then filled in."""
    items = [((v,), 0) for v in range(5)]
    items += [((0, 1), 1), ((1, 2), 1), ((2, 3), 1), ((3, 4), 1)]
    items += [((0, 3), 2)]
    items += [((0, 2), 3), ((0, 1, 2), 3)]
    items += [((0, 2, 3), 4)]
    return WeightedFiltration.from_simplices(items)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def square():
    pts = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], float)
    return rips_filtration(euclidean(pts), np.zeros(4))


@pytest.fixture
def city12():
    return FIXTURES / "city12"


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
