import math

import numpy as np
import pytest

from cutproject import geometry as geo
from cutproject import lattice as lat
from cutproject.modelset import ModelSetSpec

PHI = (1 + math.sqrt(5)) / 2
PHIBAR = (1 - math.sqrt(5)) / 2


def golden_spec(window=None, search=None, shift=None):
    return ModelSetSpec(geo.SplitSpace(1, 1), lat.golden(), shift,
                        window or geo.IntervalUnion([(0.0, 1.0)]),
                        search or geo.Box([0.5], [0.5]))


def z2_spec(window=None, search=None, shift=None):
    return ModelSetSpec(geo.SplitSpace(1, 1), lat.identity(2), shift,
                        window or geo.Box([0.1], [0.35]),
                        search or geo.Ball([0.0], 1.0))


def brute_count(basis, region, shift, n_max):
    """Scan all integer coordinates |k_i| <= n_max (the oracle for enumeration)."""
    B = np.asarray(basis, dtype=float)
    d = B.shape[0]
    rng = np.arange(-n_max, n_max + 1)
    grid = np.stack(np.meshgrid(*([rng] * d), indexing="ij"), -1).reshape(-1, d)
    pts = grid @ B.T + np.asarray(shift, dtype=float)
    keep = geo.contains(region, pts)
    return grid[keep]


@pytest.fixture
def golden():
    return golden_spec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results, filled by tests/test_acceptance.py and echoed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
