import time

import numpy as np
import pytest

from stressenergy.potential import double_well, ginzburg_landau, triple_well, zero
from stressenergy.problems import vortex_setup
from stressenergy.solver import relax


@pytest.fixture(scope="session")
def gl():
    return ginzburg_landau()


@pytest.fixture(scope="session")
def dw1():
    return double_well(1)


@pytest.fixture(scope="session")
def dw2():
    return double_well(2)


@pytest.fixture(scope="session")
def tw():
    return triple_well()


@pytest.fixture(scope="session")
def W0():
    return zero(2)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_LINES]


@pytest.fixture(scope="session")
def vortex_timed():
    """Converged degree-one GL vortex on [-8, 8]^2, h = 0.0625, with its wall time.

    Shared by the solver, monotonicity and acceptance tests; the solve is the
    most expensive step of the suite.
    """
    cfg, init = vortex_setup()
    t0 = time.perf_counter()
    res = relax(cfg, init)
    assert res.converged
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def vortex(vortex_timed):
    return vortex_timed[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
