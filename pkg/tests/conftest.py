import numpy as np
import pytest

from ddg.mesh import build_uniform_square
from ddg.space import create_space


@pytest.fixture
def two_cell():
    return build_uniform_square(1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[1, 2], ids=["p1", "p2"])
def degree(request):
    return request.param


@pytest.fixture
def small_space(degree):
    return create_space(build_uniform_square(3), degree)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """List collecting one PASS/FAIL line per acceptance criterion."""
    return request.config.stash[ACCEPTANCE_LINES]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
