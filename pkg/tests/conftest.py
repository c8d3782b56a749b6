import numpy as np
import pytest
from hypothesis import settings

from hflow.curve import circle_curve
from hflow.mesh import build_disk_mesh

settings.register_profile("hflow", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("hflow")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mesh96():
    return build_disk_mesh(96, 16)


@pytest.fixture(scope="session")
def circle96():
    return circle_curve(96)


@pytest.fixture(scope="session")
def mesh24():
    return build_disk_mesh(24, 4)


@pytest.fixture(scope="session")
def circle24():
    return circle_curve(24)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
