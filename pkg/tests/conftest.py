import numpy as np
import pytest
from hypothesis import settings

from nonlocal_bif import DiffusionLaw, build_mesh

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

_CRITERIA = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def unit():
    """Unit interval, h = 1/256."""
    return build_mesh(1, [1.0], [255])


@pytest.fixture(scope="session")
def coarse():
    return build_mesh(1, [1.0], [63])


@pytest.fixture
def affine():
    return DiffusionLaw("affine", 1.0, 1.0)


def dense_laplacian_1d(n: int, length: float = 1.0) -> np.ndarray:
    h = length / (n + 1)
    return (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2


@pytest.fixture
def report_criterion(request):
    log = request.config.stash.setdefault(_CRITERIA, [])

    def record(label: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        print(line)
        log.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
