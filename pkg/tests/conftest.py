import numpy as np
import pytest

from heraldsim.config import Config
from heraldsim.pipeline import Setup


@pytest.fixture(scope="session")
def setup():
    return Setup.from_config(Config.load())


@pytest.fixture(scope="session")
def eta(setup):
    det = setup.detector
    cm = det.channels
    return tuple(det.probability(c) for c in (cm.idler1, cm.port_a, cm.port_b, cm.idler2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density_matrix(rng, d, rank=None):
    rank = d if rank is None else rank
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = a @ a.conj().T
    return m / np.trace(m).real


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def record(criterion, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
