import numpy as np
import pytest

from isaclab.scenario import default_config, draw_comm_channel


@pytest.fixture(scope="session")
def ref_cfg():
    return default_config()


@pytest.fixture(scope="session")
def ref_h(ref_cfg):
    return draw_comm_channel(ref_cfg).h


@pytest.fixture(scope="session")
def small_cfg():
    """Eight antennas and a five-point grid: fast enough for property tests."""
    return default_config(mt=8, mr=8, grid_deg=tuple((a, a) for a in np.linspace(-2.0, 2.0, 5)))


@pytest.fixture(scope="session")
def small_h(small_cfg):
    return draw_comm_channel(small_cfg).h


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_psd(rng, n, rank=None, complex_=True):
    rank = n if rank is None else rank
    g = rng.standard_normal((n, rank))
    if complex_:
        g = g + 1j * rng.standard_normal((n, rank))
    return g @ g.conj().T


ACCEPTANCE_LINES = []


def report(number, ok, detail):
    """Record one acceptance verdict; printed now and again in the terminal summary."""
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":").rstrip("ab"))):
            terminalreporter.write_line(line)
