import numpy as np
import pytest

from twinforge.fom import FomConfig, simulate_fom
from twinforge.signals import AprbsConfig, TimeGrid, gen_aprbs


@pytest.fixture(scope="session")
def grid():
    return TimeGrid()


@pytest.fixture(scope="session")
def short_grid():
    return TimeGrid(n_samples=60, dt=5.0)


@pytest.fixture(scope="session")
def aprbs_sets(grid):
    """Six stand-in FOM data sets on the default grid, seeds 0..5."""
    out = []
    for seed in range(6):
        ds = simulate_fom(gen_aprbs(AprbsConfig(), grid, seed))
        out.append(ds.with_id(f"AP{seed + 1:04d}"))
    return out


@pytest.fixture(scope="session")
def short_sets(short_grid):
    cfg = AprbsConfig(hold_min=40.0, hold_max=70.0, n_levels=4)
    return [
        simulate_fom(gen_aprbs(cfg, short_grid, seed)).with_id(f"AP{seed + 1:04d}")
        for seed in range(4)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
