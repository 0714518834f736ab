import numpy as np
import pytest

from gridcast.data import GridDataset, SplitSpec, synth_generate
from gridcast.model import BlockConfig, train_grid
from gridcast.optim import TrainConfig


@pytest.fixture(scope="session")
def small_grid():
    """3x3 synthetic grid, two years, with one land cell."""
    g = synth_generate(3, 3, 730, seed=11)
    values = g.values.copy()
    values[:, 2, 0] = np.nan
    return GridDataset(values, g.start_date, g.lat0, g.lon0, g.dlat, g.dlon)


@pytest.fixture(scope="session")
def small_split(small_grid):
    return SplitSpec.from_fractions(small_grid, 0.7, 0.1)


@pytest.fixture(scope="session")
def trained_small(small_grid, small_split):
    grid, _ = train_grid(small_grid, small_split, BlockConfig(k=8, l=2, units_r=3),
                         TrainConfig(epochs=2, batch_size=50), seed=3)
    return grid


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
