import numpy as np
import pytest

from nls.fields import Grid, SetMask


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def interval_mask(grid: Grid, lo: float, hi: float) -> SetMask:
    x = grid.axis()
    return SetMask(grid, ((x > lo) & (x < hi)).astype(float))
