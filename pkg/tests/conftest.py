import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fracns.spectral import from_function, make_grid, random_field


@pytest.fixture
def grid2():
    return make_grid(2, 16)


@pytest.fixture
def grid3():
    return make_grid(3, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)


def taylor_green(grid):
    """u = (sin x1 cos x2, -cos x1 sin x2); its nonlinearity is a gradient."""
    return from_function(
        grid,
        lambda x, y: np.sin(x) * np.cos(y),
        lambda x, y: -np.cos(x) * np.sin(y),
    )


def random_pair(grid, rng, divfree_first=True, max_wave=None):
    f = random_field(grid, grid.d, rng, max_wave=max_wave, divergence_free=divfree_first)
    g = random_field(grid, grid.d, rng, max_wave=max_wave)
    return f, g
