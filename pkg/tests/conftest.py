import numpy as np
import pytest

from gengxue.models import StatePair
from gengxue.spectral import make_grid


def localized(grid, rng, scale=1.0, modes=4):
    """Random smooth field under a Gaussian window, well resolved on L=50 grids."""
    x = grid.x
    c = rng.uniform(-8, 8)
    w = rng.uniform(1.0, 3.0)
    y = (x - c) / w
    coef = rng.standard_normal((modes, 2))
    wave = sum(a * np.cos(j * y) + b * np.sin(j * y) for j, (a, b) in enumerate(coef))
    return scale * wave * np.exp(-0.5 * y**2)


def gaussian_state(grid, au=0.3, av=0.4, cu=0.0, cv=1.0, wu=1.0, wv=1.5):
    x = grid.x
    return StatePair.from_arrays(
        grid, au * np.exp(-0.5 * ((x - cu) / wu) ** 2), av * np.exp(-0.5 * ((x - cv) / wv) ** 2)
    )


@pytest.fixture
def grid512():
    return make_grid(50.0, 512)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
