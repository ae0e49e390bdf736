import numpy as np
import pytest

from tryon.grid import Grid2D, Mask, constant_grid
from tryon.schedule import make_linear_schedule


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sched30():
    return make_linear_schedule(30)


@pytest.fixture
def small_scene(rng):
    """8x8 RGB person/garment/densepose plus a centered 4x4 mask."""
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[2:6, 2:6] = 1
    return {
        "person": Grid2D(rng.uniform(0.1, 0.9, (8, 8, 3))),
        "garment": Grid2D(rng.uniform(0.3, 0.7, (8, 8, 3))),
        "undergarment": constant_grid(8, 8, 3, 0.55),
        "densepose": Grid2D(rng.uniform(0.0, 1.0, (8, 8, 3))),
        "mask": Mask(mask),
    }
