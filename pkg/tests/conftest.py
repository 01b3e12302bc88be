import numpy as np
import pytest

from mbokit.grid import Grid, PhaseField, rasterize_ball
from mbokit.kernel import HeatKernelPlan


@pytest.fixture(scope="session")
def grid64() -> Grid:
    return Grid(dim=2, n=64)


@pytest.fixture(scope="session")
def grid128() -> Grid:
    return Grid(dim=2, n=128)


@pytest.fixture(scope="session")
def grid256() -> Grid:
    return Grid(dim=2, n=256)


@pytest.fixture(scope="session")
def plan128(grid128) -> HeatKernelPlan:
    return HeatKernelPlan(grid128, 1e-3)


@pytest.fixture(scope="session")
def ball128(grid128) -> PhaseField:
    return rasterize_ball(grid128, (0.5, 0.5), 0.3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def generic_mask(grid: Grid, seed: int, fill: float = 0.35) -> np.ndarray:
    """Random mask with no symmetry, for tie-free threshold tests."""
    r = np.random.default_rng(seed)
    return r.random(grid.shape) < fill
