import numpy as np
import pytest

from popflux.grid import Extent, SpatialScheme, TemporalScheme


@pytest.fixture
def scheme_1km():
    """20 x 20 km extent, 1 km cells, level 0, identity-ish projection."""
    return SpatialScheme(0.0, 0.0, 1000.0, 0, Extent(0.0, 0.0, 20_000.0, 20_000.0))


@pytest.fixture
def scheme_small():
    """8 x 8 km extent, 1 km cells at level 0."""
    return SpatialScheme(0.0, 0.0, 1000.0, 0, Extent(0.0, 0.0, 8_000.0, 8_000.0))


@pytest.fixture
def hourly():
    return TemporalScheme(0, 3600.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240401)
