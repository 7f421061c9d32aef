import hypothesis
import numpy as np
import pytest

from elflow.grid import Grid

hypothesis.settings.register_profile(
    "elflow", max_examples=20, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("elflow")


@pytest.fixture
def grid2d():
    return Grid(2, 32, 2.0 * np.pi)


@pytest.fixture
def grid3d():
    return Grid(3, 16, 2.0 * np.pi)
