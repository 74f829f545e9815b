import numpy as np
import pytest

from soilmap.synthetic import generate_synthetic_world


@pytest.fixture(scope="session")
def small_world():
    """256 px / 40 m world with 300 points; shared across tests."""
    return generate_synthetic_world(seed=7, width=256, height=256, n_points=300,
                                    clump_min_sep=1200.0, edge_inset=800.0)


@pytest.fixture(scope="session")
def small_stack(small_world):
    return small_world[0]


@pytest.fixture(scope="session")
def small_observations(small_world):
    return small_world[1]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
