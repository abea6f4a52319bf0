import numpy as np
import pytest

from koopcontrol.models import (CwConfig, DuffingParams, cw_dynamics,
                                duffing_acceleration)
from koopcontrol.ocp import augment_energy_optimal


@pytest.fixture(scope="session")
def duffing_aug():
    """Augmented Duffing system with the reference parameters."""
    return augment_energy_optimal(duffing_acceleration(DuffingParams()))


@pytest.fixture(scope="session")
def cw_planar_linear():
    cfg = CwConfig(semi_major_axis=6678000.0, k_max=2, planar=True)
    return cfg, augment_energy_optimal(cw_dynamics(cfg))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
