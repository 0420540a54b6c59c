import numpy as np
import pytest

from latstab.plant import VehicleParams
from latstab.rhonn import RhonnModel, SigmoidParams


@pytest.fixture
def params():
    return VehicleParams(mu=0.85)


@pytest.fixture
def unit_model():
    """Model with unit sigmoids everywhere; gains from the stock vehicle."""
    return RhonnModel(
        sig_vx=SigmoidParams(1.0, 1.0), sig_vy=SigmoidParams(1.0, 1.0),
        sig_wr=SigmoidParams(1.0, 1.0), sig_delta=SigmoidParams(1.0, 1.0),
    )


def random_weights(rng, scale=1.0):
    return rng.normal(0.0, scale, 15)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
