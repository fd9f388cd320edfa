import os
import sys
from collections.abc import Callable

import numpy as np
import pytest

# Add the root directory to the path
sys.path.append(os.path.join(os.path.dirname(__file__), ".."))
from filterlab.application.model_suite import builtin_model
from filterlab.models.measures import GaussianMeasure, RngStream
from filterlab.models.state_space import DataRecord, StateSpaceModel, simulate


def _scalar_model(psi_a: float = 1.0, h_b: float = 1.0, sigma2: float = 1.0, gamma2: float = 1.0) -> StateSpaceModel:
    """Scalar linear model v' = a v + xi, y = b v + eta with init N(0, 1)."""
    a_matrix = np.array([[psi_a]])
    h_matrix = np.array([[h_b]])
    return StateSpaceModel(
        name="scalar",
        dim_state=1,
        dim_obs=1,
        psi=lambda v: v @ a_matrix.T,
        h=lambda v: v @ h_matrix.T,
        sigma=np.array([[sigma2]]),
        gamma=np.array([[gamma2]]),
        init=GaussianMeasure(np.zeros(1), np.eye(1)),
        psi_matrix=a_matrix,
        h_matrix=h_matrix,
    )


@pytest.fixture
def linear1d() -> StateSpaceModel:
    return builtin_model("linear1d")


@pytest.fixture
def linear_nd() -> StateSpaceModel:
    return builtin_model("linearNd", {"dim": 4, "obs_dim": 2, "matrix_seed": 3})


@pytest.fixture
def identity_model() -> StateSpaceModel:
    return _scalar_model()


@pytest.fixture
def linear1d_data(linear1d: StateSpaceModel) -> DataRecord:
    return simulate(linear1d, 20, RngStream(7))


@pytest.fixture
def rng() -> RngStream:
    return RngStream(42)


@pytest.fixture
def make_scalar_model() -> Callable[..., StateSpaceModel]:
    return _scalar_model
