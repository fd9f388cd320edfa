"""The Kalman filter, exact for linear Psi and h with Gaussian noise and initial law."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from filterlab.exceptions import DimensionMismatchError, NotPositiveSemiDefiniteError
from filterlab.models.measures import GaussianMeasure
from filterlab.models.state_space import DataRecord, StateSpaceModel
from filterlab.utils.linalg import is_spd, spd_right_solve, symmetrize

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Mean and SPD covariance of a Gaussian filtering distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(np.atleast_1d(self.mean), dtype=float)
        cov = symmetrize(np.atleast_2d(np.asarray(self.cov, dtype=float)))
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatchError(f"Mean of shape {mean.shape} does not match covariance {cov.shape}.")
        if not is_spd(cov):
            raise NotPositiveSemiDefiniteError("Kalman covariance lost positive definiteness.")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def from_gaussian(cls, g: GaussianMeasure) -> KalmanState:
        """Kalman state with the moments of a Gaussian measure."""
        return cls(mean=g.mean, cov=g.cov)

    def as_gaussian(self) -> GaussianMeasure:
        """The Gaussian measure N(mean, cov)."""
        return GaussianMeasure(self.mean, self.cov)


def kalman_predict(s: KalmanState, model: StateSpaceModel) -> KalmanState:
    """Push a Gaussian through the linear dynamics: (A m, A C A^T + Sigma)."""
    model.require_linear("kalman_predict", h=False)
    model.require_stochastic("kalman_predict")
    a_matrix = model.psi_matrix
    assert a_matrix is not None
    return KalmanState(mean=a_matrix @ s.mean, cov=a_matrix @ s.cov @ a_matrix.T + model.sigma)


def kalman_update(s: KalmanState, y: np.ndarray, model: StateSpaceModel) -> KalmanState:
    """Condition a Gaussian prior on a linear observation y = H v + eta."""
    model.require_linear("kalman_update", psi=False)
    model.require_stochastic("kalman_update")
    h_matrix = model.h_matrix
    assert h_matrix is not None
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.dim_obs,):
        raise DimensionMismatchError(f"Observation must have dimension {model.dim_obs}, got {y.shape}.")
    cross = s.cov @ h_matrix.T
    innovation_cov = h_matrix @ cross + model.gamma
    gain = spd_right_solve(cross, innovation_cov, "innovation covariance")
    mean = s.mean + gain @ (y - h_matrix @ s.mean)
    cov = (np.eye(model.dim_state) - gain @ h_matrix) @ s.cov
    return KalmanState(mean=mean, cov=cov)


def kalman_filter(model: StateSpaceModel, data: DataRecord) -> list[KalmanState]:
    """Run the Kalman recursion and return the filtering distributions mu_0..mu_N."""
    states = [KalmanState.from_gaussian(model.init)]
    for n, y in enumerate(data.observations):
        states.append(kalman_update(kalman_predict(states[-1], model), y, model))
        logger.debug(f"Kalman step {n + 1}: mean={states[-1].mean}, trace(cov)={np.trace(states[-1].cov):.3e}")
    return states
