"""
The ensemble Kalman filter in particle form and its mean-field Gaussian recursion.

One step forecasts every member through Psi + xi, perturbs the predicted observations
y_hat_j = h(v_hat_j) + eta_j and moves every member with a common gain

    v_j = v_hat_j + K (y_dagger - y_hat_j),   K = C^{vy} (C^{yy})^{-1}.

Covariances are assembled from J x d and J x K anomaly matrices (population convention), so
no d x d ensemble covariance is ever formed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from filterlab.application.filters.kalman import KalmanState, kalman_predict
from filterlab.exceptions import DegenerateEnsembleError, DimensionMismatchError
from filterlab.models.measures import EmpiricalMeasure, GaussianMeasure, RngStream, empirical_moments, sample
from filterlab.models.state_space import DataRecord, StateSpaceModel
from filterlab.utils.linalg import spd_right_solve

logger = logging.getLogger(__name__)

INITIAL_SAMPLE_STREAM = 0
FORECAST_STREAM = 1

MEAN_FIELD_LABEL = "mean-field (particle-approximated)"


class GainVariant(str, Enum):
    """How C^{yy} is assembled from the forecast ensemble."""

    EMPIRICAL_NOISE = "empirical-noise"
    """Covariances of the perturbed pairs (v_hat, y_hat); Gamma is learned from the drawn eta."""

    DIRECT_GAMMA = "direct-gamma"
    """C^{vy} = C^{vh}, C^{yy} = C^{hh} + Gamma."""


def _anomalies(samples: np.ndarray) -> np.ndarray:
    """Centered samples scaled by 1/sqrt(J), so that D^T D is the population covariance."""
    return (samples - samples.mean(axis=0)) / np.sqrt(samples.shape[0])


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Equally weighted EnKF members at time n."""

    members: np.ndarray
    """Shape (J, d)."""

    step: int

    def __post_init__(self) -> None:
        members = np.asarray(self.members, dtype=float)
        if members.ndim == 1:
            members = members[:, None]
        if members.ndim != 2:
            raise DimensionMismatchError(f"Ensemble members must have shape (J, d), got {members.shape}.")
        if members.shape[0] < 2:
            raise DegenerateEnsembleError(f"An ensemble needs J >= 2 members, got {members.shape[0]}.")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return self.members.shape[0]

    def as_measure(self) -> EmpiricalMeasure:
        return EmpiricalMeasure(particles=self.members)


@dataclass(frozen=True, eq=False)
class JointEnsemble:
    """Forecast pairs (v_hat_j, y_hat_j), the sampled version of the joint law QP mu."""

    states: np.ndarray
    """Shape (J, d)."""

    observations: np.ndarray
    """Shape (J, K), perturbed predicted observations."""

    def __post_init__(self) -> None:
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        observations = np.atleast_2d(np.asarray(self.observations, dtype=float))
        if states.shape[0] != observations.shape[0]:
            raise DimensionMismatchError(
                f"Joint ensemble has {states.shape[0]} states but {observations.shape[0]} observations.",
            )
        if states.shape[0] < 2:
            raise DegenerateEnsembleError("A joint ensemble needs J >= 2 pairs.")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "observations", observations)

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def as_measure(self) -> EmpiricalMeasure:
        """Equally weighted empirical measure on R^{d+K}."""
        return EmpiricalMeasure(particles=np.hstack([self.states, self.observations]))


@dataclass(frozen=True, eq=False)
class GainSpec:
    """The gain of one analysis step together with the covariances it was assembled from."""

    variant: GainVariant
    gain: np.ndarray
    """K, shape (d, K)."""

    c_vy: np.ndarray
    c_yy: np.ndarray


def enkf_gain(je: JointEnsemble, model: StateSpaceModel, variant: GainVariant | str) -> GainSpec:
    """Assemble C^{vy}, C^{yy} from the forecast pairs and solve for K = C^{vy} (C^{yy})^{-1}."""
    variant = GainVariant(variant)
    state_anomalies = _anomalies(je.states)
    if variant is GainVariant.EMPIRICAL_NOISE:
        observation_anomalies = _anomalies(je.observations)
        c_yy = observation_anomalies.T @ observation_anomalies
    else:
        model.require_stochastic("enkf_gain")
        observation_anomalies = _anomalies(np.atleast_2d(np.asarray(model.h(je.states), dtype=float)))
        c_yy = observation_anomalies.T @ observation_anomalies + model.gamma
    c_vy = state_anomalies.T @ observation_anomalies
    gain = spd_right_solve(c_vy, c_yy, "C^yy")
    return GainSpec(variant=variant, gain=gain, c_vy=c_vy, c_yy=c_yy)


def enkf_forecast(
    e: Ensemble,
    model: StateSpaceModel,
    rng: RngStream,
    state_noise: np.ndarray | None = None,
    observation_noise: np.ndarray | None = None,
) -> JointEnsemble:
    """
    Forecast pairs v_hat_j = Psi(v_j) + xi_j and y_hat_j = h(v_hat_j) + eta_j.

    ``state_noise`` and ``observation_noise`` replace the random draws when given.
    """
    model.require_stochastic("enkf_forecast")
    generator = rng.generator()
    xi = model.state_noise(generator, (e.size,)) if state_noise is None else np.asarray(state_noise, dtype=float)
    eta = model.observation_noise(generator, (e.size,)) if observation_noise is None else np.asarray(observation_noise, dtype=float)
    states = np.asarray(model.psi(e.members), dtype=float) + xi.reshape(e.size, model.dim_state)
    observations = np.asarray(model.h(states), dtype=float).reshape(e.size, model.dim_obs)
    return JointEnsemble(states=states, observations=observations + eta.reshape(e.size, model.dim_obs))


def enkf_analysis(je: JointEnsemble, y: np.ndarray, gain: GainSpec, step: int) -> Ensemble:
    """Move every forecast member with the common gain."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (je.observations.shape[1],):
        raise DimensionMismatchError(f"Observation must have dimension {je.observations.shape[1]}, got {y.shape}.")
    return Ensemble(members=je.states + (y - je.observations) @ gain.gain.T, step=step)


def enkf_step(
    e: Ensemble,
    y: np.ndarray,
    model: StateSpaceModel,
    variant: GainVariant | str,
    rng: RngStream,
    *,
    state_noise: np.ndarray | None = None,
    observation_noise: np.ndarray | None = None,
) -> Ensemble:
    """One forecast/analysis cycle of the particle-form EnKF."""
    joint = enkf_forecast(e, model, rng, state_noise=state_noise, observation_noise=observation_noise)
    return enkf_analysis(joint, y, enkf_gain(joint, model, variant), step=e.step + 1)


def enkf_filter(
    model: StateSpaceModel,
    data: DataRecord,
    ensemble_size: int,
    variant: GainVariant | str,
    rng: RngStream,
) -> list[Ensemble]:
    """Run the EnKF from J i.i.d. draws of the initial law; returns the ensembles at steps 0..N."""
    initial = sample(model.init, ensemble_size, rng.child(INITIAL_SAMPLE_STREAM))
    ensembles = [Ensemble(members=initial.particles, step=0)]
    for n, y in enumerate(data.observations):
        ensembles.append(enkf_step(ensembles[-1], y, model, variant, rng.child(FORECAST_STREAM, n)))
    logger.debug(f"EnKF ({GainVariant(variant).value}, J={ensemble_size}) finished {data.horizon} steps")
    return ensembles


def lift_gaussian(g: GaussianMeasure, model: StateSpaceModel) -> GaussianMeasure:
    """Closed-form lift Q for linear h: the joint law of (v, H v + eta) on R^{d+K}."""
    model.require_linear("lift_gaussian", psi=False)
    h_matrix = model.h_matrix
    assert h_matrix is not None
    cross = g.cov @ h_matrix.T
    cov = np.block([[g.cov, cross], [cross.T, h_matrix @ cross + model.gamma]])
    return GaussianMeasure(np.concatenate([g.mean, h_matrix @ g.mean]), cov)


def transport_apply(
    joint: GaussianMeasure | EmpiricalMeasure | JointEnsemble,
    y: np.ndarray,
    dim_state: int,
) -> GaussianMeasure | EmpiricalMeasure:
    """
    Apply the transport v + C^{vy} (C^{yy})^{-1} (y - y') of a joint measure on R^{d+K}.

    A Gaussian input returns the exact Gaussian pushforward. Samples are moved atom by atom
    with the gain of their own covariances, which is the pushforward T.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if isinstance(joint, JointEnsemble):
        joint = joint.as_measure()
    if isinstance(joint, GaussianMeasure):
        mean, cov = joint.mean, joint.cov
    else:
        mean, cov = empirical_moments(joint)
        assert cov is not None
    if mean.size != dim_state + y.size:
        raise DimensionMismatchError(f"Joint dimension {mean.size} != d + K = {dim_state} + {y.size}.")
    states, observations = slice(0, dim_state), slice(dim_state, None)
    c_vy = cov[states, observations]
    gain = spd_right_solve(c_vy, cov[observations, observations], "C^yy")
    if isinstance(joint, GaussianMeasure):
        return GaussianMeasure(
            mean[states] + gain @ (y - mean[observations]),
            cov[states, states] - gain @ c_vy.T,
        )
    moved = joint.particles[:, states] + (y - joint.particles[:, observations]) @ gain.T
    return EmpiricalMeasure(particles=moved, weights=joint.weights)


def mf_enkf_gaussian_filter(model: StateSpaceModel, data: DataRecord) -> list[KalmanState]:
    """The mean-field EnKF for linear models, mu_{n+1} = T(Q P mu_n; y_{n+1}), in closed form."""
    model.require_linear("mf_enkf_gaussian_filter")
    states = [KalmanState.from_gaussian(model.init)]
    for y in data.observations:
        joint = lift_gaussian(kalman_predict(states[-1], model).as_gaussian(), model)
        posterior = transport_apply(joint, y, model.dim_state)
        assert isinstance(posterior, GaussianMeasure)
        states.append(KalmanState.from_gaussian(posterior))
    return states
