"""
The bootstrap particle filter mu^PF_{n+1} = L(S^J P mu^PF_n; y_{n+1}).

Every step resamples J ancestors i.i.d. from the current weighted measure (multinomial), pushes
them through Psi + xi and reweights by the Gaussian likelihood computed in log space.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from filterlab.exceptions import DimensionMismatchError, LikelihoodUnderflowError
from filterlab.models.measures import WEIGHT_SUM_TOLERANCE, EmpiricalMeasure, RngStream, sample
from filterlab.models.state_space import DataRecord, StateSpaceModel
from filterlab.utils.linalg import mahalanobis_squared

logger = logging.getLogger(__name__)

INITIAL_SAMPLE_STREAM = 0
PROPAGATION_STREAM = 1


@dataclass(frozen=True, eq=False)
class PfState:
    """Particles and weights of mu^PF_n."""

    particles: np.ndarray
    """Particle locations, shape (J, d)."""

    weights: np.ndarray
    """Normalized weights, shape (J,)."""

    step: int
    """Time index n."""

    def __post_init__(self) -> None:
        particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.shape != (particles.shape[0],):
            raise DimensionMismatchError(f"Expected {particles.shape[0]} weights, got {weights.shape}.")
        if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValueError("Particle weights must be nonnegative and sum to one.")
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        """Number of particles J."""
        return self.particles.shape[0]

    def as_measure(self) -> EmpiricalMeasure:
        """The weighted empirical measure of the particles."""
        return EmpiricalMeasure(particles=self.particles, weights=self.weights)


@dataclass(frozen=True, eq=False)
class PredictedParticles:
    """Particles after resampling and propagation, with the ancestor index of each."""

    particles: np.ndarray
    ancestors: np.ndarray


@dataclass(frozen=True)
class EffectiveSampleSize:
    """Collapse diagnostics of a weight vector."""

    ess: float
    """1 / sum w_j^2, in [1, J]."""

    max_weight: float


def pf_resample_predict(s: PfState, model: StateSpaceModel, rng: RngStream) -> PredictedParticles:
    """Draw J ancestors i.i.d. from the weighted particles and propagate them through Psi + xi."""
    model.require_stochastic("pf_resample_predict")
    generator = rng.generator()
    ancestors = generator.choice(s.size, size=s.size, replace=True, p=s.weights)
    propagated = np.asarray(model.psi(s.particles[ancestors]), dtype=float)
    particles = propagated + model.state_noise(generator, (s.size,))
    return PredictedParticles(particles=particles, ancestors=ancestors)


def normalize_log_weights(log_weights: np.ndarray) -> np.ndarray:
    """Normalize weights given in log space, subtracting the maximum first."""
    log_weights = np.asarray(log_weights, dtype=float)
    peak = np.max(log_weights)
    if not np.isfinite(peak):
        raise LikelihoodUnderflowError("Every log-likelihood is -inf; the observation is inconsistent with all particles.")
    unnormalized = np.exp(log_weights - peak)
    return unnormalized / unnormalized.sum()


def log_likelihoods(particles: np.ndarray, y: np.ndarray, model: StateSpaceModel) -> np.ndarray:
    """log l_j = -|y - h(v_j)|^2_Gamma / 2 for every particle."""
    particles = model.check_states(np.atleast_2d(particles))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.dim_obs,):
        raise DimensionMismatchError(f"Observation must have dimension {model.dim_obs}, got {y.shape}.")
    residuals = y - np.asarray(model.h(particles), dtype=float)
    return -0.5 * mahalanobis_squared(residuals, model.gamma_cholesky)


def pf_weights(particles: np.ndarray, y: np.ndarray, model: StateSpaceModel) -> np.ndarray:
    """Normalized likelihood weights w_j = l_j / sum_m l_m."""
    model.require_stochastic("pf_weights")
    return normalize_log_weights(log_likelihoods(particles, y, model))


def effective_sample_size(weights: np.ndarray) -> EffectiveSampleSize:
    """ESS = 1 / sum w_j^2 together with the largest weight."""
    weights = np.asarray(weights, dtype=float)
    ess = float(np.clip(1.0 / np.sum(weights**2), 1.0, weights.size))
    return EffectiveSampleSize(ess=ess, max_weight=float(np.max(weights)))


def pf_filter(model: StateSpaceModel, data: DataRecord, ensemble_size: int, rng: RngStream) -> list[PfState]:
    """Run the bootstrap particle filter and return mu^PF_0..mu^PF_N."""
    if ensemble_size < 2:
        raise ValueError(f"The particle filter needs J >= 2, got {ensemble_size}.")
    model.require_stochastic("pf_filter")
    initial = sample(model.init, ensemble_size, rng.child(INITIAL_SAMPLE_STREAM))
    states = [PfState(particles=initial.particles, weights=np.full(ensemble_size, 1.0 / ensemble_size), step=0)]
    for n, y in enumerate(data.observations):
        predicted = pf_resample_predict(states[-1], model, rng.child(PROPAGATION_STREAM, n))
        weights = pf_weights(predicted.particles, y, model)
        states.append(PfState(particles=predicted.particles, weights=weights, step=n + 1))
        logger.debug(f"pf step {n + 1}: ESS={effective_sample_size(weights).ess:.1f} of {ensemble_size}")
    return states
