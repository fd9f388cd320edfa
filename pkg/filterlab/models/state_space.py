"""
The state-space filtering problem and forward simulation of truth and data.

    state:  v_{n+1} = Psi(v_n) + xi_n,        xi_n ~ N(0, Sigma)
    data:   y_{n+1} = h(v_{n+1}) + eta_{n+1},  eta_{n+1} ~ N(0, Gamma)

The maps ``psi`` and ``h`` act row-wise on arrays of shape (n, d) and also accept a single vector.
Observation index i holds y_{i+1}: data start at n = 1.
"""
from __future__ import annotations

import dataclasses
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from filterlab.exceptions import DimensionMismatchError, NotPositiveSemiDefiniteError, UnsupportedModelError
from filterlab.models.measures import GaussianMeasure, RngStream, sample
from filterlab.utils.linalg import cholesky, is_spd, psd_sqrt

VectorMap = Callable[[np.ndarray], np.ndarray]

INITIAL_STATE_STREAM = 0
STATE_NOISE_STREAM = 1
OBSERVATION_NOISE_STREAM = 2


@dataclass(frozen=True)
class BoundednessConstants:
    """Sup-norm and Lipschitz bounds of Psi and h, when they are finite."""

    psi_sup: float
    h_sup: float
    h_lipschitz: float


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """One filtering problem: dynamics, observation map, noise covariances and initial law."""

    name: str
    dim_state: int
    dim_obs: int
    psi: VectorMap
    h: VectorMap
    sigma: np.ndarray
    """State noise covariance, shape (d, d)."""

    gamma: np.ndarray
    """Observation noise covariance, shape (K, K)."""

    init: GaussianMeasure
    """Law of v_0."""

    psi_matrix: np.ndarray | None = None
    """A with psi(v) = A v when the dynamics are linear."""

    h_matrix: np.ndarray | None = None
    """H with h(v) = H v when the observation map is linear."""

    noise_free: bool = False
    """Evaluate Psi and h without noise. Only for testing deterministic parts; filters reject it."""

    bounds: BoundednessConstants | None = None
    """Analytic bounds of Psi and h, None when a map is unbounded."""

    params: dict[str, Any] = field(default_factory=dict)
    """Parameters the model was built from."""

    def __post_init__(self) -> None:
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if sigma.shape != (self.dim_state, self.dim_state):
            raise DimensionMismatchError(f"Sigma must be {self.dim_state}x{self.dim_state}, got {sigma.shape}.")
        if gamma.shape != (self.dim_obs, self.dim_obs):
            raise DimensionMismatchError(f"Gamma must be {self.dim_obs}x{self.dim_obs}, got {gamma.shape}.")
        if self.init.dim != self.dim_state:
            raise DimensionMismatchError(f"Initial law has dimension {self.init.dim}, expected {self.dim_state}.")
        if self.psi_matrix is not None and np.shape(self.psi_matrix) != (self.dim_state, self.dim_state):
            raise DimensionMismatchError(f"A must be {self.dim_state}x{self.dim_state}.")
        if self.h_matrix is not None and np.shape(self.h_matrix) != (self.dim_obs, self.dim_state):
            raise DimensionMismatchError(f"H must be {self.dim_obs}x{self.dim_state}.")
        if not self.noise_free:
            for label, matrix in (("Sigma", sigma), ("Gamma", gamma)):
                if not is_spd(matrix):
                    raise NotPositiveSemiDefiniteError(f"{label} must be strictly positive definite.")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", gamma)

    @property
    def psi_linear(self) -> bool:
        """True if Psi(v) = A v."""
        return self.psi_matrix is not None

    @property
    def h_linear(self) -> bool:
        """True if h(v) = H v."""
        return self.h_matrix is not None

    @property
    def is_linear(self) -> bool:
        """True if both Psi and h are linear."""
        return self.psi_linear and self.h_linear

    @property
    def is_scalar(self) -> bool:
        """True if d = K = 1."""
        return self.dim_state == 1 and self.dim_obs == 1

    @property
    def sigma_sqrt(self) -> np.ndarray:
        """Square root of Sigma used to draw state noise."""
        return psd_sqrt(self.sigma)

    @property
    def gamma_sqrt(self) -> np.ndarray:
        """Square root of Gamma used to draw observation noise."""
        return psd_sqrt(self.gamma)

    @property
    def gamma_cholesky(self) -> np.ndarray:
        """Lower Cholesky factor of Gamma, used by likelihoods and gains."""
        return cholesky(self.gamma, "Gamma")

    def without_noise(self) -> StateSpaceModel:
        """Copy of the model flagged noise-free, for checking deterministic parts."""
        return dataclasses.replace(self, noise_free=True)

    def require_stochastic(self, algorithm: str) -> None:
        """Raise if a filter is handed a noise-free model, since Gamma^{-1} must exist."""
        if self.noise_free:
            raise UnsupportedModelError(f"{algorithm} requires Sigma and Gamma; model '{self.name}' is flagged noise-free.")

    def require_linear(self, algorithm: str, psi: bool = True, h: bool = True) -> None:
        """Raise if the requested parts of the model are not linear."""
        if (psi and not self.psi_linear) or (h and not self.h_linear):
            raise UnsupportedModelError(f"{algorithm} requires a linear model; '{self.name}' is nonlinear.")

    def require_scalar(self, algorithm: str) -> None:
        """Raise unless d = K = 1."""
        if not self.is_scalar:
            raise UnsupportedModelError(
                f"{algorithm} supports d = K = 1 only; '{self.name}' has d={self.dim_state}, K={self.dim_obs}.",
            )

    def check_states(self, v: np.ndarray) -> np.ndarray:
        """Validate the trailing dimension of a state vector or batch of states."""
        v = np.asarray(v, dtype=float)
        if v.ndim == 0 or v.shape[-1] != self.dim_state:
            raise DimensionMismatchError(f"Expected states of dimension {self.dim_state}, got shape {v.shape}.")
        return v

    def state_noise(self, generator: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        """Draws of xi ~ N(0, Sigma) with the given leading shape."""
        if self.noise_free:
            return np.zeros((*shape, self.dim_state))
        return generator.standard_normal((*shape, self.dim_state)) @ self.sigma_sqrt.T

    def observation_noise(self, generator: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        """Draws of eta ~ N(0, Gamma) with the given leading shape."""
        if self.noise_free:
            return np.zeros((*shape, self.dim_obs))
        return generator.standard_normal((*shape, self.dim_obs)) @ self.gamma_sqrt.T


@dataclass(frozen=True, eq=False)
class DataRecord:
    """A simulated truth trajectory v_0..v_N and its observations y_1..y_N."""

    truth: np.ndarray
    """States, shape (N + 1, d)."""

    observations: np.ndarray
    """Observations, shape (N, K); index i holds y_{i+1}."""

    seed: int

    def __post_init__(self) -> None:
        truth = np.atleast_2d(np.asarray(self.truth, dtype=float))
        observations = np.asarray(self.observations, dtype=float)
        if observations.ndim == 1:
            observations = observations.reshape(-1, 1) if observations.size else observations.reshape(0, 1)
        if truth.shape[0] != observations.shape[0] + 1:
            raise DimensionMismatchError(
                f"Expected N + 1 = {observations.shape[0] + 1} states, got {truth.shape[0]}.",
            )
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "observations", observations)

    @property
    def horizon(self) -> int:
        """Number of observations N."""
        return self.observations.shape[0]

    def as_dict(self) -> dict[str, Any]:
        """JSON-ready representation for replay."""
        return {
            "seed": self.seed,
            "truth": self.truth.tolist(),
            "observations": self.observations.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> DataRecord:
        """Inverse of ``as_dict``."""
        return cls(
            truth=np.asarray(payload["truth"], dtype=float),
            observations=np.asarray(payload["observations"], dtype=float),
            seed=int(payload["seed"]),
        )


def step_state(model: StateSpaceModel, v: np.ndarray, rng: RngStream) -> np.ndarray:
    """Apply v -> Psi(v) + xi to a state or a batch of states."""
    v = model.check_states(v)
    noise = model.state_noise(rng.generator(), v.shape[:-1])
    return np.asarray(model.psi(v), dtype=float) + noise


def observe(model: StateSpaceModel, v: np.ndarray, rng: RngStream) -> np.ndarray:
    """Apply v -> h(v) + eta to a state or a batch of states."""
    v = model.check_states(v)
    noise = model.observation_noise(rng.generator(), v.shape[:-1])
    return np.asarray(model.h(v), dtype=float) + noise


def simulate(model: StateSpaceModel, horizon: int, rng: RngStream) -> DataRecord:
    """Simulate a truth trajectory and its data; v_0, xi and eta use disjoint substreams."""
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}.")
    states = [sample(model.init, 1, rng.child(INITIAL_STATE_STREAM)).particles[0]]
    observations = []
    for n in range(horizon):
        states.append(step_state(model, states[-1], rng.child(STATE_NOISE_STREAM, n)))
        observations.append(observe(model, states[-1], rng.child(OBSERVATION_NOISE_STREAM, n)))
    return DataRecord(truth=np.array(states), observations=np.array(observations), seed=rng.seed)
