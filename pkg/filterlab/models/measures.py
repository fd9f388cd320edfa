"""
Probability-measure types, sampling, moment estimation and the Gaussian projection.

Covariances use the population convention: sum_j w_j (v_j - mean)(v_j - mean)^T, i.e. division
by J (not J - 1) for equal weights.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from filterlab.exceptions import DegenerateEnsembleError, DimensionMismatchError, SingularCovarianceError
from filterlab.models.grid import GridDensity
from filterlab.utils.linalg import psd_sqrt, repair_psd, symmetrize

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOLERANCE = 1e-12
MAX_SEED = 2**64


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    """A Gaussian N(mean, cov); the covariance is symmetrized and checked to be PSD on construction."""

    mean: np.ndarray
    """Mean vector of dimension r."""

    cov: np.ndarray
    """Covariance matrix of shape (r, r)."""

    degenerate: bool = field(init=False, default=False)
    """True if the covariance is singular within the PSD tolerance."""

    def __post_init__(self) -> None:
        mean = np.array(np.atleast_1d(self.mean), dtype=float)
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DimensionMismatchError(f"Mean of shape {mean.shape} does not match covariance of shape {cov.shape}.")
        cov, singular = repair_psd(cov)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "degenerate", singular)

    @property
    def dim(self) -> int:
        """Dimension r of the underlying space."""
        return self.mean.size

    def density(self, points: np.ndarray) -> np.ndarray:
        """Probability density at points of shape (n, r); requires a nonsingular covariance."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            points = points.reshape(-1, self.dim)
        try:
            lower = scipy.linalg.cholesky(self.cov, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularCovarianceError("Density of a degenerate Gaussian is not defined.") from exc
        whitened = scipy.linalg.solve_triangular(lower, (points - self.mean).T, lower=True)
        log_det = 2.0 * np.sum(np.log(np.diag(lower)))
        log_density = -0.5 * np.sum(whitened**2, axis=0) - 0.5 * (self.dim * np.log(2.0 * np.pi) + log_det)
        return np.exp(log_density)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """A weighted sum of Dirac masses; weights default to uniform 1/J."""

    particles: np.ndarray
    """Particle locations, shape (J, r). A one-dimensional array is read as J scalar particles."""

    weights: np.ndarray | None = None
    """Nonnegative weights summing to one, shape (J,)."""

    def __post_init__(self) -> None:
        particles = np.array(self.particles, dtype=float)
        if particles.ndim == 1:
            particles = particles[:, None]
        if particles.ndim != 2 or particles.shape[0] < 1:
            raise DimensionMismatchError(f"Particles must have shape (J, r) with J >= 1, got {particles.shape}.")
        count = particles.shape[0]
        if self.weights is None:
            weights = np.full(count, 1.0 / count)
        else:
            weights = np.array(self.weights, dtype=float).ravel()
        if weights.shape != (count,):
            raise DimensionMismatchError(f"Expected {count} weights, got {weights.shape}.")
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("Weights must be finite and nonnegative.")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValueError(f"Weights must sum to one, got {weights.sum():.15f}.")
        particles.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        """Number of particles J."""
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        """Dimension r of the particles."""
        return self.particles.shape[1]

    @property
    def is_equally_weighted(self) -> bool:
        """True if all weights are identical."""
        assert self.weights is not None
        return bool(np.all(self.weights == self.weights[0]))

    def expectation(self, values: np.ndarray) -> float:
        """Weighted average of per-particle values."""
        assert self.weights is not None
        if self.is_equally_weighted:
            return float(np.mean(values))
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class RngStream:
    """
    A reproducible random stream identified by a seed and a path of integer stream ids.

    Streams are backed by the Philox counter-based generator keyed through a ``SeedSequence``,
    so equal (seed, stream_id) pairs always produce identical draws and distinct ids give
    independent sequences. Every call to ``generator()`` restarts the stream; use ``child``
    to obtain fresh substreams.
    """

    seed: int
    stream_id: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < MAX_SEED:
            raise ValueError(f"Seed must be an unsigned 64-bit integer, got {self.seed}.")
        if any(int(index) < 0 for index in self.stream_id):
            raise ValueError(f"Stream ids must be nonnegative, got {self.stream_id}.")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream_id", tuple(int(index) for index in self.stream_id))

    def child(self, *index: int) -> RngStream:
        """Derive the substream at ``stream_id + index``."""
        return RngStream(self.seed, self.stream_id + tuple(index))

    def generator(self) -> np.random.Generator:
        """A fresh numpy generator positioned at the start of this stream."""
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(sequence))


def sample(g: GaussianMeasure, n: int, rng: RngStream) -> EmpiricalMeasure:
    """Draw ``n`` i.i.d. equally weighted particles from a Gaussian."""
    if n < 1:
        raise ValueError(f"Sample size must be at least 1, got {n}.")
    draws = rng.generator().standard_normal((n, g.dim))
    return EmpiricalMeasure(particles=g.mean + draws @ psd_sqrt(g.cov).T)


def empirical_moments(m: EmpiricalMeasure, with_covariance: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Weighted mean and population covariance of an empirical measure."""
    assert m.weights is not None
    if m.is_equally_weighted:
        mean = m.particles.mean(axis=0)
    else:
        mean = m.weights @ m.particles
    if not with_covariance:
        return mean, None
    if m.size < 2:
        raise DegenerateEnsembleError(f"A covariance needs at least two particles, got J={m.size}.")
    centered = m.particles - mean
    if m.is_equally_weighted:
        cov = centered.T @ centered / m.size
    else:
        cov = (centered * m.weights[:, None]).T @ centered
    return mean, symmetrize(cov)


def gaussian_project(m: EmpiricalMeasure | GridDensity) -> GaussianMeasure:
    """
    Moment-matching projection onto Gaussians, the KL-optimal Gaussian N(mean, cov).

    A singular covariance is PSD-clipped and reported through ``GaussianMeasure.degenerate``.
    """
    if isinstance(m, GridDensity):
        mean, cov = m.moments()
    else:
        mean, cov = empirical_moments(m)
    projection = GaussianMeasure(mean, cov)
    if projection.degenerate:
        logger.warning("Gaussian projection has a singular covariance; returning the PSD-clipped Gaussian.")
    return projection
