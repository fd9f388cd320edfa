"""
The true filter mu_{n+1} = B(Q P mu_n; y) by quadrature on a one-dimensional grid (d = K = 1).

P is applied as a Gaussian-kernel integral with trapezoid weights, B o Q as a pointwise
likelihood multiplication. After each update the density is moved to [m - 10 s, m + 10 s] of
its own moments by monotone cubic (PCHIP) interpolation.
"""
from __future__ import annotations

import logging

import numpy as np
from scipy.interpolate import PchipInterpolator

from filterlab.exceptions import DimensionMismatchError, DomainTooSmallError, LikelihoodUnderflowError
from filterlab.models.grid import GridDensity
from filterlab.models.measures import GaussianMeasure
from filterlab.models.state_space import DataRecord, StateSpaceModel, VectorMap

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 4001
DEFAULT_JOINT_GRID_POINTS = 401
GRID_HALF_WIDTH = 10.0
OFF_GRID_MASS_TOLERANCE = 1e-3
MIN_NORMALIZER = 1e-300
KERNEL_BLOCK_ROWS = 256


def _trapezoid_weights(n_points: int, spacing: float) -> np.ndarray:
    weights = np.full(n_points, spacing)
    weights[[0, -1]] *= 0.5
    return weights


def _interval(mean: float, std: float, width: float) -> tuple[float, float]:
    if not std > 0.0:
        raise DomainTooSmallError(f"Cannot place a grid around a density with standard deviation {std}.")
    return mean - width * std, mean + width * std


def _scalar_map(function: VectorMap, nodes: np.ndarray) -> np.ndarray:
    return np.asarray(function(nodes[:, None]), dtype=float)[:, 0]


def tabulate_gaussian(
    g: GaussianMeasure,
    n_points: int = DEFAULT_GRID_POINTS,
    width: float = GRID_HALF_WIDTH,
) -> GridDensity:
    """Tabulate a one-dimensional Gaussian on [m - width s, m + width s]."""
    if g.dim != 1:
        raise DimensionMismatchError(f"Grid tabulation needs a one-dimensional Gaussian, got dimension {g.dim}.")
    lo, hi = _interval(float(g.mean[0]), float(np.sqrt(g.cov[0, 0])), width)
    return GridDensity.tabulate(lo, hi, n_points, g.density)


def grid_predict(
    p: GridDensity,
    model: StateSpaceModel,
    n_points: int | None = None,
    bounds: tuple[float, float] | None = None,
    normalize: bool = True,
    width: float = GRID_HALF_WIDTH,
) -> GridDensity:
    """
    Apply the prediction operator P by trapezoid quadrature of the Gaussian transition kernel.

    The output grid covers the predicted mean +- ``width`` predicted standard deviations unless
    explicit ``bounds`` are given. Raises ``DomainTooSmallError`` if more than 1e-3 of the mass
    falls off the output grid.
    """
    model.require_scalar("grid_predict")
    model.require_stochastic("grid_predict")
    nodes = p.nodes
    mapped = _scalar_map(model.psi, nodes)
    sigma2 = float(model.sigma[0, 0])
    masses = _trapezoid_weights(nodes.size, p.spacing()) * p.values
    input_mass = float(masses.sum())

    if bounds is None:
        predicted_mean = float(np.dot(masses, mapped) / input_mass)
        predicted_var = float(np.dot(masses, (mapped - predicted_mean) ** 2) / input_mass) + sigma2
        bounds = _interval(predicted_mean, float(np.sqrt(predicted_var)), width)
    out_points = n_points or p.n_points[0]
    out_nodes = np.linspace(bounds[0], bounds[1], out_points)

    values = np.empty(out_points)
    scale = 1.0 / np.sqrt(2.0 * np.pi * sigma2)
    for start in range(0, out_points, KERNEL_BLOCK_ROWS):
        rows = out_nodes[start : start + KERNEL_BLOCK_ROWS]
        kernel = np.exp(-0.5 * (rows[:, None] - mapped[None, :]) ** 2 / sigma2)
        values[start : start + KERNEL_BLOCK_ROWS] = scale * (kernel @ masses)

    predicted = GridDensity.on_interval(bounds[0], bounds[1], values)
    lost = (input_mass - predicted.mass) / input_mass
    logger.debug(f"grid_predict: off-grid mass {lost:.3e}")
    if lost > OFF_GRID_MASS_TOLERANCE:
        raise DomainTooSmallError(f"Prediction lost {lost:.3e} of its mass off the grid [{bounds[0]:.4g}, {bounds[1]:.4g}].")
    return predicted.normalized() if normalize else predicted


def grid_update(p: GridDensity, y: np.ndarray | float, model: StateSpaceModel) -> GridDensity:
    """Apply L = B o Q: multiply by exp(-|y - h(u)|^2_Gamma / 2) and renormalize on the same grid."""
    model.require_scalar("grid_update")
    model.require_stochastic("grid_update")
    y_value = float(np.asarray(y, dtype=float).ravel()[0])
    residuals = y_value - _scalar_map(model.h, p.nodes)
    log_likelihood = -0.5 * residuals**2 / float(model.gamma[0, 0])
    peak = float(np.max(log_likelihood))
    unnormalized = p.values * np.exp(log_likelihood - peak)
    scaled_normalizer = GridDensity.on_interval(p.lo[0], p.hi[0], unnormalized).mass
    if scaled_normalizer <= 0.0 or peak + np.log(scaled_normalizer) < np.log(MIN_NORMALIZER):
        raise LikelihoodUnderflowError(f"Likelihood normalizer underflowed for observation y={y_value:.6g}.")
    return GridDensity.on_interval(p.lo[0], p.hi[0], unnormalized / scaled_normalizer)


def regrid(p: GridDensity, n_points: int | None = None, width: float = GRID_HALF_WIDTH) -> GridDensity:
    """Move a one-dimensional density onto [m - width s, m + width s] by PCHIP interpolation."""
    mean, cov = p.moments()
    lo, hi = _interval(float(mean[0]), float(np.sqrt(cov[0, 0])), width)
    new_nodes = np.linspace(lo, hi, n_points or p.n_points[0])
    interpolated = PchipInterpolator(p.nodes, p.values, extrapolate=False)(new_nodes)
    values = np.clip(np.nan_to_num(interpolated, nan=0.0), 0.0, None)
    return GridDensity.on_interval(lo, hi, values).normalized()


def grid_filter(
    model: StateSpaceModel,
    data: DataRecord,
    n_points: int = DEFAULT_GRID_POINTS,
    width: float = GRID_HALF_WIDTH,
) -> list[GridDensity]:
    """Run the grid recursion and return the tabulated filtering distributions mu_0..mu_N."""
    model.require_scalar("grid_filter")
    model.require_stochastic("grid_filter")
    densities = [tabulate_gaussian(model.init, n_points, width)]
    for n, y in enumerate(data.observations):
        predicted = grid_predict(densities[-1], model, width=width)
        densities.append(regrid(grid_update(predicted, y, model), n_points, width))
        logger.debug(f"grid_filter step {n + 1} done")
    return densities


def lift_to_joint_grid(
    p: GridDensity,
    model: StateSpaceModel,
    n_points: int = DEFAULT_JOINT_GRID_POINTS,
    width: float = GRID_HALF_WIDTH,
) -> GridDensity:
    """
    Apply the lift Q to a one-dimensional density: the joint density p(u) N(y; h(u), Gamma) on a 2D (u, y) grid.

    The u axis is resampled to ``n_points`` nodes by PCHIP; the y axis covers the data mean
    +- ``width`` data standard deviations. The conditional of y given u is evaluated in closed form.
    """
    model.require_scalar("lift_to_joint_grid")
    model.require_stochastic("lift_to_joint_grid")
    u_nodes = np.linspace(p.lo[0], p.hi[0], n_points)
    u_values = np.clip(PchipInterpolator(p.nodes, p.values)(u_nodes), 0.0, None)
    marginal = GridDensity.on_interval(p.lo[0], p.hi[0], u_values).normalized()

    gamma2 = float(model.gamma[0, 0])
    mapped = _scalar_map(model.h, u_nodes)
    y_mean = marginal.expectation(lambda points: _scalar_map(model.h, points[:, 0]))
    y_var = marginal.expectation(lambda points: (_scalar_map(model.h, points[:, 0]) - y_mean) ** 2) + gamma2
    y_lo, y_hi = _interval(y_mean, float(np.sqrt(y_var)), width)
    y_nodes = np.linspace(y_lo, y_hi, n_points)

    conditional = np.exp(-0.5 * (y_nodes[None, :] - mapped[:, None]) ** 2 / gamma2) / np.sqrt(2.0 * np.pi * gamma2)
    joint = GridDensity(lo=(p.lo[0], y_lo), hi=(p.hi[0], y_hi), values=marginal.values[:, None] * conditional)
    lost = 1.0 - joint.mass
    if lost > OFF_GRID_MASS_TOLERANCE:
        raise DomainTooSmallError(f"Joint (u, y) grid lost {lost:.3e} of its mass.")
    return joint.normalized()
