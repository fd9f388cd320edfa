"""Densities tabulated on uniform rectangular grids, integrated with the trapezoid rule."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from filterlab.exceptions import DimensionMismatchError
from filterlab.utils.linalg import symmetrize

NORMALIZATION_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class GridDensity:
    """
    A nonnegative density on a uniform grid over the box ``[lo, hi]``.

    One-dimensional grids carry the filtering distributions of the exact filter; two-dimensional
    grids carry joint (state, data) densities.
    """

    lo: tuple[float, ...]
    """Lower bound of every axis."""

    hi: tuple[float, ...]
    """Upper bound of every axis."""

    values: np.ndarray
    """Density values at the grid nodes, shape ``n_points``."""

    def __post_init__(self) -> None:
        lo = tuple(float(x) for x in np.atleast_1d(self.lo))
        hi = tuple(float(x) for x in np.atleast_1d(self.hi))
        values = np.array(self.values, dtype=float)
        if values.ndim != len(lo) or len(lo) != len(hi):
            raise DimensionMismatchError(
                f"Grid bounds of dimension {len(lo)} do not match values of shape {values.shape}.",
            )
        if any(low >= high for low, high in zip(lo, hi)):
            raise ValueError(f"Grid bounds must satisfy lo < hi, got lo={lo}, hi={hi}.")
        if any(n < 2 for n in values.shape):
            raise ValueError("Every grid axis needs at least two nodes.")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("Grid density values must be finite and nonnegative.")
        values.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "values", values)

    @classmethod
    def on_interval(cls, lo: float, hi: float, values: np.ndarray) -> GridDensity:
        """Create a one-dimensional grid density."""
        return cls(lo=(lo,), hi=(hi,), values=values)

    @classmethod
    def tabulate(
        cls,
        lo: tuple[float, ...] | float,
        hi: tuple[float, ...] | float,
        n_points: tuple[int, ...] | int,
        density: Callable[[np.ndarray], np.ndarray],
    ) -> GridDensity:
        """Tabulate a density given as a function of points of shape (n, r) and renormalize."""
        lo_t = tuple(np.atleast_1d(lo).astype(float))
        hi_t = tuple(np.atleast_1d(hi).astype(float))
        shape = tuple(int(n) for n in np.atleast_1d(n_points))
        axes = [np.linspace(low, high, n) for low, high, n in zip(lo_t, hi_t, shape)]
        points = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        values = np.clip(np.asarray(density(points), dtype=float), 0.0, None).reshape(shape)
        return cls(lo=lo_t, hi=hi_t, values=values).normalized()

    @property
    def ndim(self) -> int:
        """Number of grid axes."""
        return len(self.lo)

    @property
    def n_points(self) -> tuple[int, ...]:
        """Number of nodes along each axis."""
        return tuple(self.values.shape)

    def axis(self, index: int = 0) -> np.ndarray:
        """Node coordinates along one axis."""
        return np.linspace(self.lo[index], self.hi[index], self.n_points[index])

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates of a one-dimensional grid."""
        return self.axis(0)

    def spacing(self, index: int = 0) -> float:
        """Node spacing along one axis."""
        return (self.hi[index] - self.lo[index]) / (self.n_points[index] - 1)

    def points(self) -> np.ndarray:
        """All grid nodes as an array of shape (n_total, ndim), in C order of ``values``."""
        mesh = np.meshgrid(*(self.axis(i) for i in range(self.ndim)), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def integrate(self, integrand: np.ndarray | None = None) -> float:
        """Trapezoid-rule integral of ``integrand`` (default: the density itself) over the grid."""
        result = self.values if integrand is None else np.asarray(integrand, dtype=float).reshape(self.n_points)
        for index in reversed(range(self.ndim)):
            result = trapezoid(result, dx=self.spacing(index), axis=index)
        return float(result)

    def node_weights(self) -> np.ndarray:
        """Trapezoid weights of every node in C order of ``values``; ``integrate(x) == node_weights() @ x``."""
        weights = np.ones(1)
        for index in range(self.ndim):
            axis = np.full(self.n_points[index], self.spacing(index))
            axis[[0, -1]] *= 0.5
            weights = np.multiply.outer(weights, axis).ravel()
        return weights

    @property
    def mass(self) -> float:
        """Total probability mass on the grid."""
        return self.integrate()

    def normalized(self) -> GridDensity:
        """Return the density rescaled to unit mass."""
        mass = self.mass
        if not mass > 0.0:
            raise ValueError("Cannot normalize a grid density with zero mass.")
        return GridDensity(lo=self.lo, hi=self.hi, values=self.values / mass)

    def is_normalized(self, tolerance: float = NORMALIZATION_TOLERANCE) -> bool:
        """Return True if the mass is within ``tolerance`` of one."""
        return abs(self.mass - 1.0) <= tolerance

    def expectation(self, function: Callable[[np.ndarray], np.ndarray]) -> float:
        """Integral of ``function(v) * density(v)``, with ``function`` mapping (n, r) points to (n,) values."""
        integrand = np.asarray(function(self.points()), dtype=float) * self.values.ravel()
        return self.integrate(integrand)

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean vector and covariance matrix of the normalized density by quadrature."""
        density = self.normalized()
        points = density.points()
        weights = density.values.ravel()
        mean = np.array([density.integrate(points[:, i] * weights) for i in range(self.ndim)])
        centered = points - mean
        cov = np.empty((self.ndim, self.ndim))
        for i in range(self.ndim):
            for j in range(i, self.ndim):
                cov[i, j] = cov[j, i] = density.integrate(centered[:, i] * centered[:, j] * weights)
        return mean, symmetrize(cov)

    def same_grid(self, other: GridDensity) -> bool:
        """Return True if both densities live on identical nodes."""
        return self.lo == other.lo and self.hi == other.hi and self.n_points == other.n_points
