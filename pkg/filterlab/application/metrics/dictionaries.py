"""
Finite dictionaries of test functions used to bound the supremum in d and d_g from below.

Members of a ``tv`` dictionary satisfy |f| <= 1, members of a ``weighted`` dictionary satisfy
|f| <= g with g(v) = 1 + |v|^2. Expectations are exact where a closed form exists (polynomials
under Gaussians) and use Gauss-Hermite quadrature otherwise.

Weighted dictionaries on the plane also carry a cell partition: the witnesses g(v) sum_c s_c 1_c(z)
with signs s_c = +-1 over rectangular cells in standardized coordinates z. They pick up joint
structure that single-coordinate members miss.
"""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.special import ndtr

from filterlab.exceptions import DictionaryBoundError, DimensionMismatchError, UnsupportedModelError
from filterlab.models.grid import GridDensity
from filterlab.models.measures import EmpiricalMeasure, GaussianMeasure, RngStream, empirical_moments
from filterlab.utils.linalg import cholesky, gauss_hermite_expectation

logger = logging.getLogger(__name__)

Measure = EmpiricalMeasure | GaussianMeasure | GridDensity

TV_SLOPES = (1.0, 3.0)
TV_SHIFTS = (-2.0, -1.0, 0.0, 1.0, 2.0)
INDICATOR_SLOPE = 10.0
INDICATOR_SHIFTS = tuple(np.linspace(-2.25, 2.25, 10))
BOUND_CHECK_POINTS = 10_000
BOUND_CHECK_SCALE = 5.0
BOUND_CHECK_SEED = 20_240_101
BOUND_SLACK = 1e-12
PARTITION_EDGES = tuple(float(edge) for edge in np.linspace(-4.0, 4.0, 65))
PARTITION_DIM = 2


def weight(points: np.ndarray) -> np.ndarray:
    """g(v) = 1 + |v|^2 for points of shape (n, r)."""
    points = np.atleast_2d(points)
    return 1.0 + np.sum(points**2, axis=1)


def measure_moments(measure: Measure) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of a Gaussian, empirical or grid measure."""
    if isinstance(measure, GaussianMeasure):
        return measure.mean, measure.cov
    if isinstance(measure, GridDensity):
        return measure.moments()
    mean, cov = empirical_moments(measure)
    assert cov is not None
    return mean, cov


@dataclass(frozen=True, eq=False)
class StandardFrame:
    """Standardized coordinates z = L^{-1} (v - mean) of a reference law with covariance L L^T."""

    mean: np.ndarray
    lower: np.ndarray

    @classmethod
    def of(cls, measure: Measure) -> StandardFrame:
        """Frame of a measure's first two moments; raises ``SingularCovarianceError`` if the covariance is singular."""
        mean, cov = measure_moments(measure)
        return cls(mean=np.asarray(mean, dtype=float), lower=cholesky(cov, "the frame covariance"))

    def coordinates(self, points: np.ndarray) -> np.ndarray:
        """z for points of shape (n, r)."""
        centered = np.atleast_2d(points) - self.mean
        return scipy.linalg.solve_triangular(self.lower, centered.T, lower=True).T

    def describes(self, g: GaussianMeasure) -> bool:
        """True if z is standard normal under ``g``."""
        return bool(np.allclose(self.mean, g.mean) and np.allclose(self.lower @ self.lower.T, g.cov))


@dataclass(frozen=True)
class CellPartition:
    """
    Rectangular cells of the standardized plane, cut at ``edges`` on both axes plus two unbounded cells per axis.

    Every witness g(v) sum_c s_c 1_c(z) is bounded by g, and the largest |mu_a[f] - mu_b[f]| over the
    sign choices is sum_c |mu_a[g 1_c] - mu_b[g 1_c]|, so only the weighted cell masses are needed.
    """

    edges: tuple[float, ...] = PARTITION_EDGES

    def __post_init__(self) -> None:
        edges = tuple(float(edge) for edge in self.edges)
        if not edges or np.any(np.diff(edges) <= 0.0) or not np.all(np.isfinite(edges)):
            raise ValueError("Partition edges must be finite and strictly increasing.")
        object.__setattr__(self, "edges", edges)

    @property
    def cells_per_axis(self) -> int:
        return len(self.edges) + 1

    @property
    def size(self) -> int:
        """Number of cells."""
        return self.cells_per_axis**PARTITION_DIM

    def cell_index(self, z: np.ndarray) -> np.ndarray:
        """Flat cell index of standardized points of shape (n, 2), row-major in (z1, z2)."""
        rows = np.digitize(z[:, 0], self.edges)
        columns = np.digitize(z[:, 1], self.edges)
        return rows * self.cells_per_axis + columns

    def weighted_cell_masses(self, measure: Measure, frame: StandardFrame) -> np.ndarray:
        """mu[g 1_c] for every cell c."""
        if isinstance(measure, GaussianMeasure):
            return self._gaussian_cell_masses(measure, frame)
        if isinstance(measure, GridDensity):
            density = measure.normalized()
            points = density.points()
            masses = density.node_weights() * density.values.ravel() * weight(points)
        else:
            assert measure.weights is not None
            points = measure.particles
            masses = measure.weights * weight(points)
        if points.shape[1] != PARTITION_DIM:
            raise DimensionMismatchError(f"Cell partitions act on the plane, got points of dimension {points.shape[1]}.")
        return np.bincount(self.cell_index(frame.coordinates(points)), weights=masses, minlength=self.size)

    def _gaussian_cell_masses(self, g: GaussianMeasure, frame: StandardFrame) -> np.ndarray:
        # z ~ N(0, I) and g(m + L z) = 1 + |m|^2 + 2 (L^T m) . z + z^T (L^T L) z, so every cell factorizes
        if not frame.describes(g):
            raise UnsupportedModelError("Closed-form cell masses need the Gaussian's own frame.")
        edges = np.concatenate([[-np.inf], self.edges, [np.inf]])
        pdf = np.exp(-0.5 * edges**2) / np.sqrt(2.0 * np.pi)
        p0 = np.diff(ndtr(edges))
        p1 = -np.diff(pdf)
        p2 = p0 - np.diff(np.where(np.isfinite(edges), edges, 0.0) * pdf)
        shift = frame.lower.T @ frame.mean
        gram = frame.lower.T @ frame.lower
        masses = (
            (1.0 + float(frame.mean @ frame.mean)) * np.outer(p0, p0)
            + 2.0 * shift[0] * np.outer(p1, p0)
            + 2.0 * shift[1] * np.outer(p0, p1)
            + gram[0, 0] * np.outer(p2, p0)
            + gram[1, 1] * np.outer(p0, p2)
            + 2.0 * gram[0, 1] * np.outer(p1, p1)
        )
        return masses.ravel()


class DictionaryBound(str, Enum):
    TV = "tv"
    WEIGHTED = "weighted"


class FunctionKind(str, Enum):
    """Families with a known Gaussian expectation; CUSTOM members fall back to quadrature in 1D."""

    CONSTANT = "constant"
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    TANH = "tanh"
    WEIGHTED_TANH = "weighted_tanh"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TestFunction:
    """One member f of a dictionary, acting on points of shape (n, r)."""

    __test__ = False

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    kind: FunctionKind = FunctionKind.CUSTOM
    coordinates: tuple[int, ...] = ()
    slope: float = 1.0
    shift: float = 0.0

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(points)), dtype=float)


def constant() -> TestFunction:
    return TestFunction("1", lambda points: np.ones(points.shape[0]), FunctionKind.CONSTANT)


def linear(i: int) -> TestFunction:
    return TestFunction(f"v{i + 1}", lambda points: points[:, i], FunctionKind.LINEAR, (i,))


def quadratic(i: int, j: int) -> TestFunction:
    name = f"v{i + 1}^2" if i == j else f"v{i + 1}*v{j + 1}"
    return TestFunction(name, lambda points: points[:, i] * points[:, j], FunctionKind.QUADRATIC, (i, j))


def smoothed_step(i: int, slope: float, shift: float) -> TestFunction:
    """tanh(a (v_i - b)), bounded by 1."""
    return TestFunction(
        f"tanh({slope:g}*(v{i + 1}-{shift:g}))",
        lambda points: np.tanh(slope * (points[:, i] - shift)),
        FunctionKind.TANH,
        (i,),
        slope,
        shift,
    )


def weighted_step(i: int, slope: float, shift: float) -> TestFunction:
    """g(v) tanh(a (v_i - b)), bounded by g."""
    return TestFunction(
        f"g*tanh({slope:g}*(v{i + 1}-{shift:g}))",
        lambda points: weight(points) * np.tanh(slope * (points[:, i] - shift)),
        FunctionKind.WEIGHTED_TANH,
        (i,),
        slope,
        shift,
    )


@dataclass(frozen=True)
class TestDictionary:
    """A finite family of test functions on R^r sharing a declared bound."""

    __test__ = False

    functions: tuple[TestFunction, ...]
    bound: DictionaryBound
    dim: int
    partition: CellPartition | None = None
    """Sign witnesses over standardized cells, for weighted dictionaries on the plane."""

    def __post_init__(self) -> None:
        if not self.functions:
            raise ValueError("A dictionary needs at least one function.")
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "bound", DictionaryBound(self.bound))
        if self.partition is not None and (self.bound is not DictionaryBound.WEIGHTED or self.dim != PARTITION_DIM):
            raise ValueError("A cell partition needs a weighted dictionary on the plane.")

    def __len__(self) -> int:
        return len(self.functions)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.functions]

    def envelope(self, points: np.ndarray) -> np.ndarray:
        """The declared bound evaluated at points: 1 or g(v)."""
        if self.bound is DictionaryBound.TV:
            return np.ones(np.atleast_2d(points).shape[0])
        return weight(points)

    def verify_bounds(self, n_points: int = BOUND_CHECK_POINTS, rng: RngStream | None = None) -> None:
        """Spot-check every member against its envelope on random points; raise on the first violation."""
        rng = rng or RngStream(BOUND_CHECK_SEED)
        points = BOUND_CHECK_SCALE * rng.generator().standard_normal((n_points, self.dim))
        envelope = self.envelope(points)
        for f in self.functions:
            excess = np.abs(f(points)) - envelope * (1.0 + BOUND_SLACK)
            if np.any(excess > 0.0):
                worst = int(np.argmax(excess))
                raise DictionaryBoundError(
                    f"Member '{f.name}' exceeds the {self.bound.value} bound at {points[worst]} by {excess[worst]:.3e}.",
                )


def make_dictionary(kind: str, dim: int) -> TestDictionary:
    """Build ``tv-default`` or ``weighted-default`` on R^dim and verify its bounds; ``weighted-default`` on the plane adds the cell partition."""
    if dim < 1:
        raise DimensionMismatchError(f"Dictionary dimension must be positive, got {dim}.")
    functions: list[TestFunction] = []
    partition: CellPartition | None = None
    if kind == "tv-default":
        for i in range(dim):
            functions += [smoothed_step(i, a, b) for a in TV_SLOPES for b in TV_SHIFTS]
            functions += [smoothed_step(i, INDICATOR_SLOPE, float(b)) for b in INDICATOR_SHIFTS]
        bound = DictionaryBound.TV
    elif kind == "weighted-default":
        functions.append(constant())
        functions += [linear(i) for i in range(dim)]
        functions += [quadratic(i, j) for i in range(dim) for j in range(i, dim)]
        functions += [weighted_step(i, a, b) for i in range(dim) for a in TV_SLOPES for b in TV_SHIFTS]
        bound = DictionaryBound.WEIGHTED
        if dim == PARTITION_DIM:
            partition = CellPartition()
    else:
        raise ValueError(f"Unknown dictionary kind '{kind}'; expected 'tv-default' or 'weighted-default'.")
    dictionary = TestDictionary(functions=tuple(functions), bound=bound, dim=dim, partition=partition)
    dictionary.verify_bounds()
    return dictionary


def _gaussian_expectation(f: TestFunction, g: GaussianMeasure) -> float:
    mean, cov = g.mean, g.cov
    if f.kind is FunctionKind.CONSTANT:
        return 1.0
    if f.kind is FunctionKind.LINEAR:
        return float(mean[f.coordinates[0]])
    if f.kind is FunctionKind.QUADRATIC:
        i, j = f.coordinates
        return float(cov[i, j] + mean[i] * mean[j])
    if f.kind is FunctionKind.TANH:
        i = f.coordinates[0]
        return gauss_hermite_expectation(lambda x: np.tanh(f.slope * (x - f.shift)), mean[i], cov[i, i])
    if f.kind is FunctionKind.WEIGHTED_TANH:
        i = f.coordinates[0]
        variance = float(cov[i, i])
        regression = cov[:, i] / variance if variance > 0.0 else np.zeros(g.dim)
        residual_var = np.diag(cov) - regression * cov[:, i]

        def conditional_weight_times_step(x: np.ndarray) -> np.ndarray:
            # E[g(v) | v_i = x] in closed form from the Gaussian conditionals of the other coordinates
            conditional_means = mean[None, :] + np.outer(x - mean[i], regression)
            second_moment = np.sum(conditional_means**2, axis=1) + np.sum(residual_var)
            return (1.0 + second_moment) * np.tanh(f.slope * (x - f.shift))

        return gauss_hermite_expectation(conditional_weight_times_step, mean[i], variance)
    if g.dim == 1:
        return gauss_hermite_expectation(lambda x: f(x[:, None]), mean[0], cov[0, 0])
    raise UnsupportedModelError(f"No Gaussian expectation for custom member '{f.name}' in dimension {g.dim}.")


def expectation(f: TestFunction, measure: Measure) -> float:
    """mu[f] for an empirical, Gaussian or grid measure."""
    if isinstance(measure, GaussianMeasure):
        return _gaussian_expectation(f, measure)
    if isinstance(measure, GridDensity):
        return measure.normalized().expectation(f)
    return measure.expectation(f(measure.particles))


def expectations(dictionary: TestDictionary, measure: Measure) -> np.ndarray:
    """mu[f] for every member, in dictionary order."""
    return np.array([expectation(f, measure) for f in dictionary.functions])
