"""The weighted total variation metric d_g(mu, nu) = sup_{|f| <= g} |mu[f] - nu[f]| with g(v) = 1 + |v|^2."""
from __future__ import annotations

import logging

import numpy as np

from filterlab.application.metrics.dictionaries import (
    CellPartition,
    DictionaryBound,
    Measure,
    StandardFrame,
    TestDictionary,
    expectations,
    weight,
)
from filterlab.exceptions import DegenerateEnsembleError, DictionaryBoundError, GridMismatchError, SingularCovarianceError
from filterlab.models.grid import GridDensity
from filterlab.models.measures import GaussianMeasure

logger = logging.getLogger(__name__)

SHARED_GRID_HALF_WIDTH = 10.0
SHARED_GRID_POINTS = 401


def dg_exact_grid(p: GridDensity, q: GridDensity) -> float:
    """
    d_g between two densities on the same grid, as the quadrature of g |p - q|.

    The supremum over |f| <= g is attained at f = g sign(p - q), so only quadrature error remains.
    """
    if not p.same_grid(q):
        raise GridMismatchError(
            f"d_g needs identical grids, got {p.lo}..{p.hi} with {p.n_points} nodes "
            f"and {q.lo}..{q.hi} with {q.n_points} nodes.",
        )
    difference = np.abs(p.values.ravel() - q.values.ravel())
    return p.integrate(weight(p.points()) * difference)


def _on_grid(measure: Measure, grid: GridDensity) -> Measure:
    if isinstance(measure, GaussianMeasure):
        return GridDensity.tabulate(grid.lo, grid.hi, grid.n_points, measure.density)
    return measure


def _on_shared_grid(a: GaussianMeasure, b: GaussianMeasure) -> tuple[GridDensity, GridDensity]:
    spread_a = SHARED_GRID_HALF_WIDTH * np.sqrt(np.diag(a.cov))
    spread_b = SHARED_GRID_HALF_WIDTH * np.sqrt(np.diag(b.cov))
    lo = tuple(np.minimum(a.mean - spread_a, b.mean - spread_b))
    hi = tuple(np.maximum(a.mean + spread_a, b.mean + spread_b))
    n_points = (SHARED_GRID_POINTS,) * a.dim
    return (
        GridDensity.tabulate(lo, hi, n_points, a.density),
        GridDensity.tabulate(lo, hi, n_points, b.density),
    )


def partition_bound(mu_a: Measure, mu_b: Measure, partition: CellPartition) -> float:
    """
    sum_c |mu_a[g 1_c] - mu_b[g 1_c]| over the cells of the standardized frame of the reference.

    Gaussians facing a grid density are tabulated on its nodes and two Gaussians share one grid, so
    grid comparisons never exceed the quadrature of g |p - q|. A Gaussian facing an empirical measure
    is its own frame and its cell masses are exact.
    """
    grids = [m for m in (mu_b, mu_a) if isinstance(m, GridDensity)]
    if grids:
        grid = grids[0]
        mu_a, mu_b = _on_grid(mu_a, grid), _on_grid(mu_b, grid)
    elif isinstance(mu_a, GaussianMeasure) and isinstance(mu_b, GaussianMeasure):
        mu_a, mu_b = _on_shared_grid(mu_a, mu_b)
    reference = mu_a if isinstance(mu_a, GaussianMeasure) else mu_b
    try:
        frame = StandardFrame.of(reference)
    except (SingularCovarianceError, DegenerateEnsembleError) as exc:
        logger.debug(f"Skipping the cell partition: {exc}")
        return 0.0
    masses_a = partition.weighted_cell_masses(mu_a, frame)
    masses_b = partition.weighted_cell_masses(mu_b, frame)
    return float(np.sum(np.abs(masses_a - masses_b)))


def dg_dictionary(mu_a: Measure, mu_b: Measure, dictionary: TestDictionary) -> float:
    """Lower bound on d_g: the largest |mu_a[f] - mu_b[f]| over a weighted dictionary and its cell witnesses."""
    if dictionary.bound is not DictionaryBound.WEIGHTED:
        raise DictionaryBoundError(f"d_g needs a weighted dictionary, got a {dictionary.bound.value} dictionary.")
    lower = float(np.max(np.abs(expectations(dictionary, mu_a) - expectations(dictionary, mu_b))))
    if dictionary.partition is None:
        return lower
    return max(lower, partition_bound(mu_a, mu_b, dictionary.partition))
