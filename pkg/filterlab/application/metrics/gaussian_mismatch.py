"""
The Gaussian mismatch epsilon = max_n d_g(G Q P mu_n, Q P mu_n) of the true filter, for d = K = 1.

Q P mu_n is tabulated on a 2D (u, y) grid: the grid prediction of mu_n times the closed-form
Gaussian conditional of y given u. Its moment-matched Gaussian is tabulated on the same nodes
and d_g is the quadrature of g |p - q|.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from filterlab.application.filters.grid_filter import DEFAULT_JOINT_GRID_POINTS, GRID_HALF_WIDTH, grid_predict, lift_to_joint_grid
from filterlab.application.metrics.weighted_tv import dg_exact_grid
from filterlab.models.grid import GridDensity
from filterlab.models.measures import gaussian_project
from filterlab.models.state_space import StateSpaceModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EpsilonReport:
    """Per-step Gaussian mismatch and its maximum."""

    per_step: np.ndarray
    epsilon: float
    provenance: dict[str, Any] = field(default_factory=dict)
    """How the values were computed: estimator and grid sizes."""

    def __post_init__(self) -> None:
        per_step = np.asarray(self.per_step, dtype=float)
        if per_step.size == 0 or np.any(per_step < 0.0):
            raise ValueError("An epsilon report needs at least one nonnegative per-step value.")
        object.__setattr__(self, "per_step", per_step)
        object.__setattr__(self, "epsilon", float(np.max(per_step)))

    def as_dict(self) -> dict[str, Any]:
        return {"per_step": self.per_step.tolist(), "epsilon": self.epsilon, "provenance": dict(self.provenance)}


def gaussian_mismatch_step(
    p: GridDensity,
    model: StateSpaceModel,
    joint_grid_points: int = DEFAULT_JOINT_GRID_POINTS,
    width: float = GRID_HALF_WIDTH,
) -> float:
    """d_g(G Q P p, Q P p) for one filtering density p."""
    joint = lift_to_joint_grid(grid_predict(p, model, width=width), model, joint_grid_points, width)
    projection = gaussian_project(joint)
    tabulated = GridDensity.tabulate(joint.lo, joint.hi, joint.n_points, projection.density)
    return dg_exact_grid(joint, tabulated)


def epsilon_estimate(
    model: StateSpaceModel,
    grid_posteriors: Sequence[GridDensity],
    joint_grid_points: int = DEFAULT_JOINT_GRID_POINTS,
    width: float = GRID_HALF_WIDTH,
) -> EpsilonReport:
    """Evaluate the Gaussian mismatch at every step of a grid filter run; epsilon is the max."""
    model.require_scalar("epsilon_estimate")
    per_step = np.array([gaussian_mismatch_step(p, model, joint_grid_points, width) for p in grid_posteriors])
    logger.info(f"epsilon for model '{model.name}': {per_step.max():.4e} over {per_step.size} steps")
    return EpsilonReport(
        per_step=per_step,
        epsilon=float(per_step.max()),
        provenance={
            "estimator": "2d-grid quadrature",
            "grid_points": grid_posteriors[0].n_points[0],
            "joint_grid_points": joint_grid_points,
            "half_width_std": width,
        },
    )
