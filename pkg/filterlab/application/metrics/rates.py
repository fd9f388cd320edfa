"""Least-squares fits of error decay rates in log-log coordinates."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from filterlab.exceptions import RateFitError
from filterlab.models.experiment_models import RateFit

MIN_RATE_POINTS = 3


def fit_rate(ensemble_sizes: Sequence[float], errors: Sequence[float]) -> RateFit:
    """Ordinary least squares on (log J, log error)."""
    sizes = np.asarray(ensemble_sizes, dtype=float)
    values = np.asarray(errors, dtype=float)
    if sizes.shape != values.shape or sizes.ndim != 1:
        raise RateFitError(f"Need matching 1D arrays, got shapes {sizes.shape} and {values.shape}.")
    if sizes.size < MIN_RATE_POINTS:
        raise RateFitError(f"A rate fit needs at least {MIN_RATE_POINTS} points, got {sizes.size}.")
    if np.any(sizes <= 0.0) or np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        raise RateFitError("Rate fits need positive, finite ensemble sizes and errors.")
    x, y = np.log(sizes), np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (intercept + slope * x)) ** 2))
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - residual / total if np.ptp(y) > 0.0 else 1.0
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=r_squared)
