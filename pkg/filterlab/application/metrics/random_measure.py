"""
Dictionary estimate of the random-measure metric d(mu, nu)^2 = sup_{|f| <= 1} E |mu[f] - nu[f]|^2.

The expectation is over independent filter realizations, the supremum over a bounded dictionary,
so the estimate is a lower bound on d.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from filterlab.application.metrics.dictionaries import DictionaryBound, Measure, TestDictionary, expectations
from filterlab.exceptions import DictionaryBoundError, DimensionMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RandomMetricEstimate:
    """Per-step dictionary estimates of d between a random filter and a reference."""

    per_step: np.ndarray
    replicates: int
    single_realization: bool
    """True when only one realization was available, so E |.|^2 is a single sample."""


def d_random_estimate(
    runs: Sequence[Sequence[Measure]],
    reference: Sequence[Measure],
    dictionary: TestDictionary,
) -> RandomMetricEstimate:
    """For every step, max over f of sqrt(mean over runs of |mu^run[f] - ref[f]|^2)."""
    if dictionary.bound is not DictionaryBound.TV:
        raise DictionaryBoundError(f"d needs a tv dictionary, got a {dictionary.bound.value} dictionary.")
    if not runs:
        raise ValueError("d_random_estimate needs at least one realization.")
    if any(len(run) != len(reference) for run in runs):
        raise DimensionMismatchError(f"Every run must have {len(reference)} steps like the reference.")
    single = len(runs) == 1
    if single:
        logger.warning("d estimated from a single realization; the value is not an expectation over runs.")
    per_step = np.empty(len(reference))
    for n, reference_measure in enumerate(reference):
        reference_values = expectations(dictionary, reference_measure)
        run_values = np.array([expectations(dictionary, run[n]) for run in runs])
        per_step[n] = np.max(np.sqrt(np.mean((run_values - reference_values) ** 2, axis=0)))
    return RandomMetricEstimate(per_step=per_step, replicates=len(runs), single_realization=single)


def moment_error(mean: np.ndarray, cov: np.ndarray, reference_mean: np.ndarray, reference_cov: np.ndarray) -> float:
    """|mean - reference mean| + Frobenius |cov - reference cov|."""
    return float(np.linalg.norm(np.asarray(mean) - reference_mean) + np.linalg.norm(np.asarray(cov) - reference_cov))
