"""Tabular and JSON encodings of filter states, data records and epsilon reports."""
from __future__ import annotations

from collections.abc import Sequence
from typing import Any

import numpy as np
import pandas as pd

from filterlab.application.filters.ensemble_kalman import Ensemble
from filterlab.application.filters.kalman import KalmanState
from filterlab.application.filters.particle_filter import PfState
from filterlab.application.metrics.gaussian_mismatch import EpsilonReport
from filterlab.models.grid import GridDensity
from filterlab.models.state_space import DataRecord


def _state_columns(dim: int) -> list[str]:
    return [f"v{i + 1}" for i in range(dim)]


def grid_frame(densities: Sequence[GridDensity]) -> pd.DataFrame:
    """Columns step, node, one coordinate column per axis, value."""
    frames = []
    for step, density in enumerate(densities):
        coordinates = density.points()
        frame = pd.DataFrame(coordinates, columns=["u", "y"][: density.ndim] if density.ndim <= 2 else _state_columns(density.ndim))
        frame.insert(0, "node", np.arange(coordinates.shape[0]))
        frame.insert(0, "step", step)
        frame["value"] = density.values.ravel()
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def pf_frame(states: Sequence[PfState]) -> pd.DataFrame:
    """Columns step, particle, v1..vd, weight."""
    frames = []
    for state in states:
        frame = pd.DataFrame(state.particles, columns=_state_columns(state.particles.shape[1]))
        frame.insert(0, "particle", np.arange(state.size))
        frame.insert(0, "step", state.step)
        frame["weight"] = state.weights
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def ensemble_frame(ensembles: Sequence[Ensemble]) -> pd.DataFrame:
    """Columns step, member, v1..vd."""
    frames = []
    for ensemble in ensembles:
        frame = pd.DataFrame(ensemble.members, columns=_state_columns(ensemble.members.shape[1]))
        frame.insert(0, "member", np.arange(ensemble.size))
        frame.insert(0, "step", ensemble.step)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def kalman_frame(states: Sequence[KalmanState]) -> pd.DataFrame:
    """Columns step, then the mean and the flattened covariance."""
    dim = states[0].mean.size
    records = [np.concatenate([state.mean, state.cov.ravel()]) for state in states]
    columns = [f"mean{i + 1}" for i in range(dim)] + [f"cov{i + 1}_{j + 1}" for i in range(dim) for j in range(dim)]
    frame = pd.DataFrame(records, columns=columns)
    frame.insert(0, "step", np.arange(len(states)))
    return frame


def encode_snapshot(snapshot: Any) -> pd.DataFrame | dict[str, Any]:
    """A DataFrame for sequences of filter states, a JSON-ready dict for reports and data records."""
    if isinstance(snapshot, EpsilonReport | DataRecord):
        return snapshot.as_dict()
    if isinstance(snapshot, Sequence) and snapshot:
        first = snapshot[0]
        if isinstance(first, GridDensity):
            return grid_frame(snapshot)
        if isinstance(first, PfState):
            return pf_frame(snapshot)
        if isinstance(first, Ensemble):
            return ensemble_frame(snapshot)
        if isinstance(first, KalmanState):
            return kalman_frame(snapshot)
    raise TypeError(f"No encoding for snapshot of type {type(snapshot).__name__}.")
