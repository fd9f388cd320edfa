"""Built-in test problems: linear1d, linearNd, sin-tanh and the interpolated family."""
from __future__ import annotations

from collections.abc import Callable, Mapping
from typing import Any

import numpy as np

from filterlab.exceptions import InvalidModelParameterError, UnknownModelError
from filterlab.models.measures import GaussianMeasure, RngStream
from filterlab.models.state_space import BoundednessConstants, StateSpaceModel

LINEAR1D_DEFAULTS: dict[str, Any] = {"a": 0.9, "sigma2": 0.01, "gamma2": 0.01, "m0": 0.0, "c0": 1.0}
LINEARND_DEFAULTS: dict[str, Any] = {
    "dim": 4,
    "obs_dim": None,
    "a": 0.9,
    "matrix_seed": None,
    "sigma2": 0.01,
    "gamma2": 0.01,
    "m0": 0.0,
    "c0": 1.0,
}
SIN_TANH_DEFAULTS: dict[str, Any] = {"alpha": 2.5, "beta": 2.0, "sigma2": 0.01, "gamma2": 0.01, "m0": 0.0, "c0": 1.0}
INTERPOLATED_DEFAULTS: dict[str, Any] = {"theta": 0.0, "a": 0.5, "sigma2": 0.1, "gamma2": 0.1, "m0": 0.0, "c0": 1.0}


def _merge(defaults: Mapping[str, Any], params: Mapping[str, Any] | None, name: str) -> dict[str, Any]:
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise InvalidModelParameterError(f"Unknown parameters for model '{name}': {sorted(unknown)}.")
    return {**defaults, **params}


def _require_positive(merged: Mapping[str, Any], *keys: str) -> None:
    for key in keys:
        if not float(merged[key]) > 0.0:
            raise InvalidModelParameterError(f"Parameter '{key}' must be positive, got {merged[key]}.")


def _require_stable(a: float) -> None:
    if abs(a) >= 1.0:
        raise InvalidModelParameterError(f"Stable dynamics require |a| < 1, got a={a}.")


def _linear_map(matrix: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def apply(v: np.ndarray) -> np.ndarray:
        return v @ matrix.T

    return apply


def _scalar_init(merged: Mapping[str, Any]) -> GaussianMeasure:
    return GaussianMeasure(np.array([float(merged["m0"])]), np.array([[float(merged["c0"])]]))


def _linear1d(params: Mapping[str, Any] | None) -> StateSpaceModel:
    merged = _merge(LINEAR1D_DEFAULTS, params, "linear1d")
    _require_stable(float(merged["a"]))
    _require_positive(merged, "sigma2", "gamma2", "c0")
    a_matrix = np.array([[float(merged["a"])]])
    h_matrix = np.eye(1)
    return StateSpaceModel(
        name="linear1d",
        dim_state=1,
        dim_obs=1,
        psi=_linear_map(a_matrix),
        h=_linear_map(h_matrix),
        sigma=np.array([[float(merged["sigma2"])]]),
        gamma=np.array([[float(merged["gamma2"])]]),
        init=_scalar_init(merged),
        psi_matrix=a_matrix,
        h_matrix=h_matrix,
        params=merged,
    )


def _random_stable_matrix(dim: int, spectral_radius: float, seed: int) -> np.ndarray:
    raw = RngStream(seed).generator().standard_normal((dim, dim))
    radius = float(np.max(np.abs(np.linalg.eigvals(raw))))
    return raw * (spectral_radius / radius)


def _linear_nd(params: Mapping[str, Any] | None) -> StateSpaceModel:
    merged = _merge(LINEARND_DEFAULTS, params, "linearNd")
    dim = int(merged["dim"])
    obs_dim = dim if merged["obs_dim"] is None else int(merged["obs_dim"])
    if dim < 1 or not 1 <= obs_dim <= dim:
        raise InvalidModelParameterError(f"linearNd needs 1 <= obs_dim <= dim, got dim={dim}, obs_dim={obs_dim}.")
    a = float(merged["a"])
    _require_stable(a)
    _require_positive(merged, "sigma2", "gamma2", "c0")
    if merged["matrix_seed"] is None:
        a_matrix = a * np.eye(dim)
    else:
        a_matrix = _random_stable_matrix(dim, abs(a), int(merged["matrix_seed"]))
    h_matrix = np.eye(obs_dim, dim)
    merged["obs_dim"] = obs_dim
    return StateSpaceModel(
        name="linearNd",
        dim_state=dim,
        dim_obs=obs_dim,
        psi=_linear_map(a_matrix),
        h=_linear_map(h_matrix),
        sigma=float(merged["sigma2"]) * np.eye(dim),
        gamma=float(merged["gamma2"]) * np.eye(obs_dim),
        init=GaussianMeasure(np.full(dim, float(merged["m0"])), float(merged["c0"]) * np.eye(dim)),
        psi_matrix=a_matrix,
        h_matrix=h_matrix,
        params=merged,
    )


def _sin_tanh(params: Mapping[str, Any] | None) -> StateSpaceModel:
    merged = _merge(SIN_TANH_DEFAULTS, params, "sin-tanh")
    _require_positive(merged, "alpha", "beta", "sigma2", "gamma2", "c0")
    alpha = float(merged["alpha"])
    beta = float(merged["beta"])
    return StateSpaceModel(
        name="sin-tanh",
        dim_state=1,
        dim_obs=1,
        psi=lambda v: alpha * np.sin(v),
        h=lambda v: beta * np.tanh(v),
        sigma=np.array([[float(merged["sigma2"])]]),
        gamma=np.array([[float(merged["gamma2"])]]),
        init=_scalar_init(merged),
        # sup|alpha sin| = alpha, sup|beta tanh| = beta, Lip(beta tanh) = beta
        bounds=BoundednessConstants(psi_sup=alpha, h_sup=beta, h_lipschitz=beta),
        params=merged,
    )


def _interpolated(params: Mapping[str, Any] | None) -> StateSpaceModel:
    merged = _merge(INTERPOLATED_DEFAULTS, params, "interpolated")
    theta = float(merged["theta"])
    a = float(merged["a"])
    if theta < 0.0:
        raise InvalidModelParameterError(f"theta must be nonnegative, got {theta}.")
    _require_stable(a)
    _require_positive(merged, "sigma2", "gamma2", "c0")
    if theta == 0.0:
        model = _linear1d({key: merged[key] for key in LINEAR1D_DEFAULTS})
        return StateSpaceModel(
            name="interpolated",
            dim_state=1,
            dim_obs=1,
            psi=model.psi,
            h=model.h,
            sigma=model.sigma,
            gamma=model.gamma,
            init=model.init,
            psi_matrix=model.psi_matrix,
            h_matrix=model.h_matrix,
            params=merged,
        )
    return StateSpaceModel(
        name="interpolated",
        dim_state=1,
        dim_obs=1,
        psi=lambda v: a * v + theta * np.sin(v),
        h=lambda v: v + theta * np.tanh(v),
        sigma=np.array([[float(merged["sigma2"])]]),
        gamma=np.array([[float(merged["gamma2"])]]),
        init=_scalar_init(merged),
        params=merged,
    )


BUILTIN_MODELS: dict[str, Callable[[Mapping[str, Any] | None], StateSpaceModel]] = {
    "linear1d": _linear1d,
    "linearNd": _linear_nd,
    "sin-tanh": _sin_tanh,
    "interpolated": _interpolated,
}


def builtin_model(name: str, params: Mapping[str, Any] | None = None) -> StateSpaceModel:
    """Build one of the named test problems, overriding defaults with ``params``."""
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise UnknownModelError(f"Unknown model '{name}'; expected one of {sorted(BUILTIN_MODELS)}.") from None
    return factory(params)
