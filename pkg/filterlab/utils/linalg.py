"""Small dense linear-algebra helpers shared by the measures and the filters."""
from __future__ import annotations

from collections.abc import Callable

import numpy as np
import scipy.linalg
from numpy.polynomial.hermite_e import hermegauss

from filterlab.exceptions import NotPositiveSemiDefiniteError, SingularCovarianceError

PSD_RELATIVE_TOLERANCE = 1e-10
GAUSS_HERMITE_ORDER = 80


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Return the symmetric part of a square matrix."""
    return 0.5 * (matrix + matrix.T)


def repair_psd(matrix: np.ndarray, rel_tol: float = PSD_RELATIVE_TOLERANCE) -> tuple[np.ndarray, bool]:
    """
    Symmetrize a covariance and clip round-off negative eigenvalues.

    Eigenvalues in ``[-rel_tol * lambda_max, 0)`` are clipped to zero, anything below raises.
    Returns the repaired matrix and whether it is singular (smallest eigenvalue within tolerance of zero).
    """
    sym = symmetrize(np.atleast_2d(np.asarray(matrix, dtype=float)))
    if sym.size == 0:
        return sym, True
    eigenvalues, eigenvectors = np.linalg.eigh(sym)
    largest = max(float(eigenvalues[-1]), 0.0)
    tolerance = rel_tol * largest
    smallest = float(eigenvalues[0])
    if smallest < -tolerance:
        raise NotPositiveSemiDefiniteError(
            f"Covariance has eigenvalue {smallest:.3e} below tolerance -{tolerance:.3e}.",
        )
    singular = smallest <= tolerance
    if smallest < 0.0:
        clipped = np.clip(eigenvalues, 0.0, None)
        sym = symmetrize((eigenvectors * clipped) @ eigenvectors.T)
    return sym, singular


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Return ``L`` with ``L @ L.T == matrix`` for a PSD matrix, allowing singular matrices."""
    eigenvalues, eigenvectors = np.linalg.eigh(symmetrize(matrix))
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def cholesky(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor, raising ``SingularCovarianceError`` when the matrix is not SPD."""
    try:
        return scipy.linalg.cholesky(symmetrize(matrix), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"Cholesky factorisation of {name} failed: {exc}") from exc


def is_spd(matrix: np.ndarray) -> bool:
    """Return True if the Cholesky factorisation succeeds."""
    try:
        np.linalg.cholesky(symmetrize(matrix))
    except np.linalg.LinAlgError:
        return False
    return True


def spd_right_solve(lhs: np.ndarray, spd: np.ndarray, name: str = "matrix") -> np.ndarray:
    """
    Compute ``lhs @ inv(spd)`` through a Cholesky solve, never forming the inverse.

    ``spd`` must be symmetric positive definite, otherwise ``SingularCovarianceError`` is raised.
    """
    try:
        factor = scipy.linalg.cho_factor(symmetrize(spd), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"Cholesky factorisation of {name} failed: {exc}") from exc
    return scipy.linalg.cho_solve(factor, lhs.T).T


def mahalanobis_squared(residuals: np.ndarray, lower_factor: np.ndarray) -> np.ndarray:
    """Row-wise ``r^T C^{-1} r`` for residuals of shape (n, k) given the lower Cholesky factor of C."""
    whitened = scipy.linalg.solve_triangular(lower_factor, np.atleast_2d(residuals).T, lower=True)
    return np.sum(whitened**2, axis=0)


def gauss_hermite_expectation(
    function: Callable[[np.ndarray], np.ndarray],
    mean: float,
    variance: float,
    order: int = GAUSS_HERMITE_ORDER,
) -> float:
    """Expectation of a vectorised scalar function under N(mean, variance) by Gauss-Hermite quadrature."""
    nodes, weights = hermegauss(order)
    points = mean + np.sqrt(max(variance, 0.0)) * nodes
    return float(np.dot(weights, function(points)) / np.sqrt(2.0 * np.pi))
