"""Errors raised by filterlab.

Every error carries an ``error_code`` that is written into result tables when a replicate
fails, and an ``exit_code`` used by the command line interface.
"""


class FilterLabError(Exception):
    """Base class for all filterlab errors."""

    error_code: int = 30
    exit_code: int = 3


class ConfigurationError(FilterLabError, ValueError):
    """Custom error for an invalid experiment configuration or config file."""

    error_code = 20
    exit_code = 2


class UnknownModelError(ConfigurationError):
    """Custom error for when a built-in model name is not recognised."""

    error_code = 21


class InvalidModelParameterError(ConfigurationError):
    """Custom error for model parameters outside their admissible range."""

    error_code = 22


class IncompatibleExperimentError(ConfigurationError):
    """Custom error for an experiment that cannot run on the requested model."""

    error_code = 23


class DimensionMismatchError(FilterLabError, ValueError):
    """Custom error for arrays whose shape does not match the model dimensions."""

    error_code = 31


class NotPositiveSemiDefiniteError(FilterLabError, ValueError):
    """Custom error for a covariance with eigenvalues below the PSD tolerance."""

    error_code = 32


class DegenerateEnsembleError(FilterLabError, ValueError):
    """Custom error for an ensemble too small to define a covariance."""

    error_code = 33


class UnsupportedModelError(FilterLabError, TypeError):
    """Custom error for a model that an algorithm cannot handle (nonlinear, noise-free, d > 1)."""

    error_code = 34


class LikelihoodUnderflowError(FilterLabError, FloatingPointError):
    """Custom error for when every likelihood underflows, i.e. the data are wildly inconsistent."""

    error_code = 35


class SingularCovarianceError(FilterLabError, ArithmeticError):
    """Custom error for a data covariance that cannot be factorised."""

    error_code = 36


class DomainTooSmallError(FilterLabError, ValueError):
    """Custom error for a grid that loses more probability mass than tolerated."""

    error_code = 37


class GridMismatchError(FilterLabError, ValueError):
    """Custom error for comparing densities tabulated on different grids."""

    error_code = 38


class DictionaryBoundError(FilterLabError, ValueError):
    """Custom error for a test function that exceeds its declared envelope."""

    error_code = 39


class RateFitError(FilterLabError, ValueError):
    """Custom error for a log-log rate fit with too few or nonpositive points."""

    error_code = 40
