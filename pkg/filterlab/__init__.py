from filterlab.application.builders.experiment_director import run_experiment
from filterlab.application.filters.ensemble_kalman import GainVariant, enkf_filter, mf_enkf_gaussian_filter
from filterlab.application.filters.grid_filter import grid_filter
from filterlab.application.filters.kalman import kalman_filter
from filterlab.application.filters.particle_filter import pf_filter
from filterlab.application.model_suite import builtin_model
from filterlab.models.experiment_models import ExperimentConfig, RunRecord
from filterlab.models.measures import EmpiricalMeasure, GaussianMeasure, RngStream
from filterlab.models.state_space import StateSpaceModel, simulate
from filterlab.utils.version import library_version

__version__ = library_version()

__all__ = [
    "EmpiricalMeasure",
    "ExperimentConfig",
    "GainVariant",
    "GaussianMeasure",
    "RngStream",
    "RunRecord",
    "StateSpaceModel",
    "builtin_model",
    "enkf_filter",
    "grid_filter",
    "kalman_filter",
    "mf_enkf_gaussian_filter",
    "pf_filter",
    "run_experiment",
    "simulate",
]
