"""
Runs the experiments described by an ExperimentConfig and assembles their RunRecord.

Random streams are derived from the config seed only: truth and data use the DATA_STREAM
substream, filter replicate r at ensemble-size index i uses FILTER_STREAM / i / r. Replicates
are mapped over a thread pool and collected in replicate order, so the rows do not depend on
the number of threads.
"""
from __future__ import annotations

import functools
import logging
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from typing import Any, TypeVar

import numpy as np

from filterlab.application.builders.run_record_builder import RunRecordBuilder
from filterlab.application.filters.ensemble_kalman import (
    MEAN_FIELD_LABEL,
    GainVariant,
    enkf_filter,
    mf_enkf_gaussian_filter,
)
from filterlab.application.filters.grid_filter import grid_filter
from filterlab.application.filters.kalman import kalman_filter
from filterlab.application.filters.particle_filter import effective_sample_size, pf_filter
from filterlab.application.metrics.dictionaries import Measure, make_dictionary
from filterlab.application.metrics.gaussian_mismatch import epsilon_estimate
from filterlab.application.metrics.random_measure import d_random_estimate, moment_error
from filterlab.application.metrics.rates import MIN_RATE_POINTS, fit_rate
from filterlab.application.metrics.weighted_tv import dg_dictionary
from filterlab.application.model_suite import builtin_model
from filterlab.exceptions import FilterLabError, IncompatibleExperimentError
from filterlab.models.experiment_models import AGGREGATE, ERROR_METRIC, ExperimentConfig, ResultRow, RunRecord
from filterlab.models.grid import GridDensity
from filterlab.models.measures import EmpiricalMeasure, RngStream, empirical_moments, sample
from filterlab.models.state_space import DataRecord, StateSpaceModel, simulate
from filterlab.utils.version import library_version

logger = logging.getLogger(__name__)

T = TypeVar("T")

DATA_STREAM = 0
FILTER_STREAM = 1
NO_STEP = -1
DEFAULT_COLLAPSE_ENSEMBLE_SIZE = 100
DEFAULT_SINGLE_RUN_ENSEMBLE_SIZE = 1000


def _attempt(compute: Callable[[], T]) -> tuple[T | None, FilterLabError | None]:
    """Run one replicate, turning a library error into a value so the sweep continues."""
    try:
        return compute(), None
    except FilterLabError as exc:
        logger.warning(f"Replicate failed with {type(exc).__name__} (code {exc.error_code}): {exc}")
        return None, exc


def _moments(state: Any) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(state, GridDensity):
        return state.moments()
    if isinstance(state, EmpiricalMeasure):
        mean, cov = empirical_moments(state)
        assert cov is not None
        return mean, cov
    return state.mean, state.cov


class ExperimentDirector:
    """Director for building RunRecord objects using the builder pattern."""

    def __init__(self, builder: RunRecordBuilder, threads: int = 1) -> None:
        """Initialize the director with a builder and the size of the replicate thread pool."""
        if threads < 1:
            raise ValueError(f"threads must be at least 1, got {threads}.")
        self._builder = builder
        """The run record under construction, one per experiment."""

        self._threads = threads
        self._config: ExperimentConfig | None = None

        self._experiments: dict[str, Callable[[ExperimentConfig, RngStream], None]] = {
            "pf-rate": self._pf_rate,
            "enkf-rate": self._enkf_rate,
            "mf-exactness": self._mf_exactness,
            "collapse": self._collapse,
            "epsilon-trend": self._epsilon_trend,
            "single-run": self._single_run,
            "sampling-consistency": self._sampling_consistency,
        }

    def construct(self, config: ExperimentConfig) -> RunRecord:
        """Run the configured experiment and build its RunRecord."""
        self._builder.reset().set_config(config).set_library_version(library_version())
        self._config = config
        start = time.perf_counter()
        logger.info(f"Running {config.experiment} on {config.model} with seed {config.seed}")
        self._experiments[config.experiment](config, RngStream(config.seed))
        return self._builder.set_wall_clock(time.perf_counter() - start).build()

    def _map(self, function: Callable[[Any], T], items: Iterable[Any]) -> list[T]:
        """Apply ``function`` to every item, results in input order."""
        if self._threads == 1:
            return [function(item) for item in items]
        with ThreadPoolExecutor(max_workers=self._threads) as pool:
            return list(pool.map(function, items))

    def _row(
        self,
        metric_name: str,
        value: float,
        *,
        J: int | None = None,
        replicate: int = AGGREGATE,
        step: int = NO_STEP,
        theta: float | None = None,
        dim: int | None = None,
        model: str | None = None,
    ) -> ResultRow:
        assert self._config is not None
        return ResultRow(
            experiment=self._config.experiment,
            model=model or self._config.model,
            theta=theta,
            dim=dim,
            J=J,
            replicate=replicate,
            step=step,
            metric_name=metric_name,
            value=float(value),
        )

    def _error_row(self, error: FilterLabError, **labels: Any) -> ResultRow:
        return self._row(ERROR_METRIC, error.error_code, **labels)

    def _record_model_bounds(self, model: StateSpaceModel) -> None:
        self._builder.set_series("model_bounds", asdict(model.bounds) if model.bounds else None)

    def _fit(self, name: str, sizes: Sequence[int], errors: Sequence[float]) -> None:
        if len(sizes) < MIN_RATE_POINTS:
            logger.warning(f"Skipping rate fit '{name}': only {len(sizes)} ensemble sizes succeeded.")
            return
        self._builder.set_rate_fit(name, fit_rate(sizes, errors))

    @staticmethod
    def _reference_filter(model: StateSpaceModel, data: DataRecord) -> list[Measure]:
        """Exact filtering distributions: Kalman for linear models, the grid filter for scalar ones."""
        if model.is_linear:
            return [state.as_gaussian() for state in kalman_filter(model, data)]
        if model.is_scalar:
            return list(grid_filter(model, data))
        raise IncompatibleExperimentError(f"No exact reference filter for model '{model.name}' (nonlinear with d > 1).")

    def _pf_rate(self, config: ExperimentConfig, root: RngStream) -> None:
        model = builtin_model(config.model, config.model_params)
        self._record_model_bounds(model)
        data = simulate(model, config.horizon, root.child(DATA_STREAM))
        reference = self._reference_filter(model, data)
        dictionary = make_dictionary("tv-default", model.dim_state)
        sizes, errors = [], []
        for index, size in enumerate(config.ensemble_sizes):
            def run(replicate: int, size: int = size, index: int = index) -> Any:
                stream = root.child(FILTER_STREAM, index, replicate)
                return _attempt(functools.partial(pf_filter, model, data, size, stream))

            runs = []
            for replicate, (states, error) in enumerate(self._map(run, range(config.replicates))):
                if error is not None:
                    self._builder.add_rows([self._error_row(error, J=size, replicate=replicate)])
                    continue
                assert states is not None
                runs.append([state.as_measure() for state in states])
                self._builder.add_rows(
                    self._row("ess", effective_sample_size(state.weights).ess, J=size, replicate=replicate, step=state.step)
                    for state in states
                )
            if not runs:
                continue
            estimate = d_random_estimate(runs, reference, dictionary)
            self._builder.add_rows(self._row("d_estimate", value, J=size, step=n) for n, value in enumerate(estimate.per_step))
            self._builder.add_rows([self._row("d_estimate_max", estimate.per_step.max(), J=size)])
            sizes.append(size)
            errors.append(float(estimate.per_step.max()))
            logger.info(f"pf-rate J={size}: max_n d estimate {errors[-1]:.4e}")
        self._builder.set_series("ensemble_sizes", sizes).set_series("d_estimate_max", errors)
        self._fit("pf_d_estimate", sizes, errors)

    def _enkf_rate(self, config: ExperimentConfig, root: RngStream) -> None:
        model = builtin_model(config.model, config.model_params)
        if not model.is_linear:
            raise IncompatibleExperimentError("enkf-rate compares against the Kalman filter and needs a linear model.")
        self._record_model_bounds(model)
        data = simulate(model, config.horizon, root.child(DATA_STREAM))
        kalman = kalman_filter(model, data)
        reference: list[Measure] = [state.as_gaussian() for state in kalman]
        dictionary = make_dictionary("tv-default", model.dim_state)
        sizes, moment_errors, d_errors = [], [], []
        for index, size in enumerate(config.ensemble_sizes):
            def run(replicate: int, size: int = size, index: int = index) -> Any:
                stream = root.child(FILTER_STREAM, index, replicate)
                return _attempt(functools.partial(enkf_filter, model, data, size, config.variant, stream))

            runs, replicate_max = [], []
            for replicate, (ensembles, error) in enumerate(self._map(run, range(config.replicates))):
                if error is not None:
                    self._builder.add_rows([self._error_row(error, J=size, replicate=replicate)])
                    continue
                assert ensembles is not None
                measures = [ensemble.as_measure() for ensemble in ensembles]
                per_step = [moment_error(*_moments(m), state.mean, state.cov) for m, state in zip(measures, kalman)]
                self._builder.add_rows(
                    self._row("moment_error", value, J=size, replicate=replicate, step=n) for n, value in enumerate(per_step)
                )
                runs.append(measures)
                replicate_max.append(max(per_step))
            if not runs:
                continue
            estimate = d_random_estimate(runs, reference, dictionary)
            mean_max = float(np.mean(replicate_max))
            self._builder.add_rows(self._row("d_estimate", value, J=size, step=n) for n, value in enumerate(estimate.per_step))
            self._builder.add_rows(
                [self._row("moment_error_max", mean_max, J=size), self._row("d_estimate_max", estimate.per_step.max(), J=size)],
            )
            sizes.append(size)
            moment_errors.append(mean_max)
            d_errors.append(float(estimate.per_step.max()))
            logger.info(f"enkf-rate J={size}: mean max_n moment error {mean_max:.4e}")
        self._builder.set_series("ensemble_sizes", sizes)
        self._builder.set_series("moment_error_max", moment_errors).set_series("d_estimate_max", d_errors)
        self._fit("enkf_moment_error", sizes, moment_errors)
        self._fit("enkf_d_estimate", sizes, d_errors)

    def _mf_exactness(self, config: ExperimentConfig, root: RngStream) -> None:
        model = builtin_model(config.model, config.model_params)
        if not model.is_linear:
            raise IncompatibleExperimentError("mf-exactness has a closed form only for linear models.")
        self._record_model_bounds(model)
        data = simulate(model, config.horizon, root.child(DATA_STREAM))
        deviations = []
        for n, (exact, mean_field) in enumerate(zip(kalman_filter(model, data), mf_enkf_gaussian_filter(model, data))):
            mean_deviation = float(np.max(np.abs(exact.mean - mean_field.mean)))
            cov_deviation = float(np.max(np.abs(exact.cov - mean_field.cov)))
            self._builder.add_rows(
                [self._row("mean_deviation", mean_deviation, step=n), self._row("cov_deviation", cov_deviation, step=n)],
            )
            deviations.append(max(mean_deviation, cov_deviation))
        self._builder.add_rows([self._row("max_deviation", max(deviations))])
        self._builder.set_series("max_deviation", [max(deviations)])

    def _collapse(self, config: ExperimentConfig, root: RngStream) -> None:
        if config.model != "linearNd":
            raise IncompatibleExperimentError(f"collapse sweeps the state dimension of linearNd, not '{config.model}'.")
        size = config.ensemble_sizes[0] if config.ensemble_sizes else DEFAULT_COLLAPSE_ENSEMBLE_SIZE
        medians: list[float | None] = []
        median_ess: list[float | None] = []
        for index, dim in enumerate(config.dims):
            params = {key: value for key, value in config.model_params.items() if key != "obs_dim"}
            model = builtin_model(config.model, {**params, "dim": dim})

            def run(replicate: int, model: StateSpaceModel = model, index: int = index) -> Any:
                def trajectory() -> list[Any]:
                    data = simulate(model, config.horizon, root.child(DATA_STREAM, index, replicate))
                    return pf_filter(model, data, size, root.child(FILTER_STREAM, index, replicate))

                return _attempt(trajectory)

            max_weights, ess_values = [], []
            for replicate, (states, error) in enumerate(self._map(run, range(config.replicates))):
                if error is not None:
                    self._builder.add_rows([self._error_row(error, J=size, replicate=replicate, dim=dim)])
                    continue
                assert states is not None
                diagnostics = [effective_sample_size(state.weights) for state in states[1:]]
                for state, diagnostic in zip(states[1:], diagnostics):
                    self._builder.add_rows(
                        [
                            self._row("max_weight", diagnostic.max_weight, J=size, replicate=replicate, step=state.step, dim=dim),
                            self._row("ess", diagnostic.ess, J=size, replicate=replicate, step=state.step, dim=dim),
                        ],
                    )
                # collapse is judged after the first assimilation step
                max_weights.append(diagnostics[0].max_weight)
                ess_values.append(diagnostics[0].ess)
            if not max_weights:
                medians.append(None)
                median_ess.append(None)
                continue
            medians.append(float(np.median(max_weights)))
            median_ess.append(float(np.median(ess_values)))
            self._builder.add_rows(
                [
                    self._row("median_max_weight", medians[-1], J=size, dim=dim),
                    self._row("median_ess", median_ess[-1], J=size, dim=dim),
                ],
            )
            logger.info(f"collapse dim={dim}: median max weight {medians[-1]:.3f}")
        self._builder.set_series("dims", list(config.dims))
        self._builder.set_series("median_max_weight", medians).set_series("median_ess", median_ess)

    def _epsilon_trend(self, config: ExperimentConfig, root: RngStream) -> None:
        dictionary = make_dictionary("weighted-default", 1)

        def run(theta: float) -> Any:
            def evaluate() -> Any:
                model = builtin_model(config.model, {**config.model_params, "theta": theta})
                if not model.is_scalar:
                    raise IncompatibleExperimentError(f"epsilon-trend needs d = K = 1; '{model.name}' is not scalar.")
                data = simulate(model, config.horizon, root.child(DATA_STREAM))
                grids = grid_filter(model, data, config.grid_points)
                report = epsilon_estimate(model, grids, config.joint_grid_points)
                ensembles = enkf_filter(
                    model, data, config.reference_ensemble_size, config.variant, root.child(FILTER_STREAM),
                )
                errors = [dg_dictionary(grid, ensemble.as_measure(), dictionary) for grid, ensemble in zip(grids, ensembles)]
                return report, errors

            return _attempt(evaluate)

        thetas, epsilons, dg_errors = [], [], []
        for theta, (outcome, error) in zip(config.thetas, self._map(run, config.thetas)):
            if error is not None:
                self._builder.add_rows([self._error_row(error, theta=theta)])
                continue
            assert outcome is not None
            report, errors = outcome
            self._builder.add_rows(self._row("epsilon_step", value, step=n, theta=theta) for n, value in enumerate(report.per_step))
            self._builder.add_rows(self._row("dg_error_step", value, step=n, theta=theta) for n, value in enumerate(errors))
            self._builder.add_rows(
                [self._row("epsilon", report.epsilon, theta=theta), self._row("dg_error", max(errors), theta=theta)],
            )
            self._builder.add_snapshot(f"epsilon_theta_{theta:g}", report)
            thetas.append(theta)
            epsilons.append(report.epsilon)
            dg_errors.append(float(max(errors)))
            logger.info(f"epsilon-trend theta={theta:g}: epsilon={report.epsilon:.4e}, dg error={dg_errors[-1]:.4e}")
        self._builder.set_series("theta", thetas).set_series("epsilon", epsilons).set_series("dg_error", dg_errors)
        self._builder.set_series("mean_field_reference", f"{MEAN_FIELD_LABEL}, J={config.reference_ensemble_size}")
        self._builder.set_series("dg_error_estimator", "weighted-default dictionary lower bound")

    def _sampling_consistency(self, config: ExperimentConfig, root: RngStream) -> None:
        model = builtin_model(config.model, config.model_params)
        self._record_model_bounds(model)
        dictionary = make_dictionary("tv-default", model.dim_state)
        sizes, errors = [], []
        for index, size in enumerate(config.ensemble_sizes):
            def draw(replicate: int, size: int = size, index: int = index) -> list[Measure]:
                return [sample(model.init, size, root.child(FILTER_STREAM, index, replicate))]

            estimate = d_random_estimate(self._map(draw, range(config.replicates)), [model.init], dictionary)
            self._builder.add_rows(
                [
                    self._row("d_estimate", estimate.per_step[0], J=size, step=0),
                    self._row("consistency_bound", 1.0 / np.sqrt(size), J=size, step=0),
                ],
            )
            sizes.append(size)
            errors.append(float(estimate.per_step[0]))
        self._builder.set_series("ensemble_sizes", sizes).set_series("d_estimate", errors)
        self._fit("sampling_d_estimate", sizes, errors)

    def _single_run(self, config: ExperimentConfig, root: RngStream) -> None:
        model = builtin_model(config.model, config.model_params)
        self._record_model_bounds(model)
        size = config.ensemble_sizes[0] if config.ensemble_sizes else DEFAULT_SINGLE_RUN_ENSEMBLE_SIZE
        data = simulate(model, config.horizon, root.child(DATA_STREAM))
        self._builder.add_snapshot("data", data)
        for n, state in enumerate(data.truth):
            self._builder.add_rows(self._row(f"truth[{i}]", value, step=n) for i, value in enumerate(state))

        filters: dict[str, Callable[[], Sequence[Any]]] = {}
        if model.is_linear:
            filters["kalman"] = functools.partial(kalman_filter, model, data)
        if model.is_scalar:
            filters["grid"] = functools.partial(grid_filter, model, data, config.grid_points)
        filters["pf"] = functools.partial(pf_filter, model, data, size, root.child(FILTER_STREAM, 0))
        for index, variant in enumerate(GainVariant, start=1):
            filters[f"enkf_{variant.value}"] = functools.partial(
                enkf_filter, model, data, size, variant, root.child(FILTER_STREAM, index),
            )

        for label, outcome in zip(filters, self._map(_attempt, filters.values())):
            states, error = outcome
            size_label = size if label.startswith(("pf", "enkf")) else None
            if error is not None:
                self._builder.add_rows([self._error_row(error, J=size_label)])
                continue
            assert states is not None
            for n, state in enumerate(states):
                measure = state.as_measure() if hasattr(state, "as_measure") else state
                mean, cov = _moments(measure)
                self._builder.add_rows(self._row(f"{label}.mean[{i}]", m, J=size_label, step=n) for i, m in enumerate(mean))
                self._builder.add_rows(self._row(f"{label}.var[{i}]", c, J=size_label, step=n) for i, c in enumerate(np.diag(cov)))
                if label == "pf":
                    self._builder.add_rows([self._row("pf.ess", effective_sample_size(state.weights).ess, J=size, step=n)])
            self._builder.add_snapshot(label, list(states))


def run_experiment(config: ExperimentConfig, threads: int = 1) -> RunRecord:
    """Run one experiment and return its record."""
    return ExperimentDirector(RunRecordBuilder(), threads=threads).construct(config)
