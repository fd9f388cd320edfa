import json

import numpy as np
import pandas as pd
import pytest

from filterlab.adapters.persistence.file_repositories import FileDataRecordRepository, FileRunRecordRepository
from filterlab.adapters.persistence.snapshots import encode_snapshot
from filterlab.application.builders.experiment_director import run_experiment
from filterlab.application.builders.run_record_builder import RunRecordBuilder
from filterlab.exceptions import IncompatibleExperimentError, InvalidModelParameterError
from filterlab.models.experiment_models import (
    AGGREGATE,
    ERROR_METRIC,
    MEAN_FIELD_REFERENCE_SIZE,
    ROW_COLUMNS,
    ExperimentConfig,
    RateFit,
    ResultRow,
)
from filterlab.models.state_space import DataRecord


def _values(frame: pd.DataFrame, metric: str) -> pd.Series:
    return frame.loc[frame["metric_name"] == metric, "value"]


def test_config_requires_experiment_inputs() -> None:
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="pf-rate")
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="epsilon-trend", model="interpolated")
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="collapse", model="linearNd")


@pytest.mark.parametrize(
    "fields",
    [
        {"ensemble_sizes": [1, 10, 100]},
        {"seed": -1},
        {"horizon": 0},
        {"variant": "square-root"},
        {"unknown": 1},
    ],
)
def test_config_rejects_invalid_fields(fields: dict) -> None:
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="pf-rate", **{"ensemble_sizes": [10, 20, 40], **fields})


def test_builder_requires_config_and_timing() -> None:
    with pytest.raises(ValueError):
        RunRecordBuilder().build()
    builder = RunRecordBuilder().set_config(ExperimentConfig(experiment="mf-exactness")).set_library_version("1.0")
    with pytest.raises(ValueError):
        builder.build()
    record = builder.set_wall_clock(0.5).build()
    assert record.rows == []


def test_builder_rejects_duplicate_snapshots() -> None:
    builder = RunRecordBuilder().add_snapshot("data", 1)
    with pytest.raises(ValueError):
        builder.add_snapshot("data", 2)


def test_record_frame_has_frozen_columns() -> None:
    record = (
        RunRecordBuilder()
        .set_config(ExperimentConfig(experiment="mf-exactness"))
        .add_rows([ResultRow("mf-exactness", "linear1d", None, None, None, AGGREGATE, 0, "mean_deviation", 0.0)])
        .set_rate_fit("example", RateFit(slope=-0.5, intercept=0.0, r_squared=1.0))
        .set_wall_clock(0.1)
        .set_library_version("1.0")
        .build()
    )
    assert list(record.to_frame().columns) == ROW_COLUMNS
    summary = record.as_dict()
    assert summary["row_count"] == 1
    assert summary["rate_fits"]["example"]["slope"] == -0.5
    assert summary["config"]["experiment"] == "mf-exactness"


def test_config_defaults_to_the_mean_field_reference_size() -> None:
    assert ExperimentConfig(experiment="mf-exactness").reference_ensemble_size == MEAN_FIELD_REFERENCE_SIZE


def test_summary_json_has_no_bare_nan(tmp_path) -> None:
    record = (
        RunRecordBuilder()
        .set_config(ExperimentConfig(experiment="collapse", model="linearNd", dims=[1, 2]))
        .set_series("median_max_weight", [float("nan"), None])
        .set_series("dims", [1, 2])
        .set_wall_clock(0.1)
        .set_library_version("1.0")
        .build()
    )
    FileRunRecordRepository(tmp_path).save(record)

    def reject(constant: str) -> None:
        raise ValueError(f"non-standard JSON constant {constant}")

    summary = json.loads((tmp_path / "collapse.json").read_text(encoding="utf-8"), parse_constant=reject)
    assert summary["series"]["median_max_weight"] == [None, None]
    assert summary["series"]["dims"] == [1, 2]


def test_mf_exactness_on_linear_nd() -> None:
    config = ExperimentConfig(experiment="mf-exactness", model="linearNd", model_params={"dim": 4, "obs_dim": 2}, horizon=20)
    frame = run_experiment(config).to_frame()
    assert _values(frame, "max_deviation").iloc[0] < 1e-10
    assert len(_values(frame, "mean_deviation")) == 21


def test_mf_exactness_needs_linear_model() -> None:
    with pytest.raises(IncompatibleExperimentError):
        run_experiment(ExperimentConfig(experiment="mf-exactness", model="sin-tanh"))


def test_enkf_rate_needs_linear_model() -> None:
    with pytest.raises(IncompatibleExperimentError):
        run_experiment(ExperimentConfig(experiment="enkf-rate", model="sin-tanh", ensemble_sizes=[10, 20, 40]))


def test_collapse_needs_linear_nd() -> None:
    with pytest.raises(IncompatibleExperimentError):
        run_experiment(ExperimentConfig(experiment="collapse", model="linear1d", dims=[1, 2]))


def test_pf_rate_rows_and_fit() -> None:
    config = ExperimentConfig(experiment="pf-rate", horizon=3, ensemble_sizes=[20, 40, 80], replicates=3, seed=5)
    record = run_experiment(config)
    frame = record.to_frame()
    assert set(frame["metric_name"]) == {"ess", "d_estimate", "d_estimate_max"}
    assert len(_values(frame, "ess")) == 3 * 3 * 4
    assert len(_values(frame, "d_estimate")) == 3 * 4
    assert (frame.loc[frame["metric_name"] == "d_estimate_max", "replicate"] == AGGREGATE).all()
    assert "pf_d_estimate" in record.rate_fits
    assert record.series["ensemble_sizes"] == [20, 40, 80]
    assert record.failed_replicates == 0


def test_rows_do_not_depend_on_thread_count() -> None:
    config = ExperimentConfig(experiment="enkf-rate", horizon=3, ensemble_sizes=[10, 20, 40], replicates=4, seed=11)
    serial = run_experiment(config, threads=1).to_frame()
    parallel = run_experiment(config, threads=3).to_frame()
    pd.testing.assert_frame_equal(serial, parallel)


def test_enkf_rate_rows() -> None:
    config = ExperimentConfig(experiment="enkf-rate", horizon=4, ensemble_sizes=[10, 100, 1000], replicates=2, seed=1)
    record = run_experiment(config)
    frame = record.to_frame()
    errors = _values(frame, "moment_error_max").to_numpy()
    assert errors.size == 3
    assert errors[-1] < errors[0]
    assert {"enkf_moment_error", "enkf_d_estimate"} <= set(record.rate_fits)


def test_failed_replicates_become_error_rows() -> None:
    # linear1d has no theta parameter, so every theta fails while building the model
    config = ExperimentConfig(experiment="epsilon-trend", model="linear1d", thetas=[0.0, 0.5])
    record = run_experiment(config)
    frame = record.to_frame()
    assert record.failed_replicates == 2
    assert (_values(frame, ERROR_METRIC) == InvalidModelParameterError.error_code).all()
    assert record.series["theta"] == []


def test_sampling_consistency_rate() -> None:
    config = ExperimentConfig(
        experiment="sampling-consistency", ensemble_sizes=[100, 400, 1600, 6400], replicates=40, seed=3,
    )
    record = run_experiment(config)
    assert -0.75 <= record.rate_fits["sampling_d_estimate"].slope <= -0.25
    bounds = _values(record.to_frame(), "consistency_bound").to_numpy()
    np.testing.assert_allclose(bounds, [0.1, 0.05, 0.025, 0.0125])


def test_single_run_snapshots() -> None:
    config = ExperimentConfig(experiment="single-run", horizon=3, ensemble_sizes=[50], grid_points=501, seed=2)
    record = run_experiment(config)
    assert set(record.snapshots) == {"data", "kalman", "grid", "pf", "enkf_empirical-noise", "enkf_direct-gamma"}
    names = set(record.to_frame()["metric_name"])
    assert {"truth[0]", "kalman.mean[0]", "grid.var[0]", "pf.ess", "enkf_direct-gamma.mean[0]"} <= names
    for snapshot in record.snapshots.values():
        encode_snapshot(snapshot)


def test_single_run_saves_every_snapshot(tmp_path) -> None:
    config = ExperimentConfig(experiment="single-run", horizon=2, ensemble_sizes=[20], grid_points=301, seed=4)
    written = FileRunRecordRepository(tmp_path).save(run_experiment(config))
    assert str(tmp_path / "single-run.csv") in written
    assert str(tmp_path / "single-run.data.json") in written
    pf = pd.read_csv(tmp_path / "single-run.pf.csv")
    assert list(pf.columns) == ["step", "particle", "v1", "weight"]
    assert len(pf) == 3 * 20


def test_data_repository_round_trip(tmp_path, linear1d_data: DataRecord) -> None:
    repository = FileDataRecordRepository(tmp_path)
    repository.save(linear1d_data, "data")
    loaded = repository.load("data")
    np.testing.assert_array_equal(loaded.observations, linear1d_data.observations)


@pytest.mark.slow
def test_pf_rate_slope() -> None:
    config = ExperimentConfig(
        experiment="pf-rate", horizon=10, ensemble_sizes=[100, 1_000, 10_000], replicates=50, seed=7,
    )
    fit = run_experiment(config, threads=4).rate_fits["pf_d_estimate"]
    assert -0.65 <= fit.slope <= -0.35
    assert fit.r_squared > 0.9


@pytest.mark.slow
def test_enkf_rate_slope() -> None:
    config = ExperimentConfig(
        experiment="enkf-rate", horizon=10, ensemble_sizes=[100, 1_000, 10_000], replicates=50, seed=7,
    )
    fit = run_experiment(config, threads=4).rate_fits["enkf_moment_error"]
    assert -0.65 <= fit.slope <= -0.35


@pytest.mark.slow
def test_collapse_grows_with_dimension() -> None:
    config = ExperimentConfig(
        experiment="collapse", model="linearNd", dims=[1, 10, 50, 100], ensemble_sizes=[100], replicates=20, horizon=1,
    )
    medians = run_experiment(config, threads=4).series["median_max_weight"]
    assert np.all(np.diff(medians) >= -1e-9)
    assert medians[-1] > 0.9


@pytest.mark.slow
def test_epsilon_trend() -> None:
    config = ExperimentConfig(
        experiment="epsilon-trend", model="interpolated", thetas=[0.0, 0.25, 0.5, 1.0], horizon=10, seed=0,
    )
    record = run_experiment(config, threads=4)
    epsilons = record.series["epsilon"]
    errors = record.series["dg_error"]
    assert record.series["theta"] == [0.0, 0.25, 0.5, 1.0]
    assert np.all(np.diff(epsilons) >= 0.0)
    assert np.all(np.diff(errors) >= 0.0)
    assert epsilons[0] < 1e-3
    assert errors[0] < 5e-3
    assert set(record.snapshots) == {f"epsilon_theta_{theta:g}" for theta in config.thetas}
