import json
import pathlib

import pandas as pd
import pytest

from filterlab.main import CONFIG_ERROR_EXIT, cli_main
from filterlab.models.experiment_models import ROW_COLUMNS


def _write_config(directory: pathlib.Path, name: str, **fields) -> pathlib.Path:
    path = directory / name
    path.write_text(json.dumps(fields), encoding="utf-8")
    return path


def test_missing_config_exits_with_configuration_error(tmp_path: pathlib.Path, capsys: pytest.CaptureFixture[str]) -> None:
    missing = tmp_path / "nope.json"
    assert cli_main(["run", "--config", str(missing)]) == CONFIG_ERROR_EXIT
    assert str(missing) in capsys.readouterr().err


def test_invalid_config_exits_with_configuration_error(tmp_path: pathlib.Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = _write_config(tmp_path, "bad.json", experiment="pf-rate", ensemble_sizes=[1, 2, 3])
    assert cli_main(["run", "--config", str(config)]) == CONFIG_ERROR_EXIT
    assert "bad.json" in capsys.readouterr().err


def test_sweep_needs_a_rate_experiment(tmp_path: pathlib.Path) -> None:
    config = _write_config(tmp_path, "mf.json", experiment="mf-exactness")
    assert cli_main(["sweep", "--config", str(config), "--out", str(tmp_path)]) == CONFIG_ERROR_EXIT


def test_threads_must_be_positive(tmp_path: pathlib.Path) -> None:
    config = _write_config(tmp_path, "mf.json", experiment="mf-exactness")
    assert cli_main(["run", "--config", str(config), "--threads", "0"]) == CONFIG_ERROR_EXIT


def test_run_writes_tidy_csv_and_json(tmp_path: pathlib.Path) -> None:
    config = _write_config(tmp_path, "mf.json", experiment="mf-exactness", model="linear1d", horizon=5)
    out = tmp_path / "out"
    assert cli_main(["run", "--config", str(config), "--out", str(out), "--seed", "3"]) == 0
    frame = pd.read_csv(out / "mf-exactness.csv")
    assert list(frame.columns) == ROW_COLUMNS
    summary = json.loads((out / "mf-exactness.json").read_text(encoding="utf-8"))
    assert summary["config"]["seed"] == 3
    assert summary["failed_replicates"] == 0


def test_sweep_is_byte_reproducible(tmp_path: pathlib.Path) -> None:
    config = _write_config(
        tmp_path, "sweep.json", experiment="pf-rate", horizon=3, ensemble_sizes=[10, 20, 40], replicates=2, seed=9,
    )
    first, second = tmp_path / "first", tmp_path / "second"
    assert cli_main(["sweep", "--config", str(config), "--out", str(first)]) == 0
    assert cli_main(["sweep", "--config", str(config), "--out", str(second), "--threads", "2"]) == 0
    assert (first / "pf-rate.csv").read_bytes() == (second / "pf-rate.csv").read_bytes()


def test_simulate_writes_data_record(tmp_path: pathlib.Path) -> None:
    config = _write_config(tmp_path, "sim.json", experiment="single-run", model="linearNd", horizon=4, seed=12)
    assert cli_main(["simulate", "--config", str(config), "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "data_linearNd_seed12.json").read_text(encoding="utf-8"))
    assert len(payload["truth"]) == 5
    assert len(payload["observations"]) == 4


def test_epsilon_subcommand_writes_theta_series(tmp_path: pathlib.Path) -> None:
    config = _write_config(
        tmp_path,
        "theta_sweep.json",
        experiment="epsilon-trend",
        model="interpolated",
        thetas=[0.0, 0.5],
        horizon=2,
        reference_ensemble_size=500,
        grid_points=801,
        joint_grid_points=101,
    )
    out = tmp_path / "out"
    assert cli_main(["epsilon", "--config", str(config), "--out", str(out)]) == 0
    summary = json.loads((out / "epsilon-trend.json").read_text(encoding="utf-8"))
    assert summary["series"]["theta"] == [0.0, 0.5]
    assert len(summary["series"]["epsilon"]) == 2
    assert len(summary["series"]["dg_error"]) == 2
    assert (out / "epsilon-trend.epsilon_theta_0.5.json").is_file()


def test_collapse_subcommand_overrides_the_experiment(tmp_path: pathlib.Path) -> None:
    config = _write_config(
        tmp_path, "collapse.json", experiment="collapse", model="linearNd", dims=[1, 2], replicates=2, horizon=1,
    )
    out = tmp_path / "out"
    assert cli_main(["collapse", "--config", str(config), "--out", str(out)]) == 0
    frame = pd.read_csv(out / "collapse.csv")
    assert set(frame["dim"].dropna().astype(int)) == {1, 2}
