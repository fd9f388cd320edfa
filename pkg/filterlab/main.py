"""Command line entry point: simulate data and run the filtering experiments from JSON configs."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from filterlab.adapters.persistence.config_files import load_experiment_config, with_overrides
from filterlab.adapters.persistence.file_repositories import FileDataRecordRepository, FileRunRecordRepository
from filterlab.application.builders.experiment_director import DATA_STREAM, run_experiment
from filterlab.application.model_suite import builtin_model
from filterlab.exceptions import ConfigurationError, FilterLabError, IncompatibleExperimentError
from filterlab.models.experiment_models import RATE_EXPERIMENTS, ExperimentConfig
from filterlab.models.measures import RngStream
from filterlab.models.state_space import simulate

logger = logging.getLogger(__name__)

THREADS_ENV = "FILTERS_THREADS"
DEFAULT_OUTPUT = "results"
CONFIG_ERROR_EXIT = 2
SUBCOMMAND_EXPERIMENTS = {"epsilon": "epsilon-trend", "collapse": "collapse"}


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got '{raw}'.") from None


def build_parser() -> argparse.ArgumentParser:
    """The ``filterlab`` argument parser with its five subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON file with an ExperimentConfig")
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed, overrides the config")
    common.add_argument("--out", default=None, help="output directory, overrides the config")
    common.add_argument("--threads", type=int, default=None, help=f"replicate threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="filterlab", description="Filtering experiments: true filter, Kalman, particle filter and EnKF.")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", parents=[common], help="simulate truth and data and save them as JSON")
    commands.add_parser("run", parents=[common], help="run the experiment named in the config")
    commands.add_parser("sweep", parents=[common], help="run an ensemble-size rate sweep")
    commands.add_parser("epsilon", parents=[common], help="run the epsilon-trend experiment")
    commands.add_parser("collapse", parents=[common], help="run the weight-collapse experiment")
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_experiment_config(args.config)
    config = with_overrides(config, seed=args.seed, output=args.out, experiment=SUBCOMMAND_EXPERIMENTS.get(args.command))
    if args.command == "sweep" and config.experiment not in RATE_EXPERIMENTS:
        raise IncompatibleExperimentError(
            f"sweep runs {sorted(RATE_EXPERIMENTS)}, but {args.config} configures '{config.experiment}'.",
        )
    return config


def _simulate(config: ExperimentConfig, output: str) -> list[str]:
    model = builtin_model(config.model, config.model_params)
    data = simulate(model, config.horizon, RngStream(config.seed).child(DATA_STREAM))
    return [FileDataRecordRepository(output).save(data, f"data_{config.model}_seed{config.seed}")]


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Run the command line interface and return the process exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    errors = Console(stderr=True)
    try:
        config = _resolve_config(args)
        output = config.output or DEFAULT_OUTPUT
        threads = args.threads if args.threads is not None else _default_threads()
        if threads < 1:
            raise ConfigurationError(f"--threads must be at least 1, got {threads}.")
        if args.command == "simulate":
            written = _simulate(config, output)
        else:
            record = run_experiment(config, threads=threads)
            written = FileRunRecordRepository(output).save(record)
            record.print_summary()
    except (ValidationError, OSError) as exc:
        errors.print(f"[red]error:[/red] {escape(str(exc))}", soft_wrap=True)
        return CONFIG_ERROR_EXIT
    except FilterLabError as exc:
        errors.print(f"[red]error ({exc.error_code}):[/red] {escape(str(exc))}", soft_wrap=True)
        return exc.exit_code
    for path in written:
        logger.info(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(cli_main())
