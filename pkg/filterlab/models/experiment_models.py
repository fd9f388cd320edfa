"""
Experiment descriptions and the records they produce.

Every experiment emits tidy rows with one frozen schema; aggregates over replicates use
replicate = -1 and rows not tied to a time step use step = -1.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Literal

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

ExperimentKind = Literal[
    "pf-rate",
    "enkf-rate",
    "mf-exactness",
    "collapse",
    "epsilon-trend",
    "single-run",
    "sampling-consistency",
]
GainVariantName = Literal["empirical-noise", "direct-gamma"]

RATE_EXPERIMENTS: frozenset[str] = frozenset({"pf-rate", "enkf-rate", "sampling-consistency"})
ROW_COLUMNS: list[str] = ["experiment", "model", "theta", "dim", "J", "replicate", "step", "metric_name", "value"]
AGGREGATE = -1
ERROR_METRIC = "error_code"
MEAN_FIELD_REFERENCE_SIZE = 100_000


class ExperimentConfig(BaseModel):
    """Declarative description of one experiment, loaded from JSON."""

    model_config = ConfigDict(frozen=True, extra="forbid", protected_namespaces=())

    experiment: ExperimentKind
    """Which experiment to run."""

    model: str = "linear1d"
    """Name of a built-in model."""

    model_params: dict[str, float | int | None] = Field(default_factory=dict)
    """Overrides of the model defaults."""

    horizon: int = Field(default=10, ge=1)
    """Number of observations N."""

    ensemble_sizes: list[int] = Field(default_factory=list)
    """Ensemble sizes J to sweep."""

    replicates: int = Field(default=1, ge=1)
    """Independent filter realizations M per ensemble size."""

    seed: int = Field(default=0, ge=0, lt=2**64)

    variant: GainVariantName = "direct-gamma"
    """EnKF gain variant."""

    output: str | None = None
    """Directory for the CSV and JSON outputs."""

    thetas: list[float] = Field(default_factory=list)
    """Interpolation parameters for epsilon-trend."""

    dims: list[int] = Field(default_factory=list)
    """State dimensions for collapse."""

    reference_ensemble_size: int = Field(default=MEAN_FIELD_REFERENCE_SIZE, ge=2)
    """J of the particle-approximated mean-field EnKF."""

    grid_points: int = Field(default=4001, ge=3)
    joint_grid_points: int = Field(default=401, ge=3)

    @field_validator("ensemble_sizes")
    @classmethod
    def _ensemble_sizes_are_valid(cls, sizes: list[int]) -> list[int]:
        if any(size < 2 for size in sizes):
            raise ValueError(f"Ensemble sizes must be at least 2, got {sizes}.")
        return sizes

    @field_validator("thetas")
    @classmethod
    def _thetas_are_nonnegative(cls, thetas: list[float]) -> list[float]:
        if any(theta < 0.0 for theta in thetas):
            raise ValueError(f"theta values must be nonnegative, got {thetas}.")
        return thetas

    @field_validator("dims")
    @classmethod
    def _dims_are_positive(cls, dims: list[int]) -> list[int]:
        if any(dim < 1 for dim in dims):
            raise ValueError(f"Dimensions must be positive, got {dims}.")
        return dims

    @model_validator(mode="after")
    def _experiment_has_its_inputs(self) -> ExperimentConfig:
        if self.experiment in RATE_EXPERIMENTS and not self.ensemble_sizes:
            raise ValueError(f"Experiment '{self.experiment}' needs a nonempty 'ensemble_sizes'.")
        if self.experiment == "epsilon-trend" and not self.thetas:
            raise ValueError("Experiment 'epsilon-trend' needs a nonempty 'thetas'.")
        if self.experiment == "collapse" and not self.dims:
            raise ValueError("Experiment 'collapse' needs a nonempty 'dims'.")
        return self


@dataclass(frozen=True)
class ResultRow:
    """One tidy result value."""

    experiment: str
    model: str
    theta: float | None
    dim: int | None
    J: int | None
    replicate: int
    step: int
    metric_name: str
    value: float


@dataclass(frozen=True)
class RateFit:
    """log(error) = intercept + slope * log(J)."""

    slope: float
    intercept: float
    r_squared: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass
class RunRecord:
    """Aggregate root of one experiment run: config echo, result rows, fitted rates and series."""

    config: ExperimentConfig
    """The configuration the run was produced from."""

    rows: list[ResultRow] = field(default_factory=list)
    """Per-step, per-J, per-replicate result rows."""

    rate_fits: dict[str, RateFit] = field(default_factory=dict)
    """Fitted log-log slopes, keyed by the error they were fitted to."""

    series: dict[str, Any] = field(default_factory=dict)
    """JSON-ready arrays for plotting, e.g. epsilon against theta."""

    snapshots: dict[str, Any] = field(default_factory=dict)
    """Filter states and reports to persist next to the tables, keyed by file stem."""

    wall_clock_seconds: float = 0.0
    library_version: str = "0+unknown"

    @property
    def failed_replicates(self) -> int:
        """Number of rows recording a failed replicate."""
        return sum(1 for row in self.rows if row.metric_name == ERROR_METRIC)

    def to_frame(self) -> pd.DataFrame:
        """The rows as a DataFrame with the frozen column order."""
        return pd.DataFrame([asdict(row) for row in self.rows], columns=ROW_COLUMNS)

    def as_dict(self) -> dict[str, Any]:
        """JSON-ready summary of the run; the rows themselves go to CSV."""
        return {
            "config": self.config.model_dump(mode="json"),
            "rate_fits": {name: fit.as_dict() for name, fit in self.rate_fits.items()},
            "series": self.series,
            "row_count": len(self.rows),
            "failed_replicates": self.failed_replicates,
            "wall_clock_seconds": self.wall_clock_seconds,
            "library_version": self.library_version,
        }

    def summary(self) -> Panel:
        """Create a rich panel summarizing the run."""
        table: Table = Table(title=f"{self.config.experiment} on {self.config.model}")

        table.add_column("Field", style="cyan", no_wrap=True)
        table.add_column("Value", style="magenta")

        table.add_row("Horizon N", str(self.config.horizon))
        table.add_row("Ensemble sizes", ", ".join(str(size) for size in self.config.ensemble_sizes) or "-")
        table.add_row("Replicates", str(self.config.replicates))
        table.add_row("Seed", str(self.config.seed))
        table.add_row("Rows", str(len(self.rows)))
        table.add_row("Failed replicates", str(self.failed_replicates))
        for name, fit in self.rate_fits.items():
            table.add_row(f"Slope {name}", f"{fit.slope:.4f} (r2 {fit.r_squared:.3f})")
        for name, values in self.series.items():
            if isinstance(values, list) and values and all(isinstance(v, float) for v in values):
                table.add_row(name, ", ".join(f"{v:.4g}" for v in values))
        table.add_row("Wall clock (s)", f"{self.wall_clock_seconds:.2f}")

        return Panel(table, title=f"filterlab {self.library_version}", expand=False)

    def print_summary(self, console: Console | None = None) -> None:
        """Print the summary of the run in rich format."""
        (console or Console()).print(self.summary())


if __name__ == "__main__":
    import erdantic as erd
    erd.draw(ExperimentConfig, out="docs/experiment_config.png")
