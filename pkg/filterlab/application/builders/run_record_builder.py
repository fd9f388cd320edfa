from __future__ import annotations

from collections.abc import Iterable
from typing import Any

from filterlab.models.experiment_models import ExperimentConfig, RateFit, ResultRow, RunRecord


class RunRecordBuilder:
    """
    Builder for RunRecord objects.

    Rows are appended in the order experiments produce them; that order is the row order of the CSV.
    """

    def __init__(self) -> None:
        """Initialize the builder with default values."""
        self.reset()

    def reset(self) -> RunRecordBuilder:
        """Reset the builder to its initial state."""
        self._config: ExperimentConfig | None = None
        self._rows: list[ResultRow] = []
        self._rate_fits: dict[str, RateFit] = {}
        self._series: dict[str, Any] = {}
        self._snapshots: dict[str, Any] = {}
        self._wall_clock_seconds: float | None = None
        self._library_version: str | None = None
        return self

    def set_config(self, config: ExperimentConfig) -> RunRecordBuilder:
        """Set the configuration the run is produced from."""
        self._config = config
        return self

    def add_rows(self, rows: Iterable[ResultRow]) -> RunRecordBuilder:
        """Append result rows."""
        self._rows.extend(rows)
        return self

    def set_rate_fit(self, name: str, fit: RateFit) -> RunRecordBuilder:
        """Record a fitted log-log slope."""
        self._rate_fits[name] = fit
        return self

    def set_series(self, name: str, values: Any) -> RunRecordBuilder:
        """Record a JSON-ready series."""
        self._series[name] = values
        return self

    def add_snapshot(self, name: str, snapshot: Any) -> RunRecordBuilder:
        """Attach a filter state or report to be persisted with the run."""
        if name in self._snapshots:
            raise ValueError(f"Snapshot '{name}' is already set.")
        self._snapshots[name] = snapshot
        return self

    def set_wall_clock(self, seconds: float) -> RunRecordBuilder:
        self._wall_clock_seconds = seconds
        return self

    def set_library_version(self, version: str) -> RunRecordBuilder:
        self._library_version = version
        return self

    def build(self) -> RunRecord:
        """Build and return the RunRecord object."""
        if self._config is None:
            raise ValueError("Experiment config must be set.")
        if self._wall_clock_seconds is None:
            raise ValueError("Wall clock must be set.")
        if self._library_version is None:
            raise ValueError("Library version must be set.")
        return RunRecord(
            config=self._config,
            rows=list(self._rows),
            rate_fits=dict(self._rate_fits),
            series=dict(self._series),
            snapshots=dict(self._snapshots),
            wall_clock_seconds=self._wall_clock_seconds,
            library_version=self._library_version,
        )
