"""File-based repositories: tidy CSV tables plus sorted-key JSON documents."""
from __future__ import annotations

import json
import logging
import math
import pathlib
from typing import Any

from filterlab.adapters.persistence.snapshots import encode_snapshot
from filterlab.models.experiment_models import RunRecord
from filterlab.models.repositories import DataRecordRepository, RunRecordRepository
from filterlab.models.state_space import DataRecord

logger = logging.getLogger(__name__)

CSV_OPTIONS: dict[str, Any] = {"index": False, "lineterminator": "\n"}


def json_ready(payload: Any) -> Any:
    """Replace NaN and infinities by None, which JSON can represent."""
    if isinstance(payload, float):
        return payload if math.isfinite(payload) else None
    if isinstance(payload, dict):
        return {key: json_ready(value) for key, value in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [json_ready(value) for value in payload]
    return payload


def write_json(path: pathlib.Path, payload: Any) -> None:
    """Write strict JSON with sorted keys so equal payloads give equal bytes."""
    text = json.dumps(json_ready(payload), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


class FileRunRecordRepository(RunRecordRepository):
    """Writes ``<experiment>.csv``, ``<experiment>.json`` and one file per snapshot into a directory."""

    def __init__(self, directory: str | pathlib.Path) -> None:
        self._directory = pathlib.Path(directory)

    def save(self, record: RunRecord) -> list[str]:
        """Persist the record and return the written paths."""
        self._directory.mkdir(parents=True, exist_ok=True)
        stem = record.config.experiment
        table_path = self._directory / f"{stem}.csv"
        summary_path = self._directory / f"{stem}.json"
        record.to_frame().to_csv(table_path, **CSV_OPTIONS)
        write_json(summary_path, record.as_dict())
        written = [table_path, summary_path]
        for name, snapshot in record.snapshots.items():
            encoded = encode_snapshot(snapshot)
            if isinstance(encoded, dict):
                path = self._directory / f"{stem}.{name}.json"
                write_json(path, encoded)
            else:
                path = self._directory / f"{stem}.{name}.csv"
                encoded.to_csv(path, **CSV_OPTIONS)
            written.append(path)
        logger.info(f"Wrote {len(written)} files to {self._directory}")
        return [str(path) for path in written]


class FileDataRecordRepository(DataRecordRepository):
    """Stores DataRecords as ``<name>.json``."""

    def __init__(self, directory: str | pathlib.Path) -> None:
        self._directory = pathlib.Path(directory)

    def _path(self, name: str) -> pathlib.Path:
        return self._directory / f"{name}.json"

    def save(self, data: DataRecord, name: str) -> str:
        self._directory.mkdir(parents=True, exist_ok=True)
        path = self._path(name)
        write_json(path, data.as_dict())
        return str(path)

    def load(self, name: str) -> DataRecord:
        path = self._path(name)
        return DataRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
