"""Abstract repository interfaces for run records and replayable data."""
from abc import ABC, abstractmethod

from filterlab.models.experiment_models import RunRecord
from filterlab.models.state_space import DataRecord


class RunRecordRepository(ABC):
    """Repository for RunRecord persistence."""

    @abstractmethod
    def save(self, record: RunRecord) -> list[str]:
        """Persist a run record and return the locations written."""


class DataRecordRepository(ABC):
    """Repository for simulated truth and data, for replaying filters on identical observations."""

    @abstractmethod
    def save(self, data: DataRecord, name: str) -> str:
        """Persist a data record under ``name`` and return its location."""

    @abstractmethod
    def load(self, name: str) -> DataRecord:
        """Load a previously saved data record."""
