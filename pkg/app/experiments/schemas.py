"""
Experiment Schemas (Pydantic Models)

ExperimentConfig is the validated config every subcommand runs from.
ResultTable is what an experiment returns: named columns, one dict per row,
plus scalar summary values.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.baselines.constraints import ConstraintMode
from app.channel.models import PowerBudget
from app.core.config import settings


class ExperimentKind(str, Enum):
    CONVERGENCE = "convergence"
    COMPLEXITY = "complexity"
    REGION = "region"
    SNR_SWEEP = "snr_sweep"
    USER_SWEEP = "user_sweep"
    SOLVE = "solve"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class ExperimentConfig(BaseModel):
    """
    Validated settings of one experiment run.

    `power` is either one per-antenna budget applied to every antenna or one
    value per transmit antenna; `users` lists the K values to sweep (single-K
    experiments use the first entry).
    """

    kind: ExperimentKind
    users: List[int] = Field(default_factory=lambda: [2], min_length=1, description="Numbers of users K")
    rx: int = Field(4, ge=1, description="Receive antennas m")
    tx: int = Field(4, ge=1, description="Transmit antennas n per user")
    power: List[float] = Field(default_factory=lambda: [0.5], min_length=1, description="Per-antenna budget(s)")
    constraint: ConstraintMode = ConstraintMode.PER_ANTENNA_EQUAL
    realizations: int = Field(default_factory=lambda: settings.realizations, ge=1)
    seed: int = Field(default_factory=lambda: settings.seed, ge=0)
    tol_bits: float = Field(default_factory=lambda: settings.mac_tol_bits, gt=0)
    max_iters: int = Field(default_factory=lambda: settings.mac_max_iterations, ge=1)
    snr_db: List[float] = Field(default_factory=lambda: settings.snr_db_list, min_length=1)
    order: str = "ascending"
    workers: int = Field(default_factory=lambda: settings.workers, ge=1)
    region_points: int = Field(default_factory=lambda: settings.region_points, ge=2)
    format: OutputFormat = OutputFormat.CSV
    out: Optional[str] = None
    instance: Optional[str] = None

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "kind": "convergence",
                "users": [15],
                "rx": 4,
                "tx": 4,
                "power": [0.5],
                "realizations": 50,
                "seed": 7,
            }
        },
    )

    @field_validator("users")
    @classmethod
    def _positive_users(cls, value: List[int]) -> List[int]:
        if any(k < 1 for k in value):
            raise ValueError("every K must be at least 1")
        return value

    @field_validator("power")
    @classmethod
    def _positive_power(cls, value: List[float]) -> List[float]:
        if any(not np.isfinite(p) or p <= 0 for p in value):
            raise ValueError("per-antenna budgets must be finite and positive")
        return value

    @field_validator("order")
    @classmethod
    def _known_order(cls, value: str) -> str:
        if value not in ("ascending", "descending"):
            raise ValueError("order must be 'ascending' or 'descending'")
        return value

    @model_validator(mode="after")
    def _power_matches_antennas(self) -> "ExperimentConfig":
        if len(self.power) not in (1, self.tx):
            raise ValueError(f"power needs 1 or tx={self.tx} entries, got {len(self.power)}")
        return self

    @property
    def num_users(self) -> int:
        return self.users[0]

    def antenna_power(self) -> np.ndarray:
        """Per-antenna budget vector of one user."""
        if len(self.power) == 1:
            return np.full(self.tx, self.power[0])
        return np.array(self.power, dtype=float)

    def budgets(self, num_users: Optional[int] = None) -> List[PowerBudget]:
        num_users = self.num_users if num_users is None else num_users
        return [PowerBudget(self.antenna_power()) for _ in range(num_users)]

    def header(self) -> Dict[str, Any]:
        """
        Config as plain JSON types, for output headers.

        Worker count and output path do not change the results, so they are left
        out and runs differing only in those write identical files.
        """
        return self.model_dump(mode="json", exclude={"workers", "out"})


Cell = Union[int, float, str]


class ResultTable(BaseModel):
    """Rows of one experiment, in a fixed column order."""

    name: str
    columns: List[str]
    rows: List[Dict[str, Cell]] = Field(default_factory=list)
    summary: Dict[str, Cell] = Field(default_factory=dict)

    def add_row(self, **values: Cell) -> None:
        missing = set(self.columns) - set(values)
        if missing:
            raise ValueError(f"row is missing columns {sorted(missing)}")
        self.rows.append({column: _plain(values[column]) for column in self.columns})

    def column(self, name: str) -> List[Cell]:
        return [row[name] for row in self.rows]

    @property
    def nonconverged(self) -> int:
        """Realizations (or solves) that hit an iteration cap anywhere in the run."""
        return int(self.summary.get("nonconverged", 0))


def _plain(value: Any) -> Cell:
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return str(value)
