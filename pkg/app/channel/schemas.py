"""
Instance Schemas (Pydantic Models)

JSON wire format of a MAC instance, used by the CLI `--instance FILE` option:

    {
        "m": 2,
        "users": [
            {"H": [[[1.0, 0.0], [0.5, -0.5]], [[0.0, 1.0], [2.0, 0.0]]], "P": [0.5, 0.5]}
        ]
    }

Complex entries are [re, im] pairs, matrices are row-major lists of rows.
"""

import json
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.exceptions import DimensionMismatchError, InvalidInstanceError, RankDeficientChannelError

from .models import MacInstance, make_instance


ComplexPair = Tuple[float, float]


def encode_matrix(A: np.ndarray) -> List[List[List[float]]]:
    """Encode a complex matrix as row-major [re, im] pairs."""
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def decode_matrix(rows: List[List[ComplexPair]]) -> np.ndarray:
    """Decode row-major [re, im] pairs into a complex matrix."""
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


class UserChannel(BaseModel):
    """One user's channel matrix and per-antenna budget."""

    H: List[List[ComplexPair]] = Field(..., description="m x n channel, entries as [re, im]")
    P: List[float] = Field(..., min_length=1, description="Per-antenna power budgets", examples=[[0.5, 0.5]])

    @model_validator(mode="after")
    def _rectangular(self) -> "UserChannel":
        if not self.H or not self.H[0]:
            raise ValueError("H must be a non-empty matrix")
        width = len(self.H[0])
        if any(len(row) != width for row in self.H):
            raise ValueError("H rows must all have the same length")
        return self


class InstanceFile(BaseModel):
    """Schema of an instance JSON file."""

    m: int = Field(..., ge=1, description="Number of receive antennas", examples=[4])
    users: List[UserChannel] = Field(..., min_length=1, description="One entry per user")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "m": 1,
                "users": [{"H": [[[2.0, 0.0]]], "P": [1.0]}],
            }
        }
    )

    @model_validator(mode="after")
    def _receiver_dimension(self) -> "InstanceFile":
        for index, user in enumerate(self.users):
            if len(user.H) != self.m:
                raise ValueError(f"user {index}: H has {len(user.H)} rows, expected m={self.m}")
        return self

    def to_instance(self) -> MacInstance:
        channels = [decode_matrix(user.H) for user in self.users]
        budgets = [np.array(user.P, dtype=float) for user in self.users]
        return make_instance(channels, budgets)

    @classmethod
    def from_instance(cls, instance: MacInstance) -> "InstanceFile":
        return cls(
            m=instance.rx_antennas,
            users=[
                UserChannel(H=encode_matrix(H), P=[float(p) for p in budget.per_antenna])
                for H, budget in zip(instance.channels, instance.budgets)
            ],
        )


def load_instance(path: Union[str, Path]) -> MacInstance:
    """
    Read and validate an instance file.

    Raises:
        InvalidInstanceError: If the file is missing, not JSON, or fails validation
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
        return InstanceFile.model_validate(payload).to_instance()
    except OSError as exc:
        raise InvalidInstanceError(f"Cannot read instance file {path}: {exc}") from exc
    except (json.JSONDecodeError, ValidationError, ValueError, DimensionMismatchError, RankDeficientChannelError) as exc:
        raise InvalidInstanceError(f"Invalid instance file {path}: {exc}") from exc


def dump_instance(instance: MacInstance, path: Union[str, Path]) -> None:
    Path(path).write_text(InstanceFile.from_instance(instance).model_dump_json(indent=2))
