"""
MAC Problem Instances

In-memory domain types for a K-user Gaussian MIMO multiple-access channel
y = sum_i H_i x_i + z with unit receiver noise. These play the role ORM models
play in a web app: the validated shapes every other module works on. The JSON
wire format lives in schemas.py.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, RankDeficientChannelError


@dataclass(frozen=True, eq=False)
class PowerBudget:
    """Per-antenna power caps P_i = diag{P_i1, ..., P_in} of one user."""

    per_antenna: np.ndarray

    def __post_init__(self):
        values = np.array(self.per_antenna, dtype=float).ravel()
        if values.size == 0:
            raise DimensionMismatchError("Power budget must have at least one antenna")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError(f"Per-antenna budgets must be finite and positive, got {values.tolist()}")
        values.setflags(write=False)
        object.__setattr__(self, "per_antenna", values)

    @property
    def size(self) -> int:
        return int(self.per_antenna.size)

    @property
    def total(self) -> float:
        return float(np.sum(self.per_antenna))


@dataclass(frozen=True)
class SumBudget:
    """Total transmit power cap tr(Q_i) <= total of one user."""

    total: float

    def __post_init__(self):
        if not np.isfinite(self.total) or self.total <= 0:
            raise ValueError(f"Sum budget must be finite and positive, got {self.total}")


@dataclass(frozen=True, eq=False)
class MacInstance:
    """
    Validated K-user MAC instance.

    Attributes:
        channels: K complex matrices, channel i is m x n_i
        budgets: K per-antenna budgets, budget i has n_i entries
    """

    channels: Tuple[np.ndarray, ...]
    budgets: Tuple[PowerBudget, ...]

    @property
    def num_users(self) -> int:
        return len(self.channels)

    @property
    def rx_antennas(self) -> int:
        return int(self.channels[0].shape[0])

    @property
    def tx_antennas(self) -> Tuple[int, ...]:
        return tuple(int(H.shape[1]) for H in self.channels)

    def sum_budgets(self) -> Tuple[SumBudget, ...]:
        """Sum-power budgets with total_i = sum_j P_ij."""
        return tuple(SumBudget(budget.total) for budget in self.budgets)

    def with_budgets(self, budgets: Sequence[PowerBudget]) -> "MacInstance":
        """Same channels, different per-antenna budgets."""
        return make_instance(self.channels, budgets)


def check_full_rank(H: np.ndarray, user: Optional[int] = None, rel_tol: Optional[float] = None) -> None:
    """
    Reject channels whose smallest singular value is below rel_tol * largest.

    Raises:
        RankDeficientChannelError: If H is not numerically full rank
    """
    rel_tol = settings.rank_rel_tol if rel_tol is None else rel_tol
    singular_values = np.linalg.svd(H, compute_uv=False)
    label = "Channel" if user is None else f"Channel of user {user}"
    if singular_values.size == 0 or singular_values[0] == 0:
        raise RankDeficientChannelError(f"{label} is zero")
    if singular_values[-1] <= rel_tol * singular_values[0]:
        raise RankDeficientChannelError(
            f"{label} is rank deficient: singular values {np.array2string(singular_values, precision=3)}"
        )


def make_instance(channels: Sequence[np.ndarray], budgets: Sequence) -> MacInstance:
    """
    Build a validated MAC instance.

    Args:
        channels: K complex matrices sharing the receiver dimension m
        budgets: K PowerBudget objects (or per-antenna vectors)

    Returns:
        Immutable MacInstance

    Raises:
        DimensionMismatchError: If counts or dimensions disagree
        RankDeficientChannelError: If some channel is not full rank
    """
    if len(channels) == 0:
        raise DimensionMismatchError("An instance needs at least one user")
    if len(channels) != len(budgets):
        raise DimensionMismatchError(f"{len(channels)} channels but {len(budgets)} budgets")

    matrices = []
    for i, H in enumerate(channels):
        H = np.array(H, dtype=complex)
        if H.ndim == 1:
            H = H.reshape(1, -1)
        if H.ndim != 2 or H.size == 0:
            raise DimensionMismatchError(f"Channel of user {i} must be a non-empty matrix")
        if not np.all(np.isfinite(H)):
            raise ValueError(f"Channel of user {i} has non-finite entries")
        matrices.append(H)

    m = matrices[0].shape[0]
    normalized_budgets = []
    for i, (H, budget) in enumerate(zip(matrices, budgets)):
        if H.shape[0] != m:
            raise DimensionMismatchError(f"Channel of user {i} has {H.shape[0]} rows, expected m={m}")
        if not isinstance(budget, PowerBudget):
            budget = PowerBudget(np.asarray(budget, dtype=float))
        if budget.size != H.shape[1]:
            raise DimensionMismatchError(
                f"Budget of user {i} has {budget.size} entries but the channel has {H.shape[1]} tx antennas"
            )
        check_full_rank(H, user=i)
        H.setflags(write=False)
        normalized_budgets.append(budget)

    return MacInstance(channels=tuple(matrices), budgets=tuple(normalized_budgets))
