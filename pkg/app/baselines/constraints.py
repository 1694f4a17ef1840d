"""
Constraint Scenarios

The five ways a user's power can be constrained or allocated in the capacity
comparisons, and the per-antenna budgets each one implies for a per-user total
power. Unequal splits give antenna k (1-based) power proportional to k,
normalized so the per-user total matches the equal split.
"""

from enum import Enum
from typing import List, Sequence

import numpy as np

from app.channel.models import PowerBudget


class ConstraintMode(str, Enum):
    PER_ANTENNA_EQUAL = "per-antenna-equal"
    PER_ANTENNA_UNEQUAL = "per-antenna-unequal"
    SUM_POWER = "sum-power"
    SM_EQUAL = "sm-equal"
    SM_UNEQUAL = "sm-unequal"

    @property
    def unequal(self) -> bool:
        return self in (ConstraintMode.PER_ANTENNA_UNEQUAL, ConstraintMode.SM_UNEQUAL)

    @property
    def spatial_multiplexing(self) -> bool:
        return self in (ConstraintMode.SM_EQUAL, ConstraintMode.SM_UNEQUAL)


def snr_db_to_power(snr_db: float) -> float:
    """Per-user total transmit power for an SNR in dB over unit noise."""
    return float(10.0 ** (snr_db / 10.0))


def antenna_budgets(mode: ConstraintMode, total: float, n: int) -> np.ndarray:
    """
    Per-antenna power vector of one user with the given total.

    Equal modes (and SUM_POWER, whose budget is only its total) split evenly;
    unequal modes use weights k / sum(1..n).
    """
    if total <= 0:
        raise ValueError(f"Total power must be positive, got {total}")
    if n < 1:
        raise ValueError(f"Antenna count must be positive, got {n}")
    mode = ConstraintMode(mode)
    if mode.unequal:
        weights = np.arange(1, n + 1, dtype=float)
        return total * weights / weights.sum()
    return np.full(n, total / n)


def budgets_for_mode(mode: ConstraintMode, total: float, tx_antennas: Sequence[int]) -> List[PowerBudget]:
    return [PowerBudget(antenna_budgets(mode, total, n)) for n in tx_antennas]
