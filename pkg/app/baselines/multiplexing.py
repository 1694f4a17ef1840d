"""
Independent Spatial Multiplexing and Per-Scenario Capacity

Spatial multiplexing sends independent streams from every antenna with a
fixed diagonal covariance, so its rate needs no optimization.
capacity_for_mode evaluates one channel realization under any ConstraintMode.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.channel.models import MacInstance
from app.mac.audit import sum_rate
from app.mac.models import SolveReport, nats_to_bits
from app.mac.solver import solve_mac

from .constraints import ConstraintMode, antenna_budgets, budgets_for_mode
from .waterfilling import iterative_water_fill


def spatial_multiplexing_rate(instance: MacInstance, mode: Optional[ConstraintMode] = None) -> float:
    """
    Sum rate in nats with diagonal covariances.

    With mode None each Q_i = diag(P_i) of the instance; otherwise each user's
    total sum(P_i) is re-split per the mode (SM_EQUAL uniform, SM_UNEQUAL
    proportional to the antenna index).
    """
    if mode is None:
        diagonals = [budget.per_antenna for budget in instance.budgets]
    else:
        mode = ConstraintMode(mode)
        if not mode.spatial_multiplexing:
            raise ValueError(f"{mode.value} is not a spatial multiplexing mode")
        diagonals = [antenna_budgets(mode, budget.total, budget.size) for budget in instance.budgets]
    return sum_rate(instance, [np.diag(p).astype(complex) for p in diagonals])


@dataclass(frozen=True)
class ModeCapacity:
    """Rate of one realization under one scenario."""

    mode: ConstraintMode
    rate_nats: float
    converged: bool = True
    report: Optional[SolveReport] = None

    @property
    def rate_bits(self) -> float:
        return nats_to_bits(self.rate_nats)


def capacity_for_mode(
    instance: MacInstance,
    mode: ConstraintMode,
    total: float,
    tol_bits: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> ModeCapacity:
    """
    Sum capacity (or SM rate) of the instance's channels when every user has
    total power `total` constrained per the mode.

    Non-convergence is reported through ModeCapacity.converged, not raised.
    """
    mode = ConstraintMode(mode)
    scenario = instance.with_budgets(budgets_for_mode(mode, total, instance.tx_antennas))
    if mode.spatial_multiplexing:
        return ModeCapacity(mode=mode, rate_nats=spatial_multiplexing_rate(scenario))
    if mode is ConstraintMode.SUM_POWER:
        report = iterative_water_fill(scenario, tol_bits=tol_bits, max_iterations=max_iterations, raise_on_max_iters=False)
    else:
        report = solve_mac(scenario, tol_bits=tol_bits, max_iterations=max_iterations, raise_on_max_iters=False)
    return ModeCapacity(mode=mode, rate_nats=report.sum_rate_nats, converged=report.converged, report=report)
