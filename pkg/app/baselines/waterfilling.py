"""
Water-Filling Under a Sum-Power Constraint

Single-user water-filling over the eigenmodes of H'H, and iterative
water-filling for the sum-power MAC built on the same successive-update loop
as iterative mode-dropping.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from app.channel.models import MacInstance, SumBudget
from app.core.config import settings
from app.core.exceptions import DimensionMismatchError
from app.linalg.kernel import hermitize, max_eigenvalue, svd
from app.mac.audit import dual_lower_bound, interference_matrix
from app.mac.models import SolveReport, UserStep
from app.mac.solver import OrderLike, successive_optimization


TotalLike = Union[SumBudget, float]


def _total(value: TotalLike) -> float:
    return float(value.total if isinstance(value, SumBudget) else SumBudget(float(value)).total)


def water_fill_gains(gains: np.ndarray, total: float) -> Tuple[np.ndarray, float]:
    """
    Powers p_k = max(mu - 1/g_k, 0) with sum(p) = total.

    The water level is found by scanning active sets over the gains sorted in
    descending order; zero gains never receive power.

    Args:
        gains: Nonnegative power gains of the parallel channels
        total: Total power

    Returns:
        (powers, water_level), powers in the input order
    """
    gains = np.asarray(gains, dtype=float).ravel()
    if np.any(gains < 0):
        raise ValueError("Channel gains must be nonnegative")
    if not np.any(gains > 0):
        raise ValueError("At least one channel gain must be positive")
    if total < 0:
        raise ValueError(f"Total power must be nonnegative, got {total}")

    order = np.argsort(gains)[::-1]
    positive = gains[order][gains[order] > 0]
    inverse = 1.0 / positive
    level = inverse[0]
    for active in range(positive.size, 0, -1):
        level = (total + inverse[:active].sum()) / active
        if level > inverse[active - 1]:
            break

    powers = np.zeros_like(gains)
    powers[order[: positive.size]] = np.maximum(level - inverse, 0.0)
    return powers, float(level)


def water_fill(H: np.ndarray, total_power: TotalLike) -> np.ndarray:
    """
    Capacity-achieving covariance V diag(p) V' of one user under tr(Q) <= total.

    The gains are the squared singular values of H; modes beyond rank(H) get no power.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim == 1:
        H = H.reshape(1, -1)
    total = _total(total_power)
    _, s, V = svd(H)
    gains = np.zeros(H.shape[1])
    gains[: s.size] = s ** 2
    powers, _ = water_fill_gains(gains, total)
    return hermitize((V * powers) @ V.conj().T)


def sum_power_gap(instance: MacInstance, covariances: Sequence[np.ndarray], totals: Sequence[TotalLike]) -> float:
    """
    Duality gap of the sum-power problem with lambda_i = lambda_max(H_i' W^-1 H_i):
    tr(W^-1) + sum_i lambda_i total_i - m.
    """
    if len(totals) != instance.num_users:
        raise DimensionMismatchError(f"{len(totals)} totals for {instance.num_users} users")
    W = interference_matrix(instance, covariances)
    gap = float(np.real(np.trace(np.linalg.inv(W)))) - instance.rx_antennas
    for i, total in enumerate(totals):
        gap += max_eigenvalue(dual_lower_bound(instance, covariances, i, W)) * _total(total)
    return gap


def iterative_water_fill(
    instance: MacInstance,
    totals: Optional[Sequence[TotalLike]] = None,
    tol_bits: Optional[float] = None,
    max_iterations: Optional[int] = None,
    order: OrderLike = "ascending",
    initial: Optional[Sequence[np.ndarray]] = None,
    raise_on_max_iters: bool = True,
) -> SolveReport:
    """
    Sum capacity under per-user sum-power constraints.

    Each user step water-fills its total over the effective channel.

    Args:
        totals: Per-user totals (default: sum of each user's per-antenna budget)

    Raises:
        MaxItersExceededError: Carrying the unconverged report, if raise_on_max_iters
    """
    totals = [budget.total for budget in instance.sum_budgets()] if totals is None else [_total(t) for t in totals]
    if len(totals) != instance.num_users:
        raise DimensionMismatchError(f"{len(totals)} totals for {instance.num_users} users")

    def step(i: int, H_eff: np.ndarray, dual) -> UserStep:
        return UserStep(covariance=water_fill(H_eff, totals[i]))

    return successive_optimization(
        instance,
        step=step,
        gap=lambda inst, covariances, duals: sum_power_gap(inst, covariances, totals),
        tol_bits=settings.mac_tol_bits if tol_bits is None else tol_bits,
        max_iterations=max_iterations,
        order=order,
        initial=initial,
        raise_on_max_iters=raise_on_max_iters,
        label="Iterative water-filling",
    )
