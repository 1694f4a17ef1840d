"""
MAC Solve Models

Domain types shared by iterative mode-dropping and iterative water-filling:
covariance sets, the per-user step outcome and the SolveReport.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.channel.models import MacInstance
from app.core.exceptions import DimensionMismatchError
from app.linalg.kernel import min_eigenvalue
from app.single_user.models import DualDiagonal


CovarianceSet = List[np.ndarray]

LN2 = float(np.log(2.0))


def nats_to_bits(value: float) -> float:
    return value / LN2


def zero_covariances(instance: MacInstance) -> CovarianceSet:
    return [np.zeros((n, n), dtype=complex) for n in instance.tx_antennas]


def check_covariance_set(
    instance: MacInstance,
    covariances: Sequence[np.ndarray],
    budget_slack: Optional[float] = 1e-8,
    psd_slack: float = 1e-9,
) -> CovarianceSet:
    """
    Validate one covariance per user: right shape, Hermitian PSD and, unless
    budget_slack is None, diag(Q_i) <= P_i + budget_slack.

    Returns:
        Copies of the covariances as complex arrays
    """
    if len(covariances) != instance.num_users:
        raise DimensionMismatchError(f"{len(covariances)} covariances for {instance.num_users} users")
    checked = []
    for i, (Q, n, budget) in enumerate(zip(covariances, instance.tx_antennas, instance.budgets)):
        Q = np.array(Q, dtype=complex)
        if Q.shape != (n, n):
            raise DimensionMismatchError(f"Covariance of user {i} has shape {Q.shape}, expected {(n, n)}")
        if not np.allclose(Q, Q.conj().T, atol=1e-12):
            raise ValueError(f"Covariance of user {i} is not Hermitian")
        if min_eigenvalue(Q) < -psd_slack * max(1.0, float(np.linalg.norm(Q, 2))):
            raise ValueError(f"Covariance of user {i} is not positive semidefinite")
        if budget_slack is not None and np.any(np.real(np.diag(Q)) > budget.per_antenna + budget_slack):
            raise ValueError(f"Covariance of user {i} exceeds its per-antenna budget")
        checked.append(Q)
    return checked


@dataclass
class UserStep:
    """Outcome of one user update inside a sweep."""

    covariance: np.ndarray
    dual: Optional[DualDiagonal] = None
    inner_iterations: int = 1
    converged: bool = True


@dataclass(eq=False)
class SolveReport:
    """
    Outcome of a successive user-update solve.

    Attributes:
        covariances: Final covariance per user
        duals: Latest single-user dual per user (None under a sum-power constraint)
        initial_rate_nats: Sum rate of the starting covariances
        rate_trace_nats: Sum rate after every user-update step
        inner_iteration_trace: Inner iterations of every user-update step
        gap_trace_nats: Duality gap after every sweep
        iteration_rates_nats: Sum rate after every sweep
        iterations: Number of sweeps performed
        converged: Whether both stop conditions were met
        single_user_call_count: Number of single-user subproblems solved
        single_user_iterations: Total inner iterations across those solves
        inner_nonconverged: Single-user solves that hit their iteration cap
        order: User update order of each sweep
    """

    covariances: CovarianceSet
    duals: List[Optional[DualDiagonal]]
    initial_rate_nats: float = 0.0
    rate_trace_nats: List[float] = field(default_factory=list)
    inner_iteration_trace: List[int] = field(default_factory=list)
    gap_trace_nats: List[float] = field(default_factory=list)
    iteration_rates_nats: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    single_user_call_count: int = 0
    single_user_iterations: int = 0
    inner_nonconverged: int = 0
    order: Tuple[int, ...] = ()

    @property
    def sum_rate_nats(self) -> float:
        return self.iteration_rates_nats[-1] if self.iteration_rates_nats else self.initial_rate_nats

    @property
    def sum_rate_bits(self) -> float:
        return nats_to_bits(self.sum_rate_nats)

    @property
    def gap_nats(self) -> float:
        return self.gap_trace_nats[-1] if self.gap_trace_nats else float("nan")

    def rate_after_sweep(self, sweep: int) -> float:
        """Sum rate in nats after the given 1-based sweep; later sweeps repeat the final value."""
        if sweep < 1:
            return self.initial_rate_nats
        if not self.iteration_rates_nats:
            return self.initial_rate_nats
        return self.iteration_rates_nats[min(sweep, len(self.iteration_rates_nats)) - 1]


@dataclass(frozen=True)
class GapAudit:
    """Duality gap after one zero-initialised sweep against its two candidate bounds."""

    gap_nats: float
    bound_nats: float
    half_bound_nats: float
    sum_rate_nats: float
    slack_nats: float = 1e-6

    @property
    def within_bound(self) -> bool:
        return self.gap_nats <= self.bound_nats + self.slack_nats

    @property
    def within_half_bound(self) -> bool:
        return self.gap_nats <= self.half_bound_nats + self.slack_nats
