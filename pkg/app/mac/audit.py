"""
Sum-Rate Evaluation and Duality Auditing

With W = I + sum_k H_k Q_k H_k', a set of diagonal duals D_i is feasible when
D_i >= H_i' W^-1 H_i for every user. For any feasible set, the difference
between the dual and primal objectives of the per-antenna sum capacity
problem is

    d = tr(W^-1) + sum_i tr(D_i P_i) - m >= 0,

so d bounds the distance of the current sum rate from the sum capacity.
"""

from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from app.channel.models import MacInstance
from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, DualInfeasibleError
from app.linalg.kernel import hermitize, inv_sqrt_psd, logdet_hpd, max_eigenvalue, min_eigenvalue
from app.single_user.models import DualDiagonal, DualLike, KktResiduals, as_dual


def interference_matrix(instance: MacInstance, covariances: Sequence[np.ndarray], exclude: Optional[int] = None) -> np.ndarray:
    """I + sum over users k != exclude of H_k Q_k H_k'."""
    if len(covariances) != instance.num_users:
        raise DimensionMismatchError(f"{len(covariances)} covariances for {instance.num_users} users")
    W = np.eye(instance.rx_antennas, dtype=complex)
    for k, (H, Q) in enumerate(zip(instance.channels, covariances)):
        if k != exclude:
            W = W + H @ Q @ H.conj().T
    return hermitize(W)


def sum_rate(instance: MacInstance, covariances: Sequence[np.ndarray]) -> float:
    """log det(I + sum_i H_i Q_i H_i') in nats."""
    return logdet_hpd(interference_matrix(instance, covariances))


def effective_channel(instance: MacInstance, covariances: Sequence[np.ndarray], i: int) -> np.ndarray:
    """Whitened channel (I + sum_{k != i} H_k Q_k H_k')^-1/2 H_i of user i."""
    return inv_sqrt_psd(interference_matrix(instance, covariances, exclude=i)) @ instance.channels[i]


def dual_lower_bound(instance: MacInstance, covariances: Sequence[np.ndarray], i: int, W: Optional[np.ndarray] = None) -> np.ndarray:
    """H_i' W^-1 H_i, the matrix every feasible D_i must dominate."""
    W = interference_matrix(instance, covariances) if W is None else W
    H = instance.channels[i]
    return hermitize(H.conj().T @ scipy.linalg.solve(W, H, assume_a="pos"))


def _gap_value(instance: MacInstance, W: np.ndarray, duals: Sequence[DualDiagonal]) -> float:
    W_inv_trace = float(np.real(np.trace(scipy.linalg.solve(W, np.eye(W.shape[0]), assume_a="pos"))))
    dual_value = sum(float(np.dot(D.entries, budget.per_antenna)) for D, budget in zip(duals, instance.budgets))
    return W_inv_trace + dual_value - instance.rx_antennas


def multiuser_gap(
    instance: MacInstance,
    covariances: Sequence[np.ndarray],
    duals: Sequence[DualLike],
    feasibility_tol: Optional[float] = None,
) -> float:
    """
    Duality gap d = tr(W^-1) + sum_i tr(D_i P_i) - m in nats.

    Raises:
        DualInfeasibleError: If some D_i - H_i' W^-1 H_i has an eigenvalue below -feasibility_tol
    """
    feasibility_tol = settings.dual_feasibility_tol if feasibility_tol is None else feasibility_tol
    duals = [as_dual(D) for D in duals]
    if len(duals) != instance.num_users:
        raise DimensionMismatchError(f"{len(duals)} duals for {instance.num_users} users")
    W = interference_matrix(instance, covariances)
    for i, D in enumerate(duals):
        if D.size != instance.tx_antennas[i]:
            raise DimensionMismatchError(f"Dual of user {i} has {D.size} entries, expected {instance.tx_antennas[i]}")
        slack = min_eigenvalue(D.as_matrix() - dual_lower_bound(instance, covariances, i, W))
        if slack < -feasibility_tol:
            raise DualInfeasibleError(user=i, eigenvalue=slack)
    return _gap_value(instance, W, duals)


def feasible_duals(
    instance: MacInstance,
    covariances: Sequence[np.ndarray],
    duals: Sequence[Optional[DualLike]],
) -> List[DualDiagonal]:
    """
    Shift each D_i by max(0, lambda_max(H_i' W^-1 H_i - D_i)) I so it is dual
    feasible. A missing dual is replaced by lambda_max(H_i' W^-1 H_i) I.
    """
    W = interference_matrix(instance, covariances)
    shifted = []
    for i, D in enumerate(duals):
        bound = dual_lower_bound(instance, covariances, i, W)
        if D is None:
            level = max(max_eigenvalue(bound), settings.dual_floor)
            shifted.append(DualDiagonal(np.full(instance.tx_antennas[i], level)))
            continue
        D = as_dual(D)
        excess = max(0.0, max_eigenvalue(bound - D.as_matrix()))
        shifted.append(D if excess == 0.0 else DualDiagonal(D.entries + excess))
    return shifted


def shifted_gap(instance: MacInstance, covariances: Sequence[np.ndarray], duals: Sequence[Optional[DualLike]]) -> float:
    """Duality gap certified by feasible_duals; an upper bound on capacity minus sum rate."""
    W = interference_matrix(instance, covariances)
    return _gap_value(instance, W, feasible_duals(instance, covariances, duals))


def kkt_report_mac(
    instance: MacInstance,
    covariances: Sequence[np.ndarray],
    duals: Sequence[DualLike],
) -> List[KktResiduals]:
    """Per user: min eig of M_i = D_i - H_i' W^-1 H_i, ||M_i Q_i||_F and ||diag(Q_i) - P_i||_inf."""
    W = interference_matrix(instance, covariances)
    report = []
    for i, (Q, D, budget) in enumerate(zip(covariances, duals, instance.budgets)):
        M = hermitize(as_dual(D).as_matrix() - dual_lower_bound(instance, covariances, i, W))
        report.append(
            KktResiduals(
                min_eig_m=min_eigenvalue(M),
                complementarity=float(np.linalg.norm(M @ Q, "fro")),
                power_residual=float(np.max(np.abs(np.real(np.diag(Q)) - budget.per_antenna))),
            )
        )
    return report
