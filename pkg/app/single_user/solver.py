"""
Single-User Mode-Dropping

Capacity of a single-user MIMO channel y = Hx + z under per-antenna power
constraints diag(Q) <= P. For a fixed diagonal dual price D the optimal
covariance Q(D) is available in closed form (mode_drop_covariance); the dual
is then moved by D^-1 <- D^-1 + P - diag(Q), or by Newton steps on the convex
dual function, until the duality gap |tr(D(Q - P))| is below tolerance.

Q(D) satisfies the first optimality condition exactly for every D > 0: with
M := D - H'(I + HQH')^-1 H we always have M >= 0 and MQ = 0. Only the power
equality diag(Q) = P is reached iteratively.
"""

import logging
from typing import Optional, Union

import numpy as np
import scipy.linalg

from app.channel.models import PowerBudget
from app.core.config import settings
from app.core.exceptions import (
    DimensionMismatchError,
    MaxItersExceededError,
    RankDeficientChannelError,
    SingularMatrixError,
    ZeroChannelEntryError,
)
from app.linalg.kernel import hermitize, logdet_hpd, min_eigenvalue, nonpos_eigenmodes, psd_repair, svd

from .models import DualDiagonal, DualLike, DualPoint, KktResiduals, SingleUserResult, as_dual


logger = logging.getLogger(__name__)

# Armijo constant of the dual line search
SUFFICIENT_DECREASE = 1e-4
# Relative change of the dual function treated as rounding
OBJECTIVE_ROUNDING = 1e-12

BudgetLike = Union[PowerBudget, np.ndarray, list]


def budget_vector(P: BudgetLike) -> np.ndarray:
    """Per-antenna budgets as a float vector."""
    if isinstance(P, PowerBudget):
        return np.asarray(P.per_antenna, dtype=float)
    return np.asarray(P, dtype=float).ravel()


def _channel(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    return H.reshape(1, -1) if H.ndim == 1 else H


def single_user_rate(H: np.ndarray, Q: np.ndarray) -> float:
    """log det(I + H Q H') in nats."""
    H = _channel(H)
    return logdet_hpd(np.eye(H.shape[0]) + H @ Q @ H.conj().T)


def mode_drop_covariance(H: np.ndarray, D: DualLike) -> np.ndarray:
    """
    Optimal covariance for a given dual price.

    For m >= n:
        K = V S_n V', F = K D^-1 K', -S = non-positive modes of F - I,
        Z = K^-1 S K^-1', Q = D^-1 - K^-1 K^-1' + Z.
    For m < n, with H = U [S_m 0] [V1 V2]' and pseudo-inverse H^+ = V1 S_m^-1 U':
        -S = non-positive modes of H D^-1 H' - I, Z = H^+ S H^+',
        B = V1'(Z - H^+ H^+') D V2 (V2' D V2)^-1,
        A = (I - B' V1' D V2)(V2' D V2)^-1,
        X = V2 A V2' + V1 B V2' + V2 B' V1',
        Q = D^-1 - H^+ H^+' + Z - X.

    Args:
        H: m x n full-rank channel
        D: Diagonal dual with n positive entries

    Returns:
        Hermitian PSD covariance Q(D)

    Raises:
        RankDeficientChannelError: If H is not full rank
        SingularMatrixError: If V2' D V2 cannot be factorized (m < n)
    """
    H = _channel(H)
    m, n = H.shape
    d = as_dual(D).entries
    if d.size != n:
        raise DimensionMismatchError(f"Dual has {d.size} entries but the channel has {n} tx antennas")
    U, s, V = svd(H)
    if s[0] == 0 or s[-1] <= settings.rank_rel_tol * s[0]:
        raise RankDeficientChannelError(f"Channel is rank deficient: singular values {np.array2string(s, precision=3)}")
    D_inv = np.diag(1.0 / d).astype(complex)

    if m >= n:
        K = (V * s) @ V.conj().T
        K_inv = (V / s) @ V.conj().T
        F = K @ D_inv @ K.conj().T
        S = nonpos_eigenmodes(F - np.eye(n))
        Z = K_inv @ S @ K_inv.conj().T
        Q = D_inv - K_inv @ K_inv.conj().T + Z
    else:
        V1, V2 = V[:, :m], V[:, m:]
        H_pinv = (V1 / s) @ U.conj().T
        S = nonpos_eigenmodes(H @ D_inv @ H.conj().T - np.eye(m))
        Z = H_pinv @ S @ H_pinv.conj().T
        pinv_gram = H_pinv @ H_pinv.conj().T
        D_mat = np.diag(d).astype(complex)
        try:
            factor = scipy.linalg.cho_factor(hermitize(V2.conj().T @ D_mat @ V2))
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"V2' D V2 is numerically singular: {exc}") from exc

        # Right-division by the Hermitian V2' D V2: X C^-1 = (C^-1 X')'
        cross = V1.conj().T @ D_mat @ V2
        B = scipy.linalg.cho_solve(factor, (V1.conj().T @ (Z - pinv_gram) @ D_mat @ V2).conj().T).conj().T
        A = scipy.linalg.cho_solve(factor, (np.eye(n - m) - B.conj().T @ cross).conj().T).conj().T
        X = V2 @ A @ V2.conj().T + V1 @ B @ V2.conj().T + V2 @ B.conj().T @ V1.conj().T
        Q = D_inv - pinv_gram + Z - X

    return psd_repair(hermitize(Q))


def update_dual(D: DualLike, P: BudgetLike, Q: np.ndarray, floor: Optional[float] = None) -> DualDiagonal:
    """
    Dual step D^-1 <- D^-1 + P - diag(Q), entrywise, floored at the dual floor.

    The update is a fixed point exactly when diag(Q) = P.
    """
    floor = settings.dual_floor if floor is None else floor
    d = as_dual(D).entries
    p = budget_vector(P)
    q = np.real(np.diag(Q))
    if not d.size == p.size == q.size:
        raise DimensionMismatchError(f"Dual ({d.size}), budget ({p.size}) and covariance ({q.size}) disagree")
    inverse = np.clip(1.0 / d + p - q, floor, 1.0 / floor)
    return DualDiagonal(1.0 / inverse)


def dual_point(H: np.ndarray, P: BudgetLike, D: DualLike) -> DualPoint:
    """Q(D) with the dual function g(D) = log det(I + HQH') - tr(D(Q - P)) and its gradient P - diag(Q)."""
    H = _channel(H)
    p = budget_vector(P)
    dual = as_dual(D)
    Q = mode_drop_covariance(H, dual)
    q = np.real(np.diag(Q))
    objective = single_user_rate(H, Q) - float(np.dot(dual.entries, q - p))
    return DualPoint(dual=dual, covariance=Q, gradient=p - q, objective=objective)


class DualNewton:
    """
    Damped Newton steps on the dual function g(D) = max_Q log det(I + HQH') - tr(D(Q - P)).

    g is convex in d = diag(D) with gradient P - diag(Q(D)). The plain update
    is a diagonally scaled gradient step on g, which crawls along weakly
    coupled antennas whose dual must shrink by orders of magnitude. The
    Hessian is taken by forward differences of Q(D), one evaluation per
    antenna, and the step is backtracked until g decreases sufficiently or the
    power residual halves with g unchanged up to rounding. When no Newton step
    passes, the plain update is taken instead.
    """

    def __init__(
        self,
        H: np.ndarray,
        P: BudgetLike,
        fd_step: Optional[float] = None,
        floor: Optional[float] = None,
        max_backtracks: int = 30,
    ):
        self.H = _channel(H)
        self.p = budget_vector(P)
        self.fd_step = settings.dual_newton_fd_step if fd_step is None else fd_step
        self.floor = settings.dual_floor if floor is None else floor
        self.max_backtracks = max_backtracks
        self.evaluations = 0
        self.fallbacks = 0

    def evaluate(self, D: DualLike) -> DualPoint:
        self.evaluations += 1
        return dual_point(self.H, self.p, D)

    def plain_step(self, point: DualPoint) -> DualPoint:
        return self.evaluate(update_dual(point.dual, self.p, point.covariance, floor=self.floor))

    def hessian(self, point: DualPoint) -> np.ndarray:
        """Symmetrized forward-difference Hessian of g at point.dual."""
        d = point.dual.entries
        q = self.p - point.gradient
        columns = []
        for j in range(d.size):
            shifted = d.copy()
            shifted[j] += self.fd_step * d[j]
            self.evaluations += 1
            q_shifted = np.real(np.diag(mode_drop_covariance(self.H, DualDiagonal(shifted))))
            columns.append((q - q_shifted) / (shifted[j] - d[j]))
        hessian = np.column_stack(columns)
        return 0.5 * (hessian + hessian.T)

    def direction(self, point: DualPoint) -> Optional[np.ndarray]:
        """Newton direction in d, or None where the Hessian is not positive definite."""
        hessian = self.hessian(point)
        diagonal = np.diag(hessian)
        if not np.all(np.isfinite(hessian)) or np.any(diagonal <= 0):
            return None
        # Jacobi scaling; antenna duals can differ by orders of magnitude
        scale = 1.0 / np.sqrt(diagonal)
        try:
            factor = scipy.linalg.cho_factor(hessian * np.outer(scale, scale))
        except np.linalg.LinAlgError:
            return None
        direction = -scale * scipy.linalg.cho_solve(factor, scale * point.gradient)
        if not np.all(np.isfinite(direction)) or np.dot(point.gradient, direction) >= 0:
            return None
        return direction

    def step(self, point: DualPoint) -> DualPoint:
        direction = self.direction(point)
        if direction is not None:
            d = point.dual.entries
            slope = float(np.dot(point.gradient, direction))
            # Every entry stays within a factor of ten of its value in one step
            limit = np.where(direction < 0, 0.9 * d, 9.0 * d)
            moving = direction != 0
            alpha = min(1.0, float(np.min(limit[moving] / np.abs(direction[moving]))))
            rounding = OBJECTIVE_ROUNDING * max(1.0, abs(point.objective))
            for _ in range(self.max_backtracks):
                trial = self.evaluate(np.clip(d + alpha * direction, self.floor, 1.0 / self.floor))
                if trial.objective <= point.objective + SUFFICIENT_DECREASE * alpha * slope:
                    return trial
                if trial.objective <= point.objective + rounding and trial.power_residual <= 0.5 * point.power_residual:
                    return trial
                alpha *= 0.5
        self.fallbacks += 1
        return self.plain_step(point)


def single_user_gap(D: DualLike, Q: np.ndarray, P: BudgetLike) -> float:
    """Duality gap |tr(D(Q - P))| = |sum_j d_j (Q_jj - P_j)| in nats."""
    d = as_dual(D).entries
    p = budget_vector(P)
    q = np.real(np.diag(Q))
    if not d.size == p.size == q.size:
        raise DimensionMismatchError(f"Dual ({d.size}), budget ({p.size}) and covariance ({q.size}) disagree")
    return float(abs(np.sum(d * (q - p))))


def clip_to_budget(Q: np.ndarray, P: BudgetLike) -> np.ndarray:
    """
    Scale Q by a diagonal congruence SQS so that diag(SQS) <= P.

    S_jj = min(1, sqrt(P_j / Q_jj)); PSD-ness is preserved and entries already
    within budget are untouched.
    """
    p = budget_vector(P)
    q = np.real(np.diag(Q))
    scale = np.ones_like(p)
    over = q > p
    scale[over] = np.sqrt(p[over] / q[over])
    if not np.any(over):
        return hermitize(Q)
    return hermitize(Q * np.outer(scale, scale))


def optimality_multiplier(H: np.ndarray, Q: np.ndarray, D: DualLike) -> np.ndarray:
    """M = D - H'(I + HQH')^-1 H."""
    H = _channel(H)
    W = hermitize(np.eye(H.shape[0]) + H @ Q @ H.conj().T)
    return hermitize(as_dual(D).as_matrix() - H.conj().T @ scipy.linalg.solve(W, H, assume_a="pos"))


def kkt_report_single(H: np.ndarray, P: BudgetLike, Q: np.ndarray, D: DualLike) -> KktResiduals:
    """
    Residuals of the single-user optimality conditions.

    Returns:
        KktResiduals with min eigenvalue of M, ||MQ||_F and ||diag(Q) - P||_inf
    """
    p = budget_vector(P)
    M = optimality_multiplier(H, Q, D)
    return KktResiduals(
        min_eig_m=min_eigenvalue(M),
        complementarity=float(np.linalg.norm(M @ Q, "fro")),
        power_residual=float(np.max(np.abs(np.real(np.diag(Q)) - p))),
    )


def solve_single_user(
    H: np.ndarray,
    P: BudgetLike,
    tol: Optional[float] = None,
    max_iters: Optional[int] = None,
    initial_dual: Optional[DualLike] = None,
    power_tol: Optional[float] = None,
    newton: Optional[bool] = None,
) -> SingleUserResult:
    """
    Single-user capacity under per-antenna power constraints.

    Starting from D = I (or initial_dual), alternates Q = Q(D) and a dual
    update until |tr(D(Q - P))| <= tol and ||diag(Q) - P||_inf <= power_tol.
    The update is a damped Newton step on the dual function (DualNewton),
    or the plain update_dual step when newton is False.

    Args:
        H: m x n full-rank channel
        P: Per-antenna budgets (n entries)
        tol: Gap tolerance in nats (default settings.single_user_tol)
        max_iters: Cap on dual updates (default settings.single_user_max_iters)
        initial_dual: Starting dual, e.g. the dual of a previous solve
        power_tol: Power residual tolerance (default settings.single_user_power_tol)
        newton: Newton steps on the dual (default settings.dual_newton)

    Returns:
        SingleUserResult with a feasible covariance (diag(Q) <= P exactly)

    Raises:
        MaxItersExceededError: Carrying the best iterate and the final gap
    """
    tol = settings.single_user_tol if tol is None else tol
    max_iters = settings.single_user_max_iters if max_iters is None else max_iters
    power_tol = settings.single_user_power_tol if power_tol is None else power_tol
    newton = settings.dual_newton if newton is None else newton
    H = _channel(H)
    p = budget_vector(P)
    if p.size != H.shape[1]:
        raise DimensionMismatchError(f"Budget has {p.size} entries but the channel has {H.shape[1]} tx antennas")

    stepper = DualNewton(H, p)
    point = stepper.evaluate(DualDiagonal.identity(p.size) if initial_dual is None else as_dual(initial_dual))
    gaps = []
    best = None

    for iteration in range(1, max_iters + 1):
        gap = single_user_gap(point.dual, point.covariance, p)
        residual = point.power_residual
        gaps.append(gap)

        score = max(gap, residual)
        if best is None or score < best[0]:
            best = (score, point)

        if gap <= tol and residual <= power_tol:
            covariance = clip_to_budget(point.covariance, p)
            logger.debug(
                "Single-user mode-dropping converged in %d iterations (gap %.3e, %d evaluations, %d plain steps)",
                iteration, gap, stepper.evaluations, stepper.fallbacks,
            )
            return SingleUserResult(
                covariance=covariance,
                dual=point.dual,
                rate_nats=single_user_rate(H, covariance),
                gap_trace=gaps,
                iterations=iteration,
                converged=True,
                power_residual=residual,
            )
        if iteration < max_iters:
            point = stepper.step(point) if newton else stepper.plain_step(point)

    best_point = best[1]
    covariance = clip_to_budget(best_point.covariance, p)
    result = SingleUserResult(
        covariance=covariance,
        dual=best_point.dual,
        rate_nats=single_user_rate(H, covariance),
        gap_trace=gaps,
        iterations=max_iters,
        converged=False,
        power_residual=best_point.power_residual,
    )
    raise MaxItersExceededError(
        f"Single-user mode-dropping did not converge in {max_iters} iterations (gap {gaps[-1]:.3e})",
        result=result,
        gap=gaps[-1],
    )


def miso_closed_form(h: np.ndarray, P: BudgetLike) -> np.ndarray:
    """
    Closed-form optimal covariance of a MISO channel (m = 1).

    q_ij = conj(h_i) h_j / |h_i h_j| * sqrt(P_i P_j): a rank-one beamformer whose
    phases match the channel and whose amplitudes use every antenna's full
    budget, so h Q h' = (sum_i |h_i| sqrt(P_i))^2.

    Raises:
        ZeroChannelEntryError: If some h_i = 0
    """
    h = np.asarray(h, dtype=complex).ravel()
    p = budget_vector(P)
    if h.size != p.size:
        raise DimensionMismatchError(f"Channel has {h.size} entries but the budget has {p.size}")
    magnitudes = np.abs(h)
    if np.any(magnitudes == 0):
        zeros = np.flatnonzero(magnitudes == 0).tolist()
        raise ZeroChannelEntryError(f"MISO closed form undefined: zero channel entries at antennas {zeros}")
    beam = np.conj(h) / magnitudes * np.sqrt(p)
    return hermitize(np.outer(beam, beam.conj()))


def miso_rate(h: np.ndarray, P: BudgetLike) -> float:
    """Capacity ln(1 + (sum_i |h_i| sqrt(P_i))^2) of a MISO channel in nats."""
    h = np.asarray(h, dtype=complex).ravel()
    return float(np.log1p(np.sum(np.abs(h) * np.sqrt(budget_vector(P))) ** 2))
