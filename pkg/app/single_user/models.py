"""Domain types of the single-user mode-dropping solver."""

from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from app.core.config import settings


@dataclass(frozen=True, eq=False)
class DualDiagonal:
    """
    Diagonal dual price D = diag{d_1, ..., d_n} of the per-antenna constraint.

    Entries are kept at or above the dual floor so D stays positive definite.
    """

    entries: np.ndarray

    def __post_init__(self):
        values = np.array(self.entries, dtype=float).ravel()
        if values.size == 0 or not np.all(np.isfinite(values)):
            raise ValueError("Dual entries must be a non-empty finite vector")
        floor = settings.dual_floor
        if np.any(values < floor):
            raise ValueError(f"Dual entries must be at least {floor:g}, got min {values.min():.3e}")
        values.setflags(write=False)
        object.__setattr__(self, "entries", values)

    @classmethod
    def identity(cls, n: int) -> "DualDiagonal":
        return cls(np.ones(n))

    @property
    def size(self) -> int:
        return int(self.entries.size)

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.entries).astype(complex)


DualLike = Union[DualDiagonal, np.ndarray, List[float]]


def as_dual(value: DualLike) -> DualDiagonal:
    return value if isinstance(value, DualDiagonal) else DualDiagonal(np.asarray(value, dtype=float))


@dataclass(frozen=True, eq=False)
class DualPoint:
    """
    A dual price together with its covariance Q(D).

    Attributes:
        dual: Dual D
        covariance: Q(D) from mode_drop_covariance
        gradient: P - diag(Q), the gradient of the dual function at D
        objective: Dual function log det(I + HQH') - tr(D(Q - P)), an upper bound on the capacity
    """

    dual: DualDiagonal
    covariance: np.ndarray
    gradient: np.ndarray
    objective: float

    @property
    def power_residual(self) -> float:
        return float(np.max(np.abs(self.gradient)))


@dataclass(frozen=True)
class KktResiduals:
    """
    Residuals of the per-antenna optimality conditions for one user.

    Attributes:
        min_eig_m: Smallest eigenvalue of M = D - H'(I + HQH')^-1 H (should be >= 0)
        complementarity: ||M Q||_F (should be 0)
        power_residual: ||diag(Q) - P||_inf (should be 0)
    """

    min_eig_m: float
    complementarity: float
    power_residual: float

    def max_violation(self) -> float:
        return max(-self.min_eig_m, self.complementarity, self.power_residual, 0.0)

    def as_dict(self) -> dict:
        return {
            "min_eig_m": self.min_eig_m,
            "complementarity": self.complementarity,
            "power_residual": self.power_residual,
        }


@dataclass(eq=False)
class SingleUserResult:
    """
    Outcome of single-user mode-dropping.

    Attributes:
        covariance: Optimal transmit covariance Q (Hermitian PSD, diag(Q) <= P)
        dual: Dual D that produced the covariance
        rate_nats: log det(I + H Q H')
        gap_trace: |tr(D(Q - P))| after every Q(D) evaluation
        iterations: Number of dual points visited (one per entry of gap_trace)
        converged: Whether the stop rule was met
    """

    covariance: np.ndarray
    dual: DualDiagonal
    rate_nats: float
    gap_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    power_residual: Optional[float] = None

    @property
    def gap(self) -> float:
        return self.gap_trace[-1] if self.gap_trace else float("nan")
