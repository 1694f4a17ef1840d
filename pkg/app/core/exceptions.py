"""
Domain Exceptions

Every failure the solvers and the harness can report derives from
MacCapacityError. Each class carries the process exit code the CLI returns for
it.

Exit codes:
- 0: success
- 1: invalid input or a numerical precondition violated
- 2: a solver did not converge (partial results may have been written)
"""

from typing import Any, Optional


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NOT_CONVERGED = 2


class MacCapacityError(Exception):
    """Base class for all domain errors."""

    exit_code: int = EXIT_FAILURE

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class SingularMatrixError(MacCapacityError):
    """A matrix that must be positive definite is numerically singular."""


class NotNearPsdError(MacCapacityError):
    """A matrix expected to be PSD has a significantly negative eigenvalue."""

    def __init__(self, min_eigenvalue: float, threshold: float):
        super().__init__(
            f"Matrix is not near PSD: min eigenvalue {min_eigenvalue:.3e} below -{threshold:.3e}"
        )
        self.min_eigenvalue = min_eigenvalue
        self.threshold = threshold


class EigenDecompositionError(MacCapacityError):
    """The eigensolver or SVD failed to converge."""


class DimensionMismatchError(MacCapacityError):
    """Channel, budget or covariance dimensions are inconsistent."""


class RankDeficientChannelError(MacCapacityError):
    """A channel matrix is not full rank."""


class ZeroChannelEntryError(MacCapacityError):
    """The MISO closed form is undefined because a channel entry is zero."""


class InvalidInstanceError(MacCapacityError):
    """An instance file or configuration failed validation."""


class NotTwoUsersError(MacCapacityError):
    """The two-user region was requested for an instance with K != 2."""


class DualInfeasibleError(MacCapacityError):
    """A dual variable violates D_i >= H_i' W^-1 H_i."""

    def __init__(self, user: int, eigenvalue: float):
        super().__init__(
            f"Dual of user {user} is infeasible: min eigenvalue of D - H'W^-1 H is {eigenvalue:.3e}"
        )
        self.user = user
        self.eigenvalue = eigenvalue


class MaxItersExceededError(MacCapacityError):
    """
    A solver hit its iteration cap before meeting its tolerance.

    Attributes:
        result: Best iterate found (SingleUserResult or SolveReport)
        gap: Final duality gap in nats
    """

    exit_code = EXIT_NOT_CONVERGED

    def __init__(self, detail: str, result: Any, gap: Optional[float] = None):
        super().__init__(detail)
        self.result = result
        self.gap = gap


class RealizationError(MacCapacityError):
    """A Monte-Carlo realization failed; wraps the original error with its index."""

    def __init__(self, realization: int, detail: str, exit_code: int = EXIT_FAILURE):
        super().__init__(f"Realization {realization}: {detail}")
        self.realization = realization
        self.cause_detail = detail
        self.exit_code = exit_code

    def __reduce__(self):
        # Rebuild from constructor arguments when crossing a process boundary
        return type(self), (self.realization, self.cause_detail, self.exit_code)
