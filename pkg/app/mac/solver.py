"""
Iterative Mode-Dropping

Sum capacity of the per-antenna MIMO-MAC by successive user updates. With all
other covariances fixed, user i faces the single-user problem on its effective
channel (I + sum_{k != i} H_k Q_k H_k')^-1/2 H_i, whose optimum is found by
single-user mode-dropping. Each update can only increase the sum rate, and
sweeping the users repeatedly converges to the sum capacity.

successive_optimization is the shared sweep loop: iterative water-filling in
app.baselines plugs a different per-user step and gap into it.
"""

import logging
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from app.channel.models import MacInstance
from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, MaxItersExceededError
from app.single_user.models import DualDiagonal
from app.single_user.solver import solve_single_user

from .audit import effective_channel, multiuser_gap, shifted_gap, sum_rate
from .models import LN2, CovarianceSet, GapAudit, SolveReport, UserStep, check_covariance_set, zero_covariances


logger = logging.getLogger(__name__)

# Rounding allowance (nats) when accepting a user step that re-solves to the same point
MONOTONE_SLACK = 1e-12

OrderLike = Union[str, Sequence[int]]
StepFunction = Callable[[int, np.ndarray, Optional[DualDiagonal]], UserStep]
GapFunction = Callable[[MacInstance, CovarianceSet, list], float]


def resolve_order(order: OrderLike, num_users: int) -> Tuple[int, ...]:
    """'ascending', 'descending' or an explicit permutation of the user indices."""
    if isinstance(order, str):
        if order == "ascending":
            return tuple(range(num_users))
        if order == "descending":
            return tuple(reversed(range(num_users)))
        raise ValueError(f"Unknown user order '{order}', expected 'ascending', 'descending' or a permutation")
    resolved = tuple(int(i) for i in order)
    if sorted(resolved) != list(range(num_users)):
        raise DimensionMismatchError(f"Order {list(resolved)} is not a permutation of {num_users} users")
    return resolved


def inner_tolerance(tol_bits: float) -> float:
    """Single-user gap tolerance (nats) nested under an outer tolerance in bits."""
    return max(tol_bits * LN2 * settings.inner_tol_ratio, settings.inner_tol_floor)


def successive_optimization(
    instance: MacInstance,
    step: StepFunction,
    gap: GapFunction,
    tol_bits: Optional[float] = None,
    max_iterations: Optional[int] = None,
    order: OrderLike = "ascending",
    initial: Optional[Sequence[np.ndarray]] = None,
    raise_on_max_iters: bool = True,
    label: str = "successive optimization",
) -> SolveReport:
    """
    Sweep the users, replacing each covariance by step() on its effective channel.

    A step that would lower the sum rate by more than MONOTONE_SLACK is
    discarded, so the rate trace is nondecreasing up to rounding. The loop
    stops once a sweep raises the sum rate by less than tol_bits and the
    duality gap is below tol_bits * ln 2 nats.

    Args:
        instance: MAC instance
        step: Per-user update (user index, effective channel, previous dual) -> UserStep
        gap: Duality gap in nats of (instance, covariances, duals)
        tol_bits: Outer tolerance in bits (default settings.mac_tol_bits)
        max_iterations: Sweep cap (default settings.mac_max_iterations)
        order: User update order within a sweep
        initial: Starting covariances (default all zero)
        raise_on_max_iters: Raise instead of returning an unconverged report
        label: Name used in log messages

    Returns:
        SolveReport

    Raises:
        MaxItersExceededError: Carrying the unconverged report, if raise_on_max_iters
    """
    tol_bits = settings.mac_tol_bits if tol_bits is None else tol_bits
    max_iterations = settings.mac_max_iterations if max_iterations is None else max_iterations
    if tol_bits <= 0:
        raise ValueError(f"Tolerance must be positive, got {tol_bits}")
    tol_nats = tol_bits * LN2
    sweep_order = resolve_order(order, instance.num_users)

    if initial is None:
        covariances = zero_covariances(instance)
    else:
        covariances = check_covariance_set(instance, initial, budget_slack=None)
    rate = sum_rate(instance, covariances)
    report = SolveReport(
        covariances=covariances,
        duals=[None] * instance.num_users,
        initial_rate_nats=rate,
        order=sweep_order,
    )

    for sweep in range(1, max_iterations + 1):
        sweep_start = rate
        for i in sweep_order:
            H_eff = effective_channel(instance, report.covariances, i)
            outcome = step(i, H_eff, report.duals[i])
            report.single_user_call_count += 1
            report.single_user_iterations += outcome.inner_iterations
            report.inner_iteration_trace.append(outcome.inner_iterations)
            if not outcome.converged:
                report.inner_nonconverged += 1

            candidate = list(report.covariances)
            candidate[i] = outcome.covariance
            candidate_rate = sum_rate(instance, candidate)
            # The dual is refreshed either way; the gap certificate holds for any dual
            report.duals[i] = outcome.dual
            if candidate_rate >= rate - MONOTONE_SLACK:
                report.covariances = candidate
                rate = candidate_rate
            else:
                logger.debug("%s: user %d step lowered the rate by %.3e, kept previous covariance", label, i, rate - candidate_rate)
            report.rate_trace_nats.append(rate)

        report.iteration_rates_nats.append(rate)
        report.gap_trace_nats.append(gap(instance, report.covariances, report.duals))
        report.iterations = sweep
        if rate - sweep_start < tol_nats and report.gap_trace_nats[-1] < tol_nats:
            report.converged = True
            break

    if report.converged:
        logger.debug(
            "%s converged after %d sweeps: %.6f bits, gap %.3e nats",
            label, report.iterations, report.sum_rate_bits, report.gap_nats,
        )
    elif raise_on_max_iters:
        raise MaxItersExceededError(
            f"{label} did not converge in {max_iterations} sweeps (gap {report.gap_nats:.3e} nats)",
            result=report,
            gap=report.gap_nats,
        )
    return report


def mode_dropping_step(instance: MacInstance, inner_tol: float) -> StepFunction:
    """Per-user step solving the per-antenna problem on the effective channel, warm-started from the last dual."""

    def step(i: int, H_eff: np.ndarray, dual: Optional[DualDiagonal]) -> UserStep:
        try:
            result = solve_single_user(H_eff, instance.budgets[i], tol=inner_tol, initial_dual=dual)
        except MaxItersExceededError as exc:
            logger.warning("User %d: %s; using best iterate", i, exc.detail)
            result = exc.result
        return UserStep(
            covariance=result.covariance,
            dual=result.dual,
            inner_iterations=result.iterations,
            converged=result.converged,
        )

    return step


def solve_mac(
    instance: MacInstance,
    tol_bits: Optional[float] = None,
    max_iterations: Optional[int] = None,
    order: OrderLike = "ascending",
    initial: Optional[Sequence[np.ndarray]] = None,
    raise_on_max_iters: bool = True,
) -> SolveReport:
    """
    Sum capacity under per-antenna power constraints by iterative mode-dropping.

    Starts from all-zero covariances (or initial). The convergence gap uses the
    latest single-user duals made feasible by feasible_duals.

    Raises:
        MaxItersExceededError: Carrying the best report, unless raise_on_max_iters is False
    """
    tol_bits = settings.mac_tol_bits if tol_bits is None else tol_bits
    if initial is not None:
        initial = check_covariance_set(instance, initial)
    return successive_optimization(
        instance,
        step=mode_dropping_step(instance, inner_tolerance(tol_bits)),
        gap=shifted_gap,
        tol_bits=tol_bits,
        max_iterations=max_iterations,
        order=order,
        initial=initial,
        raise_on_max_iters=raise_on_max_iters,
        label="Iterative mode-dropping",
    )


def first_sweep_gap_audit(instance: MacInstance, order: OrderLike = "ascending") -> GapAudit:
    """
    One zero-initialised sweep, then the duality gap with the single-user duals
    it produced, compared with (K-1)m and (K-1)m/2 nats.

    Users updated early only see interference grow afterwards, so their duals
    stay feasible and multiuser_gap is evaluated strictly.
    """
    report = solve_mac(instance, max_iterations=1, order=order, raise_on_max_iters=False)
    gap_nats = multiuser_gap(instance, report.covariances, report.duals)
    bound = float((instance.num_users - 1) * instance.rx_antennas)
    logger.debug("First-sweep gap %.4f nats (bounds %.1f and %.1f)", gap_nats, bound, bound / 2.0)
    return GapAudit(
        gap_nats=gap_nats,
        bound_nats=bound,
        half_bound_nats=bound / 2.0,
        sum_rate_nats=report.sum_rate_nats,
    )
