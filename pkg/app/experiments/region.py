"""
Two-User Capacity Region Bounds

Inner bound: the corner points of two successive-decoding orders, joined by
rate curves of convex combinations of corner covariances, plus the segment of
the sum-capacity line between the two converged corners. Outer bound: the box
of the two single-user capacities cut by the sum-capacity line.

Corner A comes from one sweep that updates user 2 before user 1, so user 2
sees no interference and is decoded last; corner B swaps the users. Corners C
and D use converged covariances of the two update orders with the same
decoding orders as A and B respectively.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.baselines.constraints import ConstraintMode
from app.baselines.waterfilling import iterative_water_fill
from app.channel.models import MacInstance
from app.core.config import settings
from app.core.exceptions import NotTwoUsersError
from app.linalg.kernel import logdet_hpd
from app.mac.audit import sum_rate
from app.mac.models import SolveReport, nats_to_bits
from app.mac.solver import solve_mac


logger = logging.getLogger(__name__)

RatePair = Tuple[float, float]

REGION_TOL_BITS = 1e-10

# user 2 (index 1) updated first and decoded last, and the reverse
SECOND_FIRST = (1, 0)
FIRST_FIRST = (0, 1)


@dataclass
class RegionBounds:
    """
    Two-user region in bits.

    Attributes:
        a, b, c, d: Corner rate pairs (R1, R2)
        inner: Inner-bound polyline from (0, R2 at A) to (R1 at B, 0)
        outer: Outer-bound polyline from (0, C2) to (C1, 0)
        sum_capacity: Sum capacity in bits
        single_user: Single-user capacities (C1, C2)
        curve_ac, curve_bd: Rate curves traced between the corners
        converged: Whether both converged corner solves met their tolerance
    """

    a: RatePair
    b: RatePair
    c: RatePair
    d: RatePair
    inner: List[RatePair]
    outer: List[RatePair]
    sum_capacity: float
    single_user: RatePair
    curve_ac: List[RatePair] = field(default_factory=list)
    curve_bd: List[RatePair] = field(default_factory=list)
    constraint: ConstraintMode = ConstraintMode.PER_ANTENNA_EQUAL
    converged: bool = True


def decoded_rates(instance: MacInstance, covariances: Sequence[np.ndarray], last: int) -> RatePair:
    """
    Successive-decoding rate pair (nats) with user `last` decoded last.

    The last-decoded user sees no interference; the other gets the remainder
    of the sum rate.
    """
    H = instance.channels[last]
    alone = logdet_hpd(np.eye(instance.rx_antennas) + H @ covariances[last] @ H.conj().T)
    rest = sum_rate(instance, covariances) - alone
    return (rest, alone) if last == 1 else (alone, rest)


def _solver(constraint: ConstraintMode) -> Callable[..., SolveReport]:
    if constraint is ConstraintMode.SUM_POWER:
        return iterative_water_fill
    return solve_mac


def _mixed_curve(
    instance: MacInstance,
    start: Sequence[np.ndarray],
    end: Sequence[np.ndarray],
    last: int,
    points: int,
) -> List[RatePair]:
    curve = []
    for mu in np.linspace(1.0, 0.0, points):
        mixed = [mu * Q_start + (1.0 - mu) * Q_end for Q_start, Q_end in zip(start, end)]
        curve.append(tuple(nats_to_bits(rate) for rate in decoded_rates(instance, mixed, last)))
    return curve


def two_user_region(
    instance: MacInstance,
    constraint: ConstraintMode = ConstraintMode.PER_ANTENNA_EQUAL,
    points: Optional[int] = None,
    tol_bits: float = REGION_TOL_BITS,
    max_iterations: Optional[int] = None,
) -> RegionBounds:
    """
    Inner and outer bounds of the two-user capacity region.

    Args:
        instance: Two-user instance; its per-antenna budgets are used directly,
            or their sums under ConstraintMode.SUM_POWER
        constraint: Any per-antenna mode (mode-dropping) or SUM_POWER (water-filling)
        points: Samples per corner-to-corner curve (default settings.region_points)

    Raises:
        NotTwoUsersError: If the instance does not have exactly two users
    """
    if instance.num_users != 2:
        raise NotTwoUsersError(f"The region needs exactly 2 users, got {instance.num_users}")
    constraint = ConstraintMode(constraint)
    if constraint.spatial_multiplexing:
        raise ValueError("Region bounds need an optimized constraint, not spatial multiplexing")
    points = settings.region_points if points is None else points
    solve = _solver(constraint)

    sweep_a = solve(instance, tol_bits=tol_bits, max_iterations=1, order=SECOND_FIRST, raise_on_max_iters=False)
    sweep_b = solve(instance, tol_bits=tol_bits, max_iterations=1, order=FIRST_FIRST, raise_on_max_iters=False)
    converged_c = solve(instance, tol_bits=tol_bits, max_iterations=max_iterations, order=SECOND_FIRST, raise_on_max_iters=False)
    converged_d = solve(instance, tol_bits=tol_bits, max_iterations=max_iterations, order=FIRST_FIRST, raise_on_max_iters=False)
    if not (converged_c.converged and converged_d.converged):
        logger.warning("Region corner solves did not converge; C and D are approximate")

    def bits(pair: RatePair) -> RatePair:
        return tuple(nats_to_bits(rate) for rate in pair)

    a = bits(decoded_rates(instance, sweep_a.covariances, last=1))
    b = bits(decoded_rates(instance, sweep_b.covariances, last=0))
    c = bits(decoded_rates(instance, converged_c.covariances, last=1))
    d = bits(decoded_rates(instance, converged_d.covariances, last=0))
    sum_capacity = max(c[0] + c[1], d[0] + d[1])

    # Single-user capacities: each first-updated user saw no interference
    single_user = (b[0], a[1])

    curve_ac = _mixed_curve(instance, sweep_a.covariances, converged_c.covariances, last=1, points=points)
    curve_bd = _mixed_curve(instance, converged_d.covariances, sweep_b.covariances, last=0, points=points)
    inner = [(0.0, a[1])] + curve_ac + curve_bd + [(b[0], 0.0)]
    outer = [
        (0.0, single_user[1]),
        (sum_capacity - single_user[1], single_user[1]),
        (single_user[0], sum_capacity - single_user[0]),
        (single_user[0], 0.0),
    ]
    return RegionBounds(
        a=a,
        b=b,
        c=c,
        d=d,
        inner=inner,
        outer=outer,
        sum_capacity=sum_capacity,
        single_user=single_user,
        curve_ac=curve_ac,
        curve_bd=curve_bd,
        constraint=constraint,
        converged=converged_c.converged and converged_d.converged,
    )


def inside_outer(bounds: RegionBounds, point: RatePair, slack: float = 1e-8) -> bool:
    """Whether a rate pair lies in the outer bound (within slack bits)."""
    r1, r2 = point
    c1, c2 = bounds.single_user
    return r1 <= c1 + slack and r2 <= c2 + slack and r1 + r2 <= bounds.sum_capacity + slack
