"""
Monte-Carlo Experiments

Each experiment maps a per-realization work function over realization indices
(through ordered_map) and aggregates the results into a ResultTable. Work
functions are module-level so they can be shipped to worker processes.

Realization r always draws its channels from channel_stream(seed, r): the
first K users of a realization are the same whatever K is, and the channels do
not change across SNR points.
"""

import logging
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats

from app.baselines.constraints import ConstraintMode, snr_db_to_power
from app.baselines.multiplexing import capacity_for_mode, spatial_multiplexing_rate
from app.baselines.waterfilling import iterative_water_fill
from app.channel.models import MacInstance
from app.channel.sampling import random_instance
from app.core.exceptions import MacCapacityError, RealizationError
from app.mac.models import LN2, nats_to_bits
from app.mac.solver import first_sweep_gap_audit, solve_mac

from .pool import ordered_map
from .schemas import ExperimentConfig, ResultTable


logger = logging.getLogger(__name__)

# Slack on the per-realization capacity ordering checks, in nats
ORDERING_SLACK = 1e-8

# Reference runs for the complexity count are this much tighter than the target
COMPLEXITY_REFERENCE_RATIO = 0.01


def mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and its standard error (0 for a single sample)."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(scipy.stats.sem(values))


def realization_instance(config: ExperimentConfig, realization: int, num_users: Optional[int] = None) -> MacInstance:
    return random_instance(config.seed, realization, config.rx, config.budgets(num_users))


def _guarded(work: Callable, config: ExperimentConfig, item):
    realization = item[-1] if isinstance(item, tuple) else item
    try:
        return work(config, item)
    except MacCapacityError as exc:
        raise RealizationError(realization, f"{type(exc).__name__}: {exc.detail}", exc.exit_code) from exc


def _map(work: Callable, config: ExperimentConfig, items: List) -> List:
    return ordered_map(partial(_guarded, work, config), items, workers=config.workers)


# Convergence
def _convergence_realization(config: ExperimentConfig, realization: int) -> Dict:
    instance = realization_instance(config, realization)
    options = dict(tol_bits=config.tol_bits, max_iterations=config.max_iters, order=config.order, raise_on_max_iters=False)
    per_antenna = solve_mac(instance, **options)
    sum_power = iterative_water_fill(instance, **options)
    sweeps = range(1, config.max_iters + 1)
    return {
        "per_antenna": [nats_to_bits(per_antenna.rate_after_sweep(t)) for t in sweeps],
        "sum_power": [nats_to_bits(sum_power.rate_after_sweep(t)) for t in sweeps],
        "nonconverged": int(not per_antenna.converged) + int(not sum_power.converged),
    }


def run_convergence(config: ExperimentConfig) -> ResultTable:
    """Mean sum rate (bits) after each sweep, for mode-dropping and for water-filling."""
    logger.info("Convergence: K=%d, %d realizations", config.num_users, config.realizations)
    results = _map(_convergence_realization, config, list(range(config.realizations)))
    per_antenna = np.array([result["per_antenna"] for result in results])
    sum_power = np.array([result["sum_power"] for result in results])
    nonconverged = sum(result["nonconverged"] for result in results)

    table = ResultTable(
        name="convergence",
        columns=["iteration", "per_antenna_bits", "per_antenna_stderr", "sum_power_bits", "sum_power_stderr", "nonconverged"],
    )
    for t in range(config.max_iters):
        pa_mean, pa_err = mean_stderr(per_antenna[:, t])
        sp_mean, sp_err = mean_stderr(sum_power[:, t])
        table.add_row(
            iteration=t + 1,
            per_antenna_bits=pa_mean,
            per_antenna_stderr=pa_err,
            sum_power_bits=sp_mean,
            sum_power_stderr=sp_err,
            nonconverged=nonconverged,
        )
    table.summary["nonconverged"] = nonconverged
    return table


# Complexity
def calls_to_reach(rate_trace_nats: Sequence[float], target_nats: float) -> int:
    """1-based index of the first user update whose sum rate reaches target_nats."""
    for index, rate in enumerate(rate_trace_nats, start=1):
        if rate >= target_nats:
            return index
    return len(rate_trace_nats)


def _complexity_realization(config: ExperimentConfig, item: Tuple[int, int]) -> Dict:
    num_users, realization = item
    instance = realization_instance(config, realization, num_users)
    reference = solve_mac(
        instance,
        tol_bits=config.tol_bits * COMPLEXITY_REFERENCE_RATIO,
        max_iterations=config.max_iters,
        order=config.order,
        raise_on_max_iters=False,
    )
    calls = calls_to_reach(reference.rate_trace_nats, reference.sum_rate_nats - config.tol_bits * LN2)
    return {
        "calls": calls,
        "inner_iterations": int(sum(reference.inner_iteration_trace[:calls])),
        "nonconverged": int(not reference.converged),
    }


def run_complexity(config: ExperimentConfig) -> ResultTable:
    """
    Single-user solves needed to come within tol_bits of the sum capacity, per K.

    The capacity is taken from a run with a tolerance COMPLEXITY_REFERENCE_RATIO
    times tighter; the count is the first user update of that run within tol_bits.
    """
    logger.info("Complexity: K in %s, %d realizations", config.users, config.realizations)
    items = [(k, r) for k in config.users for r in range(config.realizations)]
    results = _map(_complexity_realization, config, items)

    table = ResultTable(
        name="complexity",
        columns=["users", "mean_calls", "std_calls", "stderr_calls", "mean_inner_iterations", "nonconverged"],
    )
    nonconverged = 0
    for index, num_users in enumerate(config.users):
        chunk = results[index * config.realizations:(index + 1) * config.realizations]
        calls = np.array([result["calls"] for result in chunk], dtype=float)
        mean_calls, stderr_calls = mean_stderr(calls)
        failed = sum(result["nonconverged"] for result in chunk)
        nonconverged += failed
        table.add_row(
            users=num_users,
            mean_calls=mean_calls,
            std_calls=float(calls.std(ddof=1)) if calls.size > 1 else 0.0,
            stderr_calls=stderr_calls,
            mean_inner_iterations=float(np.mean([result["inner_iterations"] for result in chunk])),
            nonconverged=failed,
        )
    if len(set(config.users)) > 1:
        slope, _ = np.polyfit(np.array(table.column("users"), dtype=float), np.array(table.column("mean_calls")), 1)
        table.summary["slope_calls_per_user"] = float(slope)
    table.summary["nonconverged"] = nonconverged
    return table


# SNR sweep

SNR_MODES = (
    ConstraintMode.SUM_POWER,
    ConstraintMode.PER_ANTENNA_EQUAL,
    ConstraintMode.PER_ANTENNA_UNEQUAL,
    ConstraintMode.SM_EQUAL,
    ConstraintMode.SM_UNEQUAL,
)

# (larger, smaller) pairs implied by feasible-set nesting at equal per-user totals
ORDERING_PAIRS = (
    (ConstraintMode.SUM_POWER, ConstraintMode.PER_ANTENNA_EQUAL),
    (ConstraintMode.SUM_POWER, ConstraintMode.PER_ANTENNA_UNEQUAL),
    (ConstraintMode.PER_ANTENNA_EQUAL, ConstraintMode.SM_EQUAL),
    (ConstraintMode.PER_ANTENNA_UNEQUAL, ConstraintMode.SM_UNEQUAL),
)


def _column(mode: ConstraintMode) -> str:
    return mode.value.replace("-", "_")


def ordering_violations(rates_nats: Dict[ConstraintMode, float], gaps_nats: Dict[ConstraintMode, float]) -> int:
    """
    Count nesting pairs whose order is violated beyond the certified gaps.

    A solved capacity may sit below the true value by its duality gap, so the
    larger side of each pair is credited with its gap.
    """
    violations = 0
    for larger, smaller in ORDERING_PAIRS:
        if rates_nats[larger] + gaps_nats.get(larger, 0.0) + ORDERING_SLACK < rates_nats[smaller]:
            violations += 1
    return violations


def snr_sweep_samples(config: ExperimentConfig, realization: int) -> Dict:
    """Rates (bits) of one realization for every SNR point and mode."""
    instance = realization_instance(config, realization)
    rates, violations, nonconverged = [], 0, 0
    for snr_db in config.snr_db:
        total = snr_db_to_power(snr_db)
        capacities = {
            mode: capacity_for_mode(instance, mode, total, tol_bits=config.tol_bits, max_iterations=config.max_iters)
            for mode in SNR_MODES
        }
        rates_nats = {mode: capacity.rate_nats for mode, capacity in capacities.items()}
        gaps_nats = {
            mode: max(capacity.report.gap_nats, 0.0)
            for mode, capacity in capacities.items()
            if capacity.report is not None and capacity.report.gap_trace_nats
        }
        violations += ordering_violations(rates_nats, gaps_nats)
        nonconverged += sum(int(not capacity.converged) for capacity in capacities.values())
        rates.append([capacities[mode].rate_bits for mode in SNR_MODES])
    return {"rates": rates, "violations": violations, "nonconverged": nonconverged}


def run_snr_sweep(config: ExperimentConfig) -> ResultTable:
    """Ergodic capacity (bits) per SNR and scenario, with the capacity gaps between scenarios."""
    logger.info("SNR sweep: K=%d, %d SNR points, %d realizations", config.num_users, len(config.snr_db), config.realizations)
    results = _map(snr_sweep_samples, config, list(range(config.realizations)))
    rates = np.array([result["rates"] for result in results])  # realization x snr x mode

    columns = ["snr_db"]
    for mode in SNR_MODES:
        columns += [f"{_column(mode)}_bits", f"{_column(mode)}_stderr"]
    gap_pairs = [
        (ConstraintMode.SUM_POWER, ConstraintMode.PER_ANTENNA_EQUAL),
        (ConstraintMode.PER_ANTENNA_EQUAL, ConstraintMode.SM_EQUAL),
        (ConstraintMode.SUM_POWER, ConstraintMode.PER_ANTENNA_UNEQUAL),
        (ConstraintMode.PER_ANTENNA_UNEQUAL, ConstraintMode.SM_UNEQUAL),
    ]
    columns += [f"gap_{_column(a)}_vs_{_column(b)}" for a, b in gap_pairs]
    columns += ["ordering_violations", "nonconverged"]
    table = ResultTable(name="snr_sweep", columns=columns)

    violations = sum(result["violations"] for result in results)
    nonconverged = sum(result["nonconverged"] for result in results)
    for s, snr_db in enumerate(config.snr_db):
        row = {"snr_db": snr_db, "ordering_violations": violations, "nonconverged": nonconverged}
        for m, mode in enumerate(SNR_MODES):
            row[f"{_column(mode)}_bits"], row[f"{_column(mode)}_stderr"] = mean_stderr(rates[:, s, m])
        for a, b in gap_pairs:
            row[f"gap_{_column(a)}_vs_{_column(b)}"] = float(
                np.mean(rates[:, s, SNR_MODES.index(a)] - rates[:, s, SNR_MODES.index(b)])
            )
        table.add_row(**row)
    table.summary["ordering_violations"] = violations
    table.summary["nonconverged"] = nonconverged
    return table


# User sweep
def _user_sweep_realization(config: ExperimentConfig, item: Tuple[int, int]) -> Dict:
    num_users, realization = item
    instance = realization_instance(config, realization, num_users)
    options = dict(tol_bits=config.tol_bits, max_iterations=config.max_iters, order=config.order, raise_on_max_iters=False)
    per_antenna = solve_mac(instance, **options)
    sum_power = iterative_water_fill(instance, **options)
    audit = first_sweep_gap_audit(instance, order=config.order)
    return {
        "per_antenna": per_antenna.sum_rate_bits,
        "sum_power": sum_power.sum_rate_bits,
        "sm": nats_to_bits(spatial_multiplexing_rate(instance)),
        "first_sweep": nats_to_bits(per_antenna.rate_after_sweep(1)),
        "gap": audit.gap_nats,
        "within_bound": int(audit.within_bound),
        "within_half_bound": int(audit.within_half_bound),
        "nonconverged": int(not per_antenna.converged) + int(not sum_power.converged),
    }


def run_user_sweep(config: ExperimentConfig) -> ResultTable:
    """
    Ergodic capacity (bits) per K for the three scenarios and the mean capacity
    gaps between them, plus the rate and duality gap after one sweep.
    """
    logger.info("User sweep: K in %s, %d realizations", config.users, config.realizations)
    items = [(k, r) for k in config.users for r in range(config.realizations)]
    results = _map(_user_sweep_realization, config, items)

    table = ResultTable(
        name="user_sweep",
        columns=[
            "users",
            "per_antenna_bits", "per_antenna_stderr",
            "sum_power_bits", "sum_power_stderr",
            "sm_bits", "sm_stderr",
            "first_sweep_bits", "first_sweep_stderr",
            "gap_sum_power_vs_per_antenna", "gap_per_antenna_vs_sm",
            "first_sweep_gap_nats", "gap_bound_violations", "half_bound_fraction",
            "nonconverged",
        ],
    )
    nonconverged = 0
    for index, num_users in enumerate(config.users):
        chunk = results[index * config.realizations:(index + 1) * config.realizations]
        row = {"users": num_users}
        for key in ("per_antenna", "sum_power", "sm", "first_sweep"):
            row[f"{key}_bits"], row[f"{key}_stderr"] = mean_stderr([result[key] for result in chunk])
        row["gap_sum_power_vs_per_antenna"] = float(np.mean([result["sum_power"] - result["per_antenna"] for result in chunk]))
        row["gap_per_antenna_vs_sm"] = float(np.mean([result["per_antenna"] - result["sm"] for result in chunk]))
        row["first_sweep_gap_nats"] = float(np.mean([result["gap"] for result in chunk]))
        row["gap_bound_violations"] = sum(1 - result["within_bound"] for result in chunk)
        row["half_bound_fraction"] = float(np.mean([result["within_half_bound"] for result in chunk]))
        row["nonconverged"] = sum(result["nonconverged"] for result in chunk)
        nonconverged += row["nonconverged"]
        table.add_row(**row)
    table.summary["nonconverged"] = nonconverged
    return table
