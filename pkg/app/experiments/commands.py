"""
Subcommand Handlers

One handler per ExperimentKind, registered in HANDLERS. A handler turns a
validated config into output text and an exit code; main.py only parses
arguments and writes the text.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict

from app.baselines.constraints import ConstraintMode, budgets_for_mode
from app.baselines.waterfilling import iterative_water_fill
from app.channel.models import MacInstance
from app.channel.schemas import load_instance
from app.core.exceptions import EXIT_NOT_CONVERGED, EXIT_OK
from app.mac.schemas import SolveReportOut
from app.mac.solver import solve_mac

from .output import render_json, render_table
from .region import two_user_region
from .runner import realization_instance, run_complexity, run_convergence, run_snr_sweep, run_user_sweep
from .schemas import ExperimentConfig, ExperimentKind, ResultTable


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CommandResult:
    text: str
    exit_code: int = EXIT_OK


def _exit_code(nonconverged: int) -> int:
    return EXIT_NOT_CONVERGED if nonconverged > 0 else EXIT_OK


def command_instance(config: ExperimentConfig) -> MacInstance:
    """
    Instance of a single-instance command: the --instance file, or realization 0
    of the seeded stream. PER_ANTENNA_UNEQUAL re-splits each user's total.
    """
    instance = load_instance(config.instance) if config.instance else realization_instance(config, 0)
    if config.constraint is ConstraintMode.PER_ANTENNA_UNEQUAL:
        totals = [budget.total for budget in instance.budgets]
        budgets = [budgets_for_mode(config.constraint, total, [n])[0] for total, n in zip(totals, instance.tx_antennas)]
        instance = instance.with_budgets(budgets)
    return instance


def _table_command(runner: Callable[[ExperimentConfig], ResultTable]) -> Callable[[ExperimentConfig], CommandResult]:
    def handler(config: ExperimentConfig) -> CommandResult:
        table = runner(config)
        if table.nonconverged:
            logger.warning("%d solves hit their iteration cap; results are flagged", table.nonconverged)
        return CommandResult(render_table(table, config), _exit_code(table.nonconverged))

    return handler


def solve_command(config: ExperimentConfig) -> CommandResult:
    """Solve one instance and report covariances, traces and KKT residuals as JSON."""
    instance = command_instance(config)
    if config.constraint.spatial_multiplexing:
        raise ValueError("solve needs an optimized constraint, not spatial multiplexing")
    options = dict(tol_bits=config.tol_bits, max_iterations=config.max_iters, order=config.order, raise_on_max_iters=False)
    if config.constraint is ConstraintMode.SUM_POWER:
        report = iterative_water_fill(instance, **options)
    else:
        report = solve_mac(instance, **options)
    logger.info(
        "Solved K=%d instance: %.6f bits in %d sweeps (converged=%s)",
        instance.num_users, report.sum_rate_bits, report.iterations, report.converged,
    )
    payload = SolveReportOut.from_report(report, instance).model_dump(mode="json")
    return CommandResult(render_json({"report": payload}, config), _exit_code(int(not report.converged)))


def region_command(config: ExperimentConfig) -> CommandResult:
    """Corner points and bound polylines of a two-user instance."""
    instance = command_instance(config)
    bounds = two_user_region(instance, config.constraint, points=config.region_points, max_iterations=config.max_iters)
    table = ResultTable(name="region", columns=["curve", "point", "r1_bits", "r2_bits"])
    for label, (r1, r2) in zip("ABCD", (bounds.a, bounds.b, bounds.c, bounds.d)):
        table.add_row(curve="corner", point=label, r1_bits=r1, r2_bits=r2)
    for curve, polyline in (("inner", bounds.inner), ("outer", bounds.outer)):
        for index, (r1, r2) in enumerate(polyline):
            table.add_row(curve=curve, point=str(index), r1_bits=r1, r2_bits=r2)
    table.summary.update(
        sum_capacity_bits=bounds.sum_capacity,
        single_user_1_bits=bounds.single_user[0],
        single_user_2_bits=bounds.single_user[1],
        nonconverged=int(not bounds.converged),
    )
    return CommandResult(render_table(table, config), _exit_code(table.nonconverged))


HANDLERS: Dict[ExperimentKind, Callable[[ExperimentConfig], CommandResult]] = {
    ExperimentKind.SOLVE: solve_command,
    ExperimentKind.CONVERGENCE: _table_command(run_convergence),
    ExperimentKind.COMPLEXITY: _table_command(run_complexity),
    ExperimentKind.REGION: region_command,
    ExperimentKind.SNR_SWEEP: _table_command(run_snr_sweep),
    ExperimentKind.USER_SWEEP: _table_command(run_user_sweep),
}


def run_experiment(config: ExperimentConfig) -> CommandResult:
    return HANDLERS[config.kind](config)
