"""
Command-Line Entry Point

    python -m app.main <solve|convergence|complexity|region|snr-sweep|user-sweep> [options]

Arguments are validated into an ExperimentConfig, dispatched to the matching
handler in app.experiments.commands, and the result is written to --out (or
stdout). The process exit code is 0 on success, 1 on invalid input or a
numerical failure, and 2 when some solve hit its iteration cap.
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.baselines.constraints import ConstraintMode
from app.core.config import settings
from app.core.exceptions import EXIT_FAILURE, MacCapacityError
from app.core.logging import configure_logging
from app.experiments.commands import run_experiment
from app.experiments.output import write_output
from app.experiments.schemas import ExperimentConfig, ExperimentKind


logger = logging.getLogger("app.main")

SUBCOMMANDS = {
    "solve": ExperimentKind.SOLVE,
    "convergence": ExperimentKind.CONVERGENCE,
    "complexity": ExperimentKind.COMPLEXITY,
    "region": ExperimentKind.REGION,
    "snr-sweep": ExperimentKind.SNR_SWEEP,
    "user-sweep": ExperimentKind.USER_SWEEP,
}


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from exc


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from exc


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--users", type=_int_list, help="Number of users K, or a comma-separated list to sweep")
    parser.add_argument("--rx", type=int, help="Receive antennas m (default 4)")
    parser.add_argument("--tx", type=int, help="Transmit antennas n per user (default 4)")
    parser.add_argument("--power", type=_float_list, help="Per-antenna budget: one value or one per antenna")
    parser.add_argument("--constraint", choices=[mode.value for mode in ConstraintMode], help="Constraint scenario")
    parser.add_argument("--realizations", type=int, help=f"Monte-Carlo realizations (default {settings.realizations})")
    parser.add_argument("--seed", type=int, help=f"Master seed (default {settings.seed})")
    parser.add_argument("--tol", dest="tol_bits", type=float, help=f"Outer tolerance in bits (default {settings.mac_tol_bits:g})")
    parser.add_argument("--max-iters", dest="max_iters", type=int, help="Sweep cap, also the convergence trace length")
    parser.add_argument("--snr-db", dest="snr_db", type=_float_list, help=f"SNR grid in dB (default {settings.snr_db_grid})")
    parser.add_argument("--order", choices=["ascending", "descending"], help="User update order")
    parser.add_argument("--workers", type=int, help="Worker processes for realizations")
    parser.add_argument("--points", dest="region_points", type=int, help="Samples per region curve")
    parser.add_argument("--format", choices=["csv", "json"], help="Output format (default csv)")
    parser.add_argument("--out", help="Output file (default stdout)")
    parser.add_argument("--instance", help="Instance JSON file (solve and region)")
    parser.add_argument("--log-level", dest="log_level", help="Logging level (default from settings)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="app.main",
        description=f"{settings.app_name}: iterative mode-dropping for the MIMO-MAC under per-antenna power constraints",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _add_common_options(subparsers.add_parser(name, help=f"Run the {name} experiment"))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Build the config from the parsed options; options left unset keep their defaults."""
    fields = {
        key: value
        for key, value in vars(args).items()
        if value is not None and key in ExperimentConfig.model_fields
    }
    return ExperimentConfig(kind=SUBCOMMANDS[args.command], **fields)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        config = config_from_args(args)
    except ValidationError as exc:
        logger.error("Invalid options:\n%s", exc)
        return EXIT_FAILURE

    try:
        result = run_experiment(config)
    except MacCapacityError as exc:
        logger.error("%s: %s", type(exc).__name__, exc.detail)
        return exc.exit_code
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE

    write_output(result.text, config.out)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
