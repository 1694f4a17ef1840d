"""Logging setup for the CLI and pool workers."""

import logging
from typing import Optional

from .config import settings


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure the root logger once per process.

    Args:
        level: Log level name; defaults to the configured level (DEBUG when debug is on)
    """
    logging.basicConfig(
        level=(level or settings.effective_log_level).upper(),
        format=LOG_FORMAT,
        force=True,
    )
