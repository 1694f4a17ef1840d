"""
Application Configuration

This module uses Pydantic Settings for configuration management.
Environment variables are loaded from .env file automatically.

Every numerical default used by the solvers and the experiment harness lives
here, so a run can be retuned without touching code. Functions accept explicit
keyword arguments and fall back to these values when given None.
"""

from typing import List

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Application settings loaded from environment variables.

    Create a .env file in the project root to override any of these, e.g.:
    - MAC_TOL_BITS: outer convergence tolerance of iterative mode-dropping (bits)
    - REALIZATIONS: default number of Monte-Carlo channel realizations
    - WORKERS: default size of the realization worker pool
    """

    # Application
    app_name: str = "Per-Antenna MAC Capacity"
    debug: bool = False
    log_level: str = "INFO"

    # Matrix kernel tolerances
    eig_rel_tol: float = 1e-10
    inv_sqrt_rel_tol: float = 1e-12
    psd_repair_tol: float = 1e-8
    rank_rel_tol: float = 1e-10

    # Single-user mode-dropping
    dual_floor: float = 1e-10
    single_user_tol: float = 1e-9
    single_user_power_tol: float = 1e-9
    single_user_max_iters: int = 500
    dual_newton: bool = True
    dual_newton_fd_step: float = 1e-6

    # Iterative mode-dropping / water-filling
    inner_tol_ratio: float = 0.01
    inner_tol_floor: float = 1e-12
    mac_tol_bits: float = 1e-6
    mac_max_iterations: int = 100
    dual_feasibility_tol: float = 1e-8

    # Monte-Carlo harness
    realizations: int = 200
    seed: int = 0
    workers: int = 1
    region_points: int = 33
    snr_db_grid: str = "-10,-5,0,5,10,15,20"

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        extra="ignore"  # Ignore extra environment variables
    )

    @field_validator("realizations", "workers", "region_points", "single_user_max_iters", "mac_max_iterations")
    @classmethod
    def _positive_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @property
    def snr_db_list(self) -> List[float]:
        """Convert the comma-separated SNR grid to a list of floats."""
        return [float(item.strip()) for item in self.snr_db_grid.split(",") if item.strip()]

    @property
    def effective_log_level(self) -> str:
        return "DEBUG" if self.debug else self.log_level.upper()


# Global settings instance, loaded once at import time
settings = Settings()
