"""
SolveReport Schemas (Pydantic Models)

JSON shape written by the `solve` subcommand:

    {
        "sum_rate_bits": 3.91,
        "rate_trace_bits": [...],
        "gap_trace_nats": [...],
        "iterations": 7,
        "converged": true,
        "covariances": [[[[re, im], ...], ...], ...],
        ...
    }
"""

from typing import List, Optional

from pydantic import BaseModel, Field

from app.channel.models import MacInstance
from app.channel.schemas import encode_matrix

from .audit import kkt_report_mac
from .models import SolveReport, nats_to_bits


class KktResidualsOut(BaseModel):
    """Per-user optimality residuals."""

    min_eig_m: float = Field(..., description="Smallest eigenvalue of M_i (should be >= 0)")
    complementarity: float = Field(..., description="||M_i Q_i||_F")
    power_residual: float = Field(..., description="||diag(Q_i) - P_i||_inf")


class SolveReportOut(BaseModel):
    """Serialized SolveReport."""

    sum_rate_bits: float
    rate_trace_bits: List[float] = Field(..., description="Sum rate after each user update")
    iteration_rates_bits: List[float] = Field(..., description="Sum rate after each sweep")
    gap_trace_nats: List[float] = Field(..., description="Duality gap after each sweep")
    iterations: int
    converged: bool
    single_user_call_count: int
    single_user_iterations: int
    order: List[int]
    covariances: List[List[List[List[float]]]] = Field(..., description="One matrix per user, entries as [re, im]")
    duals: Optional[List[List[float]]] = Field(None, description="Single-user dual entries per user")
    kkt: Optional[List[KktResidualsOut]] = None

    @classmethod
    def from_report(cls, report: SolveReport, instance: Optional[MacInstance] = None) -> "SolveReportOut":
        """Build the wire model; KKT residuals are included when the instance and all duals are known."""
        has_duals = all(dual is not None for dual in report.duals)
        kkt = None
        if instance is not None and has_duals:
            kkt = [
                KktResidualsOut(**residuals.as_dict())
                for residuals in kkt_report_mac(instance, report.covariances, report.duals)
            ]
        return cls(
            sum_rate_bits=report.sum_rate_bits,
            rate_trace_bits=[nats_to_bits(rate) for rate in report.rate_trace_nats],
            iteration_rates_bits=[nats_to_bits(rate) for rate in report.iteration_rates_nats],
            gap_trace_nats=list(report.gap_trace_nats),
            iterations=report.iterations,
            converged=report.converged,
            single_user_call_count=report.single_user_call_count,
            single_user_iterations=report.single_user_iterations,
            order=list(report.order),
            covariances=[encode_matrix(Q) for Q in report.covariances],
            duals=[dual.entries.tolist() for dual in report.duals] if has_duals else None,
            kkt=kkt,
        )
