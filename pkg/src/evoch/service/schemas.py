"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, Field

from ..config import RunConfig
from ..diagnostics import TRANSPORT_CHECKS


class RunRequest(BaseModel):
    config: RunConfig
    # relative to the service's output root (EVOCH_OUTPUT_ROOT); defaults to config.output.directory
    out_dir: Optional[str] = None


class RunStatus(BaseModel):
    run_id: str
    state: Literal["queued", "running", "finished", "failed"]
    exit_status: Optional[int] = None
    steps_completed: int = 0
    out_dir: Optional[str] = None
    error: Optional[str] = None


class DiagnosticsRow(BaseModel):
    step: int
    time: float
    mass: float
    energy: Optional[float]  # null when the sharp potential is evaluated off its domain
    grad_w_norm_sq: float
    u_min: float
    u_max: float
    xi: float
    mean_w: float
    area: float


class VerifyRequest(BaseModel):
    config: RunConfig
    which: List[str] = Field(default_factory=lambda: list(TRANSPORT_CHECKS))


class VerifyRow(BaseModel):
    which: str
    t: float
    dts: List[float]
    residuals: List[float]
    floors: List[float]
    pair_orders: List[float]
    order: float
    status: Literal["order", "exact", "roundoff"]
    residual_fine: Optional[float] = None


class VerifyResponse(BaseModel):
    rows: List[VerifyRow]
    exit_status: int
    table: str


class AdmissibilityResponse(BaseModel):
    S_R: float
    abs_mean: float
    product: float
    admissible: bool
    max_m_u0: float
    sample_times: int


class ParseRequest(BaseModel):
    config: dict


class ParseResponse(BaseModel):
    resolved: dict
