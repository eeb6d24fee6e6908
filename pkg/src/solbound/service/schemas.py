"""Pydantic request/response models for the analysis service.

Requests carry file contents, not paths: the server does not assume a shared
filesystem with its clients.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field


class AnalyzeRequest(BaseModel):
    graph: Dict[str, Any]
    hardware: Dict[str, Any]
    dtype: Optional[str] = None
    prefetch_weights: bool = True
    scale_overhead: bool = False
    contraction_dims: Optional[Tuple[int, int, int]] = None


class ScoreRequest(BaseModel):
    timings: str = Field(description="timing log, JSON Lines")
    bounds: List[Dict[str, Any]]
    baselines: List[Dict[str, Any]]


class ValidateRequest(BaseModel):
    problem: Dict[str, Any]
    workloads: Optional[str] = Field(default=None, description="workload file, JSON Lines")


class ToleranceModel(BaseModel):
    atol: float = 0.0
    rtol: float = 0.0
    matched_ratio: float = 1.0


class CompareRequest(BaseModel):
    candidate: Dict[str, Any]
    reference: Dict[str, Any]
    tolerance: ToleranceModel = ToleranceModel()


class CalibrateRequest(BaseModel):
    samples: List[float]
    dtype: str = "fp32"
    floor: float = 0.0


class AuditRequest(BaseModel):
    sources: Dict[str, str]
    rules: Optional[Any] = Field(default=None, description="rule records; packaged defaults when omitted")
    declared_precision: Optional[str] = None
    min_blob_chars: int = 64


class LeaderboardRequest(BaseModel):
    results: str = Field(description="scored results, JSON Lines")


class LeaderboardResponse(BaseModel):
    csv: str
    json_twin: str


class PlotRequest(BaseModel):
    kind: str
    results: Optional[str] = None
    findings: Optional[str] = None
    total_submissions: Optional[int] = None


class ContourRequest(BaseModel):
    t_sol: float
    t_b: float
    s: float
    n_samples: int = 16
    ref_range: Tuple[float, float] = (1.0, 100.0)


class ErrorPayload(BaseModel):
    kind: str  # parse | validation | internal
    message: str
    details: List[str] = []
