"""FastAPI service wrapping the analysis pipelines.

Endpoints are stateless: every request carries the graphs, logs, and rule
data it needs, and artifact-producing endpoints return the exact bytes the
corresponding CLI subcommand writes. Reject counts and correctness verdicts
ride in ``X-Solbound-*`` headers so thin clients can derive exit codes
without re-parsing bodies.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response

from .. import pipelines
from ..errors import GraphDefectsError, SolboundError
from . import schemas

NDJSON = "application/x-ndjson"
CSV = "text/csv"


def _fail(exc: Exception):
    if isinstance(exc, GraphDefectsError):
        payload = {
            "kind": "validation",
            "message": str(exc),
            "details": [f"{d.subject}: {d.rule}: {d.message}" for d in exc.defects],
        }
    elif isinstance(exc, SolboundError):
        payload = {"kind": "parse", "message": str(exc), "details": []}
    else:
        raise exc
    raise HTTPException(status_code=400, detail=payload)


def create_app() -> FastAPI:
    app = FastAPI(
        title="solbound",
        description="Speed-of-light roofline bounds, scoring, and submission auditing",
        version="0.1.0",
    )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/analyze")
    def analyze(req: schemas.AnalyzeRequest) -> Response:
        try:
            text = pipelines.run_analyze(
                req.graph,
                req.hardware,
                dtype=req.dtype,
                prefetch_weights=req.prefetch_weights,
                scale_overhead=req.scale_overhead,
                contraction_dims=req.contraction_dims,
            )
        except Exception as exc:
            _fail(exc)
        return Response(content=text, media_type="application/json")

    @app.post("/v1/score")
    def score(req: schemas.ScoreRequest) -> Response:
        try:
            text = pipelines.run_score(req.timings, req.bounds, req.baselines)
        except Exception as exc:
            _fail(exc)
        return Response(content=text, media_type=NDJSON)

    @app.post("/v1/validate")
    def validate(req: schemas.ValidateRequest) -> Response:
        try:
            text = pipelines.run_validate(req.problem, req.workloads)
        except Exception as exc:
            _fail(exc)
        ok = bool(json.loads(text)["ok"])
        return Response(
            content=text,
            media_type="application/json",
            headers={"X-Solbound-Ok": "1" if ok else "0"},
        )

    @app.post("/v1/compare")
    def compare(req: schemas.CompareRequest) -> Response:
        try:
            text = pipelines.run_compare(req.candidate, req.reference, req.tolerance.model_dump())
        except Exception as exc:
            _fail(exc)
        ok = bool(json.loads(text)["correct"])
        return Response(
            content=text,
            media_type="application/json",
            headers={"X-Solbound-Ok": "1" if ok else "0"},
        )

    @app.post("/v1/calibrate")
    def calibrate(req: schemas.CalibrateRequest) -> Response:
        try:
            text = pipelines.run_calibrate(req.samples, dtype=req.dtype, floor=req.floor)
        except Exception as exc:
            _fail(exc)
        return Response(content=text, media_type="application/json")

    @app.post("/v1/audit")
    def audit(req: schemas.AuditRequest) -> Response:
        try:
            text, rejects = pipelines.run_audit(
                req.sources,
                rules_obj=req.rules,
                declared_precision=req.declared_precision,
                min_blob_chars=req.min_blob_chars,
            )
        except Exception as exc:
            _fail(exc)
        return Response(
            content=text,
            media_type=NDJSON,
            headers={"X-Solbound-Rejects": str(rejects)},
        )

    @app.post("/v1/report/leaderboard", response_model=schemas.LeaderboardResponse)
    def leaderboard(req: schemas.LeaderboardRequest) -> JSONResponse:
        try:
            csv_text, json_text = pipelines.run_report_leaderboard(req.results)
        except Exception as exc:
            _fail(exc)
        return JSONResponse({"csv": csv_text, "json_twin": json_text})

    @app.post("/v1/report/plot")
    def plot(req: schemas.PlotRequest) -> Response:
        try:
            text = pipelines.run_report_plot(
                req.kind,
                results_text=req.results,
                findings_text=req.findings,
                total_submissions=req.total_submissions,
            )
        except Exception as exc:
            _fail(exc)
        return Response(content=text, media_type=CSV)

    @app.post("/v1/contour")
    def contour(req: schemas.ContourRequest) -> Response:
        try:
            text = pipelines.run_contour(
                req.t_sol, req.t_b, req.s, n_samples=req.n_samples, ref_range=req.ref_range
            )
        except Exception as exc:
            _fail(exc)
        return Response(content=text, media_type=CSV)

    return app
