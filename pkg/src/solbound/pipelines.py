"""File-level operations: parsed payloads in, canonical artifact text out.

Both the service endpoints and (through them) the CLI subcommands delegate
here, so identical inputs produce byte-identical artifacts regardless of the
entry point. All artifact emitters sort their outputs; times serialize in
milliseconds at full precision.
"""

from __future__ import annotations

import json
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import audit as audit_mod
from . import report as report_mod
from .costs import graph_cost
from .errors import GraphDefectsError, MisconfigurationError, SpecParseError
from .ir import element_type, graph_from_obj, validate_graph
from .replay import (
    ToleranceTuple,
    aggregate_runtime,
    calibrate_tolerance,
    compare_outputs,
    tensor_data_from_obj,
)
from .roofline import hardware_from_obj, tightened_sol_time
from .scoring import RuntimeTriple, score_result
from .specsio import bind_axes, parse_timing_log, parse_workloads, problem_from_obj


def _canonical_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _jsonl_line(obj: Dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False) + "\n"


def parse_jsonl_records(text: str, what: str) -> List[Dict[str, Any]]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SpecParseError(f"invalid JSON in {what}", detail=f"line {lineno} column {exc.colno}") from None
        if not isinstance(obj, dict):
            raise SpecParseError(f"{what} record must be an object", detail=f"line {lineno}")
        records.append(obj)
    return records


def _infer_dtype(graph) -> str:
    meta = graph.metadata.get("precision")
    if isinstance(meta, str):
        return meta
    names = {t.dtype.name for t in graph.tensors.values() if t.dtype.name != "mixed"}
    if len(names) == 1:
        return names.pop()
    raise MisconfigurationError(
        "analysis dtype is ambiguous; pass --dtype or set metadata.precision on the graph"
    )


def run_analyze(
    graph_obj: Dict[str, Any],
    hardware_obj: Dict[str, Any],
    dtype: Optional[str] = None,
    prefetch_weights: bool = True,
    scale_overhead: bool = False,
    contraction_dims: Optional[Tuple[int, int, int]] = None,
) -> str:
    graph = graph_from_obj(graph_obj)
    defects = validate_graph(graph)
    if defects:
        raise GraphDefectsError(defects)
    hardware = hardware_from_obj(hardware_obj)
    dtype_used = dtype or _infer_dtype(graph)
    element_type(dtype_used)
    cost = graph_cost(graph, prefetch_weights=prefetch_weights, scale_overhead=scale_overhead)
    bound = tightened_sol_time(cost, hardware, dtype_used, contraction_dims=contraction_dims, graph=graph)
    payload = {
        "graph": graph.metadata.get("problem") or graph.metadata.get("name") or "",
        "hardware": hardware.name,
        "dtype": dtype_used,
        "prefetch_weights": prefetch_weights,
        "scale_overhead": scale_overhead,
        "cost": {
            "per_node_flops": {k: cost.per_node_flops[k] for k in sorted(cost.per_node_flops)},
            "total_flops": cost.total_flops,
            "external_bytes": cost.external_bytes,
            "intermediate_bytes": cost.intermediate_bytes,
            "prefetch_excluded_bytes": cost.prefetch_excluded_bytes,
        },
        "intensity_flop_per_byte": bound.intensity,
        "compute_time_s": bound.compute_time_s,
        "memory_time_s": bound.memory_time_s,
        "sol_time_s": bound.sol_time_s,
        "sol_time_ms": bound.sol_time_s * 1e3,
        "bottleneck": bound.bottleneck.value,
        "memory_bound_term": bound.memory_bound_term,
        "traffic_lower_bound_bytes": bound.traffic_lower_bound_bytes,
        "summary": {
            "total_flops": report_mod.format_flops(cost.total_flops),
            "fused_memory": report_mod.format_bytes(cost.external_bytes),
        },
    }
    return _canonical_json(payload)


def _index_by_workload(records: Sequence[Dict[str, Any]], what: str) -> Dict[Tuple[str, int], Dict[str, Any]]:
    table: Dict[Tuple[str, int], Dict[str, Any]] = {}
    for rec in records:
        try:
            key = (str(rec["problem"]), int(rec["workload_index"]))
        except KeyError as exc:
            raise SpecParseError(f"{what} record missing field {exc}") from None
        if key in table:
            raise SpecParseError(f"duplicate {what} entry for {key}")
        table[key] = rec
    return table


def run_score(
    timings_text: str,
    bounds_records: Sequence[Dict[str, Any]],
    baseline_records: Sequence[Dict[str, Any]],
) -> str:
    logs = parse_timing_log(timings_text)
    bounds = _index_by_workload(bounds_records, "bounds")
    baselines = _index_by_workload(baseline_records, "baselines")

    lines = []
    for log in sorted(logs, key=lambda l: (l.problem, l.workload_index, l.candidate_id)):
        key = (log.problem, log.workload_index)
        if key not in bounds:
            raise SpecParseError(f"no SOL bound for {key}")
        if key not in baselines:
            raise SpecParseError(f"no baseline for {key}")
        bound = bounds[key]
        t_sol_ms = float(bound["t_sol_ms"])
        t_b_ms = float(baselines[key]["t_b_ms"])
        t_ref_ms = bound.get("t_ref_ms")
        t_k_ms = aggregate_runtime(log)
        triple = RuntimeTriple(
            t_k=t_k_ms / 1e3,
            t_b=t_b_ms / 1e3,
            t_sol=t_sol_ms / 1e3,
            t_ref=float(t_ref_ms) / 1e3 if t_ref_ms is not None else None,
        )
        result = score_result(triple, log.correct)
        record: Dict[str, Any] = {
            "problem": log.problem,
            "workload_index": log.workload_index,
            "candidate_id": log.candidate_id,
            "correct": log.correct,
            "t_k_ms": t_k_ms,
            "t_b_ms": t_b_ms,
            "t_sol_ms": t_sol_ms,
        }
        if t_ref_ms is not None:
            record["t_ref_ms"] = float(t_ref_ms)
        record.update(
            {
                "score": result.score,
                "band": result.band.label if result.band is not None else None,
                "headroom_fraction": result.headroom_fraction,
                "speedup_vs_ref": result.speedup_vs_ref,
                "signals": [{"kind": s.kind.value, "detail": s.detail} for s in result.signals],
            }
        )
        for meta_key in ("category", "op_type", "precision", "domain"):
            if meta_key in bound:
                record[meta_key] = bound[meta_key]
        lines.append(_jsonl_line(record))
    return "".join(lines)


def run_validate(problem_obj: Dict[str, Any], workloads_text: Optional[str] = None) -> str:
    diagnostics: List[str] = []
    spec = None
    try:
        spec = problem_from_obj(problem_obj)
    except SpecParseError as exc:
        diagnostics.append(f"problem: {exc}")

    workload_count = 0
    if spec is not None and workloads_text is not None:
        try:
            workloads = parse_workloads(workloads_text)
        except SpecParseError as exc:
            diagnostics.append(f"workloads: {exc}")
            workloads = []
        workload_count = len(workloads)
        for i, workload in enumerate(workloads):
            try:
                bind_axes(spec, workload)
            except SpecParseError as exc:
                diagnostics.append(f"workload[{i}]: {exc}")

    payload = {
        "ok": not diagnostics,
        "problem": spec.name if spec is not None else None,
        "workloads_checked": workload_count,
        "diagnostics": diagnostics,
    }
    return _canonical_json(payload)


def run_compare(
    candidate_obj: Dict[str, Any],
    reference_obj: Dict[str, Any],
    tolerance: Dict[str, float],
) -> str:
    tol = ToleranceTuple(
        atol=float(tolerance.get("atol", 0.0)),
        rtol=float(tolerance.get("rtol", 0.0)),
        matched_ratio=float(tolerance.get("matched_ratio", 1.0)),
    )
    verdict = compare_outputs(tensor_data_from_obj(candidate_obj), tensor_data_from_obj(reference_obj), tol)
    payload = {
        "correct": verdict.correct,
        "matched_fraction": verdict.matched_fraction,
        "reject_reason": verdict.reject_reason.value if verdict.reject_reason else None,
        "tolerance": {"atol": tol.atol, "rtol": tol.rtol, "matched_ratio": tol.matched_ratio},
    }
    return _canonical_json(payload)


def run_calibrate(samples: Sequence[float], dtype: str = "fp32", floor: float = 0.0) -> str:
    tol = calibrate_tolerance(list(samples), element_type(dtype), floor=floor)
    return _canonical_json(
        {"atol": tol.atol, "rtol": tol.rtol, "matched_ratio": tol.matched_ratio, "dtype": dtype}
    )


def run_audit(
    sources: Dict[str, str],
    rules_obj: Optional[Any] = None,
    declared_precision: Optional[str] = None,
    min_blob_chars: int = 64,
) -> Tuple[str, int]:
    """Findings JSONL plus the count of reject-severity findings."""
    if rules_obj is None:
        rules, comment_syntax = audit_mod.default_rules()
    else:
        rules, comment_syntax = audit_mod.rules_from_obj(rules_obj)
    findings = audit_mod.scan_submission(
        sources, rules, declared_precision=declared_precision, comment_syntax=comment_syntax
    )
    findings += audit_mod.detect_embedded_binary(
        sources, min_blob_chars=min_blob_chars, comment_syntax=comment_syntax
    )
    findings.sort(key=lambda f: (f.file, f.line, f.rule_id))
    lines = []
    rejects = 0
    for f in findings:
        if f.severity is audit_mod.Severity.REJECT:
            rejects += 1
        lines.append(
            _jsonl_line(
                {
                    "rule_id": f.rule_id,
                    "family": f.family.value,
                    "file": f.file,
                    "line": f.line,
                    "matched_excerpt": f.matched_excerpt,
                    "severity": f.severity.value,
                }
            )
        )
    return "".join(lines), rejects


def run_report_leaderboard(results_text: str) -> Tuple[str, str]:
    records = parse_jsonl_records(results_text, "scored results")
    board = report_mod.aggregate_leaderboard(records)
    return report_mod.render_leaderboard_csv(board), report_mod.render_leaderboard_json(board)


def run_report_plot(
    kind: str,
    results_text: Optional[str] = None,
    findings_text: Optional[str] = None,
    total_submissions: Optional[int] = None,
) -> str:
    if kind == "exploit_distribution":
        if findings_text is None or total_submissions is None:
            raise SpecParseError("exploit_distribution needs findings records and --total-submissions")
        finding_records = parse_jsonl_records(findings_text, "findings")
        by_submission: Dict[str, List[audit_mod.AuditFinding]] = {}
        for rec in finding_records:
            finding = audit_mod.AuditFinding(
                rule_id=str(rec.get("rule_id", "")),
                family=audit_mod.ExploitFamily(rec["family"]),
                file=str(rec.get("file", "")),
                line=int(rec.get("line", 0)),
                matched_excerpt=str(rec.get("matched_excerpt", "")),
                severity=audit_mod.Severity(rec.get("severity", "review")),
            )
            by_submission.setdefault(finding.file, []).append(finding)
        distribution = audit_mod.exploit_distribution(
            [by_submission[k] for k in sorted(by_submission)], total_submissions
        )
        return report_mod.emit_plot_data([], kind, distribution=distribution)
    if results_text is None:
        raise SpecParseError(f"plot kind '{kind}' needs scored results")
    records = parse_jsonl_records(results_text, "scored results")
    return report_mod.emit_plot_data(records, kind)


def run_contour(
    t_sol: float,
    t_b: float,
    s: float,
    n_samples: int = 16,
    ref_range: Tuple[float, float] = (1.0, 100.0),
) -> str:
    points = report_mod.iso_score_contour(t_sol, t_b, s, n_samples=n_samples, ref_range=ref_range)
    out = [f"# kind=iso_score_contour\n# s={s!r} t_sol={t_sol!r} t_b={t_b!r}\n# xscale=log yscale=log\n"]
    out.append("speedup,sol_distance\n")
    for speedup_value, sol_distance in points:
        out.append(f"{speedup_value!r},{sol_distance!r}\n")
    return "".join(out)
