"""Leaderboards, breakdown tables, correlation, and plot-data emission.

Aggregation is deliberately single-threaded over sorted inputs so repeated
runs emit identical bytes. Nothing here renders charts; plot subcommands emit
CSV with axis hints in comment headers for downstream plotting.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import EmptySuiteError, SpecParseError, UndefinedCorrelationError
from .specsio import CATEGORIES

PLOT_KINDS = ("speedup_vs_soldist", "score_landscape", "score_vs_headroom", "exploit_distribution")


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise SpecParseError("pearson_r needs two equal-length series of >= 2 points")
    n = len(xs)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    cov = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    var_x = math.fsum((x - mean_x) ** 2 for x in xs)
    var_y = math.fsum((y - mean_y) ** 2 for y in ys)
    if var_x == 0.0 or var_y == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return cov / math.sqrt(var_x * var_y)


def lower_median(values: Sequence[float]) -> float:
    """Median using the lower of the two middles for even counts."""
    if not values:
        raise EmptySuiteError("median of an empty sequence")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def iso_score_contour(
    t_sol: float,
    t_b: float,
    s: float,
    n_samples: int = 16,
    ref_range: Tuple[float, float] = (1.0, 100.0),
) -> List[Tuple[float, float]]:
    """Points (speedup, sol_distance) tracing a fixed-score contour.

    Inverts the score: t_k(s) = t_sol + (1/s - 1)(t_b - t_sol). The contour
    is parameterized by a reference runtime swept log-uniformly over
    ``ref_range`` multiples of t_k.
    """
    if not 0.0 < s <= 1.0:
        raise SpecParseError(f"score {s!r} outside (0, 1]")
    if t_b <= t_sol or t_sol <= 0:
        raise SpecParseError("contour requires t_b > t_sol > 0")
    if n_samples < 1:
        raise SpecParseError("n_samples must be >= 1")
    lo, hi = ref_range
    if lo <= 0 or hi < lo:
        raise SpecParseError("ref_range must be positive and ordered")
    t_k = t_sol + (1.0 / s - 1.0) * (t_b - t_sol)
    sol_distance = t_k / t_sol
    points = []
    for i in range(n_samples):
        frac = i / (n_samples - 1) if n_samples > 1 else 0.0
        multiple = lo * (hi / lo) ** frac
        t_ref = multiple * t_k
        points.append((t_ref / t_k, sol_distance))
    return points


# ---------------------------------------------------------------------------
# Leaderboard aggregation over scored-result records (JSONL dicts)


@dataclass(frozen=True)
class LeaderboardRow:
    problem: str
    category: str
    op_type: str
    precision: str
    workload_scores: Tuple[float, ...]
    problem_score: float


def _percent(count: int, total: int) -> float:
    pct = Decimal(count * 100) / Decimal(total)
    return float(pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _gated(record: Dict[str, Any]) -> float:
    if not record.get("correct", True):
        return 0.0
    score = record.get("score")
    return float(score) if score is not None else 0.0


def aggregate_leaderboard(records: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    """Leaderboard rows plus category/op-type/precision breakdown tables.

    Per-problem score is the mean of per-workload gated scores; when several
    candidates share a workload the best gated score (ties: smaller runtime,
    then record order) represents it. Medians use the lower-median convention
    for even counts.
    """
    if not records:
        raise EmptySuiteError("leaderboard over zero results")

    by_problem: Dict[str, Dict[int, Tuple[float, float, int]]] = {}
    meta: Dict[str, Dict[str, str]] = {}
    reductions: Dict[str, List[float]] = {}
    headrooms: Dict[str, List[float]] = {}
    for order, rec in enumerate(records):
        for field_name in ("problem", "workload_index"):
            if field_name not in rec:
                raise SpecParseError(f"scored record missing field '{field_name}'")
        problem = str(rec["problem"])
        widx = int(rec["workload_index"])
        gated = _gated(rec)
        t_k = float(rec.get("t_k_ms", math.inf))
        best = by_problem.setdefault(problem, {})
        current = best.get(widx)
        if current is None or (-gated, t_k, order) < (-current[0], current[1], current[2]):
            best[widx] = (gated, t_k, order)
        meta.setdefault(
            problem,
            {
                "category": str(rec.get("category", "")),
                "op_type": str(rec.get("op_type", "")),
                "precision": str(rec.get("precision", "")),
            },
        )
        category = meta[problem]["category"]
        t_ref = rec.get("t_ref_ms")
        if t_ref is not None and t_k not in (0.0, math.inf):
            reductions.setdefault(category, []).append(float(t_ref) / t_k)
        if rec.get("headroom_fraction") is not None:
            headrooms.setdefault(category, []).append(float(rec["headroom_fraction"]))

    rows: List[LeaderboardRow] = []
    for problem in sorted(by_problem):
        per_workload = by_problem[problem]
        scores = tuple(per_workload[w][0] for w in sorted(per_workload))
        rows.append(
            LeaderboardRow(
                problem=problem,
                category=meta[problem]["category"],
                op_type=meta[problem]["op_type"],
                precision=meta[problem]["precision"],
                workload_scores=scores,
                problem_score=math.fsum(scores) / len(scores),
            )
        )

    categories_present = [c for c in CATEGORIES if any(r.category == c for r in rows)]
    categories_present += sorted({r.category for r in rows} - set(CATEGORIES))
    category_stats = {}
    for cat in categories_present:
        scores = [r.problem_score for r in rows if r.category == cat]
        category_stats[cat] = {
            "count": len(scores),
            "mean": math.fsum(scores) / len(scores),
            "median": lower_median(scores),
        }

    problem_scores = [r.problem_score for r in rows]
    overall = {
        "count": len(rows),
        "mean": math.fsum(problem_scores) / len(problem_scores),
        "median": lower_median(problem_scores),
    }

    def distribution(attr: str) -> Dict[str, Dict[str, Any]]:
        counts: Dict[str, int] = {}
        for r in rows:
            key = getattr(r, attr) or "unknown"
            counts[key] = counts.get(key, 0) + 1
        return {
            key: {"count": counts[key], "percent": _percent(counts[key], len(rows))}
            for key in sorted(counts, key=lambda k: (-counts[k], k))
        }

    return {
        "rows": rows,
        "category_stats": category_stats,
        "overall": overall,
        "op_type_distribution": distribution("op_type"),
        "precision_distribution": distribution("precision"),
        "sol_distance_reduction_median": {
            cat: lower_median(vals) for cat, vals in sorted(reductions.items())
        },
        "headroom_median": {cat: lower_median(vals) for cat, vals in sorted(headrooms.items())},
    }


def render_leaderboard_csv(board: Dict[str, Any]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["problem", "category", "op_type", "precision", "n_workloads", "problem_score"])
    for row in board["rows"]:
        writer.writerow(
            [row.problem, row.category, row.op_type, row.precision, len(row.workload_scores), repr(row.problem_score)]
        )
    return out.getvalue()


def render_leaderboard_json(board: Dict[str, Any]) -> str:
    payload = {
        "rows": [
            {
                "problem": r.problem,
                "category": r.category,
                "op_type": r.op_type,
                "precision": r.precision,
                "workload_scores": list(r.workload_scores),
                "problem_score": r.problem_score,
            }
            for r in board["rows"]
        ],
        "category_stats": board["category_stats"],
        "overall": board["overall"],
        "op_type_distribution": board["op_type_distribution"],
        "precision_distribution": board["precision_distribution"],
        "sol_distance_reduction_median": board["sol_distance_reduction_median"],
        "headroom_median": board["headroom_median"],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Plot data


def _require(rec: Dict[str, Any], field_name: str, kind: str) -> Any:
    value = rec.get(field_name)
    if value is None:
        raise SpecParseError(f"plot kind '{kind}' requires field '{field_name}'")
    return value


def emit_plot_data(
    records: Sequence[Dict[str, Any]],
    kind: str,
    distribution: Optional[Dict[str, Tuple[int, float]]] = None,
) -> str:
    """CSV plot data with scale hints in '#' header lines; no rendering."""
    if kind not in PLOT_KINDS:
        raise SpecParseError(f"unknown plot kind '{kind}'; expected one of {list(PLOT_KINDS)}")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    out.write(f"# kind={kind}\n")

    if kind == "exploit_distribution":
        if distribution is None:
            raise SpecParseError("plot kind 'exploit_distribution' requires a findings distribution")
        out.write("# xscale=linear yscale=linear\n")
        writer.writerow(["family", "count", "fraction", "percent"])
        for family in sorted(distribution, key=lambda f: (-distribution[f][0], f)):
            count, fraction = distribution[family]
            writer.writerow([family, count, repr(fraction), f"{fraction * 100:.1f}"])
        return out.getvalue()

    if kind in ("speedup_vs_soldist", "score_landscape"):
        out.write("# xscale=log yscale=log\n")
        columns = ["problem", "workload_index", "candidate_id", "speedup", "sol_distance"]
        if kind == "score_landscape":
            columns += ["score", "band"]
        writer.writerow(columns)
        for rec in records:
            t_k = float(_require(rec, "t_k_ms", kind))
            t_sol = float(_require(rec, "t_sol_ms", kind))
            speedup_value = rec.get("speedup_vs_ref")
            if speedup_value is None:
                t_ref = float(_require(rec, "t_ref_ms", kind))
                speedup_value = t_ref / t_k
            row = [
                rec.get("problem", ""),
                rec.get("workload_index", ""),
                rec.get("candidate_id", ""),
                repr(float(speedup_value)),
                repr(t_k / t_sol),
            ]
            if kind == "score_landscape":
                score = _require(rec, "score", kind)
                row += [repr(float(score)), str(rec.get("band", ""))]
            writer.writerow(row)
        return out.getvalue()

    # score_vs_headroom
    out.write("# xscale=linear yscale=linear\n")
    writer.writerow(["problem", "workload_index", "candidate_id", "headroom_fraction", "score"])
    for rec in records:
        headroom = _require(rec, "headroom_fraction", kind)
        score = _require(rec, "score", kind)
        writer.writerow(
            [
                rec.get("problem", ""),
                rec.get("workload_index", ""),
                rec.get("candidate_id", ""),
                repr(float(headroom)),
                repr(float(score)),
            ]
        )
    return out.getvalue()


# ---------------------------------------------------------------------------
# Human-readable magnitude formatting


def format_flops(count: int) -> str:
    """'107.4 G' style: one decimal at the largest fitting SI scale."""
    for unit, scale in (("T", 1e12), ("G", 1e9), ("M", 1e6), ("K", 1e3)):
        if count >= scale:
            return f"{count / scale:.1f} {unit}"
    return f"{count:.1f}"


def format_bytes(count: int) -> str:
    """'126 MB' style: three significant digits at a decimal SI scale."""
    for unit, scale in (("TB", 1e12), ("GB", 1e9), ("MB", 1e6), ("KB", 1e3)):
        if count >= scale:
            return f"{count / scale:.3g} {unit}"
    return f"{count} B"
