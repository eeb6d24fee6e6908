"""Problem, workload, and timing-log I/O plus typed symbolic axis binding.

A problem definition declares axes as const, var, or expr; workloads bind the
var axes; expressions resolve afterwards in dependency order. Binding a
workload against a problem yields a concrete, validated einsum graph.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import ExpressionError, SpecParseError
from .ir import (
    EinsumGraph,
    NodeKind,
    Role,
    element_type,
    graph_from_obj,
    validate_graph,
)
from .replay import ToleranceTuple

CATEGORIES = ("L1", "L2", "Quant", "FIB")
OP_TYPES = (
    "attention",
    "moe",
    "normalization",
    "embedding",
    "linear",
    "fused",
    "gemm",
    "mlp",
    "convolution",
    "ssm",
    "other",
)
DOMAINS = ("llm", "multimodal", "diffusion", "vision", "audio", "video")
DIRECTIONS = ("forward", "backward")


class AxisKind(str, Enum):
    CONST = "const"
    VAR = "var"
    EXPR = "expr"


@dataclass(frozen=True)
class AxisDecl:
    name: str
    kind: AxisKind
    const_value: Optional[int] = None
    expr_text: Optional[str] = None


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    category: str
    op_type: str
    domain: str
    direction: str
    precision: str
    axes: Tuple[AxisDecl, ...]
    tensors: Tuple[Dict[str, Any], ...]  # templates; shape entries int or axis name
    nodes: Tuple[Dict[str, Any], ...]
    reference: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def axis(self, name: str) -> AxisDecl:
        for a in self.axes:
            if a.name == name:
                return a
        raise KeyError(name)


@dataclass(frozen=True)
class Workload:
    bindings: Dict[str, int]
    tolerance: ToleranceTuple


@dataclass(frozen=True)
class TimingLog:
    problem: str
    workload_index: int
    candidate_id: str
    trials: Tuple[Tuple[float, ...], ...]
    warmup_count: int
    timed_count: int
    correct: bool = True


# ---------------------------------------------------------------------------
# Axis expression grammar: IDENT | INT | expr (+|-) expr | expr (*|/) expr |
# (expr). '/' is exact integer division; no unary minus.

_TOKEN_RE = re.compile(r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[+\-*/()]))")


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos]!r}", column=pos)
        for kind in ("int", "ident", "op"):
            val = m.group(kind)
            if val is not None:
                tokens.append((kind, val, m.start(kind)))
                break
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, env: Dict[str, int]):
        self.text = text
        self.env = env
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ExpressionError("unexpected end of expression", column=len(self.text))
        self.i += 1
        return tok

    def parse(self) -> int:
        value = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExpressionError(f"trailing token {tok[1]!r}", column=tok[2])
        return value

    def expr(self) -> int:
        value = self.term()
        while (tok := self.peek()) is not None and tok[1] in "+-":
            self.take()
            rhs = self.term()
            value = value + rhs if tok[1] == "+" else value - rhs
        return value

    def term(self) -> int:
        value = self.factor()
        while (tok := self.peek()) is not None and tok[1] in "*/":
            self.take()
            rhs = self.factor()
            if tok[1] == "*":
                value = value * rhs
            else:
                if rhs == 0:
                    raise ExpressionError("division by zero", column=tok[2])
                if value % rhs != 0:
                    raise ExpressionError(f"inexact division {value}/{rhs}", column=tok[2])
                value //= rhs
        return value

    def factor(self) -> int:
        kind, text, col = self.take()
        if kind == "int":
            return int(text)
        if kind == "ident":
            if text not in self.env:
                raise ExpressionError(f"unbound identifier '{text}'", column=col)
            return self.env[text]
        if text == "(":
            value = self.expr()
            tok = self.peek()
            if tok is None or tok[1] != ")":
                raise ExpressionError("expected ')'", column=tok[2] if tok else len(self.text))
            self.take()
            return value
        raise ExpressionError(f"unexpected token {text!r}", column=col)


def eval_axis_expr(expr_text: str, env: Dict[str, int]) -> int:
    """Evaluate a shape expression with exact integer arithmetic."""
    value = _Parser(expr_text, env).parse()
    if value <= 0:
        raise ExpressionError(f"expression '{expr_text}' evaluated to non-positive {value}")
    return value


# ---------------------------------------------------------------------------
# Problem documents

_REQUIRED_PROBLEM_FIELDS = (
    "name",
    "category",
    "op_type",
    "domain",
    "direction",
    "precision",
    "axes",
    "tensors",
    "nodes",
)
_KNOWN_PROBLEM_FIELDS = _REQUIRED_PROBLEM_FIELDS + ("reference", "metadata")


def _check_enum(value: str, allowed: Sequence[str], field_name: str) -> str:
    if value not in allowed:
        raise SpecParseError(
            f"'{value}' is not one of {list(allowed)}", detail=field_name
        )
    return value


def problem_from_obj(obj: Dict[str, Any]) -> ProblemSpec:
    if not isinstance(obj, dict):
        raise SpecParseError("problem document must be a JSON object")
    for key in _REQUIRED_PROBLEM_FIELDS:
        if key not in obj:
            raise SpecParseError(f"missing required field '{key}'", detail=key)

    axes: List[AxisDecl] = []
    names = set()
    for i, a in enumerate(obj["axes"]):
        where = f"axes[{i}]"
        try:
            kind = AxisKind(a["kind"])
            name = str(a["name"])
        except (KeyError, ValueError) as exc:
            raise SpecParseError(f"bad axis declaration: {exc}", detail=where) from None
        if name in names:
            raise SpecParseError(f"duplicate axis '{name}'", detail=where)
        names.add(name)
        const_value = a.get("const_value")
        expr_text = a.get("expr_text")
        if kind is AxisKind.CONST:
            if const_value is None:
                raise SpecParseError("const axis needs const_value", detail=where)
            if int(const_value) <= 0:
                raise SpecParseError("const_value must be positive", detail=where)
        elif kind is AxisKind.EXPR:
            if not expr_text:
                raise SpecParseError("expr axis needs expr_text", detail=where)
        else:
            if const_value is not None or expr_text is not None:
                raise SpecParseError("var axis carries no value", detail=where)
        axes.append(
            AxisDecl(
                name=name,
                kind=kind,
                const_value=int(const_value) if const_value is not None else None,
                expr_text=str(expr_text) if expr_text is not None else None,
            )
        )

    element_type(str(obj["precision"]))  # reject unknown dtype names

    tensors = []
    for i, t in enumerate(obj["tensors"]):
        where = f"tensors[{i}]"
        for key in ("name", "shape", "dtype", "role"):
            if key not in t:
                raise SpecParseError(f"tensor template missing '{key}'", detail=where)
        for e in t["shape"]:
            if isinstance(e, str) and e not in names:
                raise SpecParseError(f"unknown axis reference '{e}'", detail=f"{where}.shape")
            if isinstance(e, int) and e <= 0:
                raise SpecParseError("literal extents must be positive", detail=f"{where}.shape")
        element_type(str(t["dtype"]))
        Role(t["role"])
        tensors.append(dict(t))

    nodes = []
    for i, n in enumerate(obj["nodes"]):
        where = f"nodes[{i}]"
        for key in ("id", "kind", "inputs", "input_specs", "output", "output_spec"):
            if key not in n:
                raise SpecParseError(f"node template missing '{key}'", detail=where)
        NodeKind(n["kind"])
        nodes.append(dict(n))

    extra = {k: v for k, v in obj.items() if k not in _KNOWN_PROBLEM_FIELDS}
    if "metadata" in obj:
        extra["metadata"] = obj["metadata"]

    return ProblemSpec(
        name=str(obj["name"]),
        category=_check_enum(str(obj["category"]), CATEGORIES, "category"),
        op_type=_check_enum(str(obj["op_type"]), OP_TYPES, "op_type"),
        domain=_check_enum(str(obj["domain"]), DOMAINS, "domain"),
        direction=_check_enum(str(obj["direction"]), DIRECTIONS, "direction"),
        precision=str(obj["precision"]),
        axes=tuple(axes),
        tensors=tuple(tensors),
        nodes=tuple(nodes),
        reference=obj.get("reference"),
        extra=extra,
    )


def parse_problem(text: str) -> ProblemSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError("invalid JSON in problem document", detail=f"line {exc.lineno} column {exc.colno}") from None
    return problem_from_obj(obj)


def problem_to_obj(spec: ProblemSpec) -> Dict[str, Any]:
    obj: Dict[str, Any] = {
        "name": spec.name,
        "category": spec.category,
        "op_type": spec.op_type,
        "domain": spec.domain,
        "direction": spec.direction,
        "precision": spec.precision,
        "axes": [
            {
                "name": a.name,
                "kind": a.kind.value,
                **({"const_value": a.const_value} if a.const_value is not None else {}),
                **({"expr_text": a.expr_text} if a.expr_text is not None else {}),
            }
            for a in spec.axes
        ],
        "tensors": [dict(t) for t in spec.tensors],
        "nodes": [dict(n) for n in spec.nodes],
    }
    if spec.reference is not None:
        obj["reference"] = spec.reference
    obj.update(spec.extra)
    return obj


def dump_problem(spec: ProblemSpec) -> str:
    return json.dumps(problem_to_obj(spec), indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Axis binding

_IDENT_RE = re.compile(r"[A-Za-z_]\w*")


def resolve_axes(spec: ProblemSpec, bindings: Dict[str, int]) -> Dict[str, int]:
    """Concrete value for every axis; exprs resolved in dependency order."""
    declared = {a.name for a in spec.axes}
    env: Dict[str, int] = {}
    for a in spec.axes:
        if a.kind is AxisKind.CONST:
            env[a.name] = a.const_value
        elif a.kind is AxisKind.VAR:
            if a.name not in bindings:
                raise SpecParseError(f"workload does not bind var axis '{a.name}'", detail=a.name)
            value = int(bindings[a.name])
            if value <= 0:
                raise SpecParseError(f"binding for '{a.name}' must be positive", detail=a.name)
            env[a.name] = value
    for name in bindings:
        if name not in declared:
            raise SpecParseError(f"binding for undeclared axis '{name}'", detail=name)
        if spec.axis(name).kind is not AxisKind.VAR:
            raise SpecParseError(f"axis '{name}' is not a var axis and cannot be bound", detail=name)

    # Resolve expr axes by repeated passes; a stuck pass means a cycle or an
    # unknown identifier, which eval_axis_expr reports precisely.
    pending = [a for a in spec.axes if a.kind is AxisKind.EXPR]
    while pending:
        progressed = []
        for a in pending:
            deps = set(_IDENT_RE.findall(a.expr_text))
            unknown = deps - declared
            if unknown:
                raise SpecParseError(
                    f"expr axis '{a.name}' references unknown axis {sorted(unknown)}", detail=a.name
                )
            if deps <= env.keys():
                env[a.name] = eval_axis_expr(a.expr_text, env)
                progressed.append(a)
        if not progressed:
            stuck = sorted(a.name for a in pending)
            raise SpecParseError(f"cyclic expr axis dependencies among {stuck}")
        pending = [a for a in pending if a not in progressed]
    return env


def bind_axes(spec: ProblemSpec, workload: Workload) -> EinsumGraph:
    """Instantiate the graph template with concrete axis values and validate."""
    env = resolve_axes(spec, workload.bindings)

    graph_obj: Dict[str, Any] = {
        "tensors": [],
        "nodes": [],
        "metadata": {"problem": spec.name, "precision": spec.precision, "direction": spec.direction},
    }
    for t in spec.tensors:
        shape = [env[e] if isinstance(e, str) else int(e) for e in t["shape"]]
        graph_obj["tensors"].append({"name": t["name"], "shape": shape, "dtype": t["dtype"], "role": t["role"]})
    for n in spec.nodes:
        graph_obj["nodes"].append(dict(n))

    graph = graph_from_obj(graph_obj)
    defects = validate_graph(graph)
    if defects:
        summary = "; ".join(f"{d.subject}: {d.rule}" for d in defects[:5])
        raise SpecParseError(f"bound graph fails validation: {summary}")
    return graph


# ---------------------------------------------------------------------------
# JSON Lines documents

def _parse_jsonl(text: str, what: str) -> List[Tuple[int, Dict[str, Any]]]:
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
        records.append((lineno, obj))
    return records


def parse_workloads(text: str) -> List[Workload]:
    workloads = []
    for lineno, obj in _parse_jsonl(text, "workloads"):
        tol = obj.get("tolerance")
        if not isinstance(tol, dict):
            raise SpecParseError("workload missing tolerance tuple", detail=f"line {lineno}")
        try:
            tolerance = ToleranceTuple(
                atol=float(tol["atol"]),
                rtol=float(tol["rtol"]),
                matched_ratio=float(tol["matched_ratio"]),
            )
        except KeyError as exc:
            raise SpecParseError(f"tolerance missing field {exc}", detail=f"line {lineno}") from None
        except SpecParseError as exc:
            raise SpecParseError(str(exc), detail=f"line {lineno}") from None
        bindings = obj.get("bindings", {})
        if not isinstance(bindings, dict):
            raise SpecParseError("bindings must be an object", detail=f"line {lineno}")
        workloads.append(
            Workload(bindings={str(k): int(v) for k, v in bindings.items()}, tolerance=tolerance)
        )
    return workloads


def dump_workloads(workloads: Sequence[Workload]) -> str:
    lines = []
    for w in workloads:
        record = {
            "bindings": dict(w.bindings),
            "tolerance": {
                "atol": w.tolerance.atol,
                "rtol": w.tolerance.rtol,
                "matched_ratio": w.tolerance.matched_ratio,
            },
        }
        lines.append(json.dumps(record, ensure_ascii=False) + "\n")
    return "".join(lines)


def dump_timing_log(logs: Sequence[TimingLog]) -> str:
    lines = []
    for log in logs:
        record: Dict[str, Any] = {
            "problem": log.problem,
            "workload_index": log.workload_index,
            "candidate_id": log.candidate_id,
            "warmup_count": log.warmup_count,
            "timed_count": log.timed_count,
            "trials": [list(t) for t in log.trials],
        }
        if not log.correct:
            record["correct"] = False
        lines.append(json.dumps(record, ensure_ascii=False) + "\n")
    return "".join(lines)


def parse_timing_log(text: str) -> List[TimingLog]:
    logs = []
    for lineno, obj in _parse_jsonl(text, "timing log"):
        try:
            timed_count = int(obj["timed_count"])
            trials = tuple(tuple(float(x) for x in trial) for trial in obj["trials"])
            log = TimingLog(
                problem=str(obj["problem"]),
                workload_index=int(obj["workload_index"]),
                candidate_id=str(obj["candidate_id"]),
                trials=trials,
                warmup_count=int(obj["warmup_count"]),
                timed_count=timed_count,
                correct=bool(obj.get("correct", True)),
            )
        except KeyError as exc:
            raise SpecParseError(f"timing record missing field {exc}", detail=f"line {lineno}") from None
        for i, trial in enumerate(log.trials):
            if len(trial) != timed_count:
                raise SpecParseError(
                    f"trial {i} has {len(trial)} samples but timed_count is {timed_count}",
                    detail=f"line {lineno}",
                )
        logs.append(log)
    return logs
