"""Rule-based static scanner for reward-hacking patterns in submissions.

Rules are pure data: each names an exploit family, a severity, and a list of
literal or regex patterns matched against normalized source (comments
stripped per-language, whitespace collapsed) so commented-out exploits stay
quiet and re-spaced ones do not. Only the statically expressible half of the
defenses lives here; dynamic checks (thread monitoring, synchronize
injection, timer address verification) need a live runtime and are recorded
as out of scope in the defenses coverage table.
"""

from __future__ import annotations

import base64
import binascii
import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import RuleLoadError, SpecParseError

EXCERPT_LIMIT = 120


class ExploitFamily(str, Enum):
    THREAD_INJECTION = "ThreadInjection"
    STREAM_INJECTION = "StreamInjection"
    JIT_FORKING = "JitForking"
    CACHED_OUTPUT_REUSE = "CachedOutputReuse"
    LAZY_EVALUATION = "LazyEvaluation"
    ONE_TIME_CORRECTNESS = "OneTimeCorrectness"
    MONKEY_PATCHING = "MonkeyPatching"
    PRECISION_DOWNGRADE = "PrecisionDowngrade"
    EMBEDDED_BINARY = "EmbeddedBinary"


class Severity(str, Enum):
    REJECT = "reject"
    REVIEW = "review"


@dataclass(frozen=True)
class AuditRule:
    id: str
    family: ExploitFamily
    severity: Severity
    patterns: Tuple[Tuple[str, Any], ...]  # ("literal", str) or ("regex", compiled)


@dataclass(frozen=True)
class AuditFinding:
    rule_id: str
    family: ExploitFamily
    file: str
    line: int
    matched_excerpt: str
    severity: Severity


# Mapping each observed exploit family's defense to where it is enforced.
DEFENSES_COVERAGE = {
    "ThreadInjection": {"static_rules": True, "dynamic": "thread count monitoring (out of scope)"},
    "StreamInjection": {"static_rules": True, "dynamic": "multi-stream disabling (out of scope)"},
    "JitForking": {"static_rules": True, "dynamic": None},
    "CachedOutputReuse": {"static_rules": True, "dynamic": "input cloning + allocator pointer shifts (out of scope)"},
    "LazyEvaluation": {"static_rules": True, "dynamic": "strict tensor type checks (out of scope)"},
    "OneTimeCorrectness": {"static_rules": "heuristic", "dynamic": "randomized re-trials (out of scope)"},
    "MonkeyPatching": {"static_rules": True, "dynamic": "timer address verification (out of scope)"},
    "PrecisionDowngrade": {"static_rules": True, "dynamic": "tightened tolerances (in harness replay)"},
    "EmbeddedBinary": {"static_rules": True, "dynamic": None},
}

DEFAULT_COMMENT_SYNTAX: Dict[str, Dict[str, Any]] = {
    ".py": {"line": ["#"], "block": []},
    ".cu": {"line": ["//"], "block": [["/*", "*/"]]},
    ".cuh": {"line": ["//"], "block": [["/*", "*/"]]},
    ".c": {"line": ["//"], "block": [["/*", "*/"]]},
    ".h": {"line": ["//"], "block": [["/*", "*/"]]},
    ".cpp": {"line": ["//"], "block": [["/*", "*/"]]},
    ".hpp": {"line": ["//"], "block": [["/*", "*/"]]},
    "": {"line": ["#", "//"], "block": [["/*", "*/"]]},
}

ELF_MAGIC = b"\x7fELF"
_BASE64_RUN = re.compile(r"[A-Za-z0-9+/]{16,}={0,2}")
_WS = re.compile(r"\s+")


def _syntax_for(filename: str, comment_syntax: Dict[str, Dict[str, Any]]) -> Dict[str, Any]:
    dot = filename.rfind(".")
    ext = filename[dot:].lower() if dot >= 0 else ""
    return comment_syntax.get(ext) or comment_syntax.get("") or DEFAULT_COMMENT_SYNTAX[""]


def normalize_source(text: str, syntax: Dict[str, Any]) -> List[Tuple[int, str]]:
    """(original line number, comment-stripped whitespace-collapsed line).

    Comment stripping is lexical and not string-aware; at desk scale that is
    a documented false-positive source, acceptable at review severity.
    """
    line_markers = syntax.get("line", [])
    block_markers = [tuple(b) for b in syntax.get("block", [])]
    out: List[Tuple[int, str]] = []
    in_block: Optional[str] = None  # closing marker when inside a block comment
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw
        if in_block is not None:
            end = line.find(in_block)
            if end < 0:
                continue
            line = line[end + len(in_block):]
            in_block = None
        for open_m, close_m in block_markers:
            while (start := line.find(open_m)) >= 0:
                end = line.find(close_m, start + len(open_m))
                if end < 0:
                    line = line[:start]
                    in_block = close_m
                    break
                line = line[:start] + " " + line[end + len(close_m):]
            if in_block is not None:
                break
        for marker in line_markers:
            pos = line.find(marker)
            if pos >= 0:
                line = line[:pos]
        collapsed = _WS.sub(" ", line).strip()
        if collapsed:
            out.append((lineno, collapsed))
    return out


def _excerpt(raw_line: str) -> str:
    return raw_line.strip()[:EXCERPT_LIMIT]


def rules_from_obj(obj: Any) -> Tuple[List[AuditRule], Dict[str, Dict[str, Any]]]:
    """Accept a bare JSON array of rules or {comment_syntax, rules}."""
    comment_syntax = dict(DEFAULT_COMMENT_SYNTAX)
    if isinstance(obj, dict):
        for ext, spec in obj.get("comment_syntax", {}).items():
            comment_syntax[ext] = spec
        records = obj.get("rules", [])
    elif isinstance(obj, list):
        records = obj
    else:
        raise RuleLoadError("rule file must be a JSON array or an object with a 'rules' array")

    rules: List[AuditRule] = []
    for rec in records:
        rule_id = rec.get("id", "<missing id>")
        try:
            family = ExploitFamily(rec["family"])
            severity = Severity(rec["severity"])
            raw_patterns = rec["patterns"]
        except (KeyError, ValueError) as exc:
            raise RuleLoadError(f"rule '{rule_id}': {exc}") from None
        if not raw_patterns:
            raise RuleLoadError(f"rule '{rule_id}': needs at least one pattern")
        patterns = []
        for p in raw_patterns:
            if isinstance(p, str):
                patterns.append(("literal", p))
                continue
            kind = p.get("type", "literal")
            value = p.get("value", "")
            if kind == "literal":
                patterns.append(("literal", value))
            elif kind == "regex":
                try:
                    patterns.append(("regex", re.compile(value)))
                except re.error as exc:
                    raise RuleLoadError(f"rule '{rule_id}': bad regex {value!r}: {exc}") from None
            else:
                raise RuleLoadError(f"rule '{rule_id}': unknown pattern type '{kind}'")
        rules.append(AuditRule(id=str(rule_id), family=family, severity=severity, patterns=tuple(patterns)))
    return rules, comment_syntax


def load_rules(text: str) -> Tuple[List[AuditRule], Dict[str, Dict[str, Any]]]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RuleLoadError(f"invalid JSON in rule file: line {exc.lineno} column {exc.colno}") from None
    return rules_from_obj(obj)


def default_rules() -> Tuple[List[AuditRule], Dict[str, Dict[str, Any]]]:
    from importlib.resources import files

    text = files("solbound").joinpath("data/rules.json").read_text(encoding="utf-8")
    return load_rules(text)


def _line_matches(rule: AuditRule, line: str) -> bool:
    for kind, pattern in rule.patterns:
        if kind == "literal":
            if pattern in line:
                return True
        else:
            if pattern.search(line):
                return True
    return False


def scan_submission(
    sources: Dict[str, str],
    rules: Sequence[AuditRule],
    declared_precision: Optional[str] = None,
    comment_syntax: Optional[Dict[str, Dict[str, Any]]] = None,
) -> List[AuditFinding]:
    """All rule matches across all files, ordered by (file, line, rule id).

    Precision-downgrade rules fire only for problems declared fp32 (matching
    dtypes make downcasting legitimate) and always carry review severity.
    """
    if not rules:
        raise RuleLoadError("scan requires at least one rule")
    syntax_table = comment_syntax or DEFAULT_COMMENT_SYNTAX
    findings: List[AuditFinding] = []
    for filename in sorted(sources):
        text = sources[filename]
        raw_lines = text.splitlines()
        normalized = normalize_source(text, _syntax_for(filename, syntax_table))
        for lineno, line in normalized:
            for rule in rules:
                if rule.family is ExploitFamily.PRECISION_DOWNGRADE and declared_precision != "fp32":
                    continue
                if _line_matches(rule, line):
                    severity = Severity.REVIEW if rule.family is ExploitFamily.PRECISION_DOWNGRADE else rule.severity
                    findings.append(
                        AuditFinding(
                            rule_id=rule.id,
                            family=rule.family,
                            file=filename,
                            line=lineno,
                            matched_excerpt=_excerpt(raw_lines[lineno - 1]),
                            severity=severity,
                        )
                    )
    findings.sort(key=lambda f: (f.file, f.line, f.rule_id))
    return findings


def detect_embedded_binary(
    sources: Dict[str, str],
    min_blob_chars: int = 64,
    magics: Sequence[bytes] = (ELF_MAGIC,),
    comment_syntax: Optional[Dict[str, Dict[str, Any]]] = None,
) -> List[AuditFinding]:
    """Find long base64 runs whose decoded prefix matches a binary magic."""
    if min_blob_chars < 64:
        raise SpecParseError("min_blob_chars must be at least 64")
    syntax_table = comment_syntax or DEFAULT_COMMENT_SYNTAX
    findings: List[AuditFinding] = []
    for filename in sorted(sources):
        text = sources[filename]
        raw_lines = text.splitlines()
        for lineno, line in normalize_source(text, _syntax_for(filename, syntax_table)):
            for match in _BASE64_RUN.finditer(line):
                run = match.group(0).rstrip("=")
                if len(run) < min_blob_chars:
                    continue
                head = run[: (len(run) // 4) * 4][:64]
                try:
                    decoded = base64.b64decode(head)
                except (binascii.Error, ValueError):
                    continue
                if any(decoded.startswith(m) for m in magics):
                    findings.append(
                        AuditFinding(
                            rule_id="embedded-binary-blob",
                            family=ExploitFamily.EMBEDDED_BINARY,
                            file=filename,
                            line=lineno,
                            matched_excerpt=_excerpt(raw_lines[lineno - 1]),
                            severity=Severity.REJECT,
                        )
                    )
                    break  # one blob finding per line is enough
    findings.sort(key=lambda f: (f.file, f.line, f.rule_id))
    return findings


def exploit_distribution(
    findings_by_submission: Sequence[Sequence[AuditFinding]],
    total_submissions: int,
) -> Dict[str, Tuple[int, float]]:
    """Per family: submissions with >= 1 finding, and their fraction.

    A submission with findings in several families counts toward each.
    """
    if total_submissions <= 0:
        raise SpecParseError("total_submissions must be positive")
    if total_submissions < len(findings_by_submission):
        raise SpecParseError("total_submissions below the number of scanned submissions")
    counts = {family.value: 0 for family in ExploitFamily}
    for findings in findings_by_submission:
        for family in {f.family.value for f in findings}:
            counts[family] += 1
    return {family: (count, count / total_submissions) for family, count in counts.items()}
