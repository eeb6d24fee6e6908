"""Command-line entry point: a thin client of the analysis service.

Every subcommand reads local files, ships their contents to the service
(in-process by default, or a remote instance named by SOLBOUND_SERVER), and
writes the response bytes verbatim, so CLI artifacts are byte-identical to
service responses. Exit codes: 0 success, 1 validation/correctness failure,
2 audit reject, 3 input/parse error, 4 internal error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, Tuple

import httpx

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_AUDIT_REJECT = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4

HW_SEARCH_ENV = "SOLBOUND_HW_DIR"
SERVER_ENV = "SOLBOUND_SERVER"


def _err(message: str) -> None:
    print(f"solbound: {message}", file=sys.stderr)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _read_json(path: str) -> Any:
    return json.loads(_read_text(path))


def _write_out(path: str, content: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(content)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(content)


def _resolve_hardware(name_or_path: str) -> Dict[str, Any]:
    """A path wins; otherwise search $SOLBOUND_HW_DIR, then packaged specs."""
    candidate = Path(name_or_path)
    if candidate.exists():
        return json.loads(candidate.read_text(encoding="utf-8"))
    search_dir = os.environ.get(HW_SEARCH_ENV)
    if search_dir:
        hit = Path(search_dir) / f"{name_or_path}.json"
        if hit.exists():
            return json.loads(hit.read_text(encoding="utf-8"))
    from importlib.resources import files

    packaged = files("solbound").joinpath(f"data/hw/{name_or_path}.json")
    if packaged.is_file():
        return json.loads(packaged.read_text(encoding="utf-8"))
    raise FileNotFoundError(f"hardware spec '{name_or_path}' not found (path, ${HW_SEARCH_ENV}, packaged)")


def _post(path: str, payload: Dict[str, Any]) -> Tuple[int, bytes, Dict[str, str]]:
    server = os.environ.get(SERVER_ENV)
    if server:
        with httpx.Client(base_url=server, timeout=120.0) as client:
            resp = client.post(path, json=payload)
            return resp.status_code, resp.content, dict(resp.headers)

    from .service.app import create_app

    async def call() -> Tuple[int, bytes, Dict[str, str]]:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://solbound.internal") as client:
            resp = await client.post(path, json=payload)
            return resp.status_code, resp.content, dict(resp.headers)

    return asyncio.run(call())


def _handle_error(status: int, content: bytes) -> int:
    if status == 422:
        _err(content.decode("utf-8", errors="replace"))
        return EXIT_INPUT
    if status == 400:
        try:
            detail = json.loads(content)["detail"]
        except (json.JSONDecodeError, KeyError, TypeError):
            detail = {"kind": "parse", "message": content.decode("utf-8", errors="replace"), "details": []}
        _err(detail.get("message", "bad request"))
        for line in detail.get("details", []):
            _err(f"  {line}")
        return EXIT_VALIDATION if detail.get("kind") == "validation" else EXIT_INPUT
    _err(f"service error (HTTP {status})")
    return EXIT_INTERNAL


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def _dims(value: str) -> Tuple[int, int, int]:
    parts = value.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected 'm,n,k'")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def _range(value: str) -> Tuple[float, float]:
    parts = value.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected 'lo,hi'")
    return float(parts[0]), float(parts[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solbound", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("analyze", help="graph + hardware spec -> SOL report")
    p.add_argument("graph", help="einsum graph JSON file, or - for stdin")
    p.add_argument("--hw", required=True, help="hardware spec file or packaged name")
    p.add_argument("--dtype", default=None, help="analysis precision (defaults to graph metadata)")
    p.add_argument("--prefetch-weights", type=_on_off, default=True, metavar="on|off")
    p.add_argument("--scale-overhead", type=_on_off, default=False, metavar="on|off")
    p.add_argument("--contraction-dims", type=_dims, default=None, metavar="m,n,k",
                   help="tighten the memory term with the contraction I/O bound")
    p.add_argument("--out", default="-")

    p = sub.add_parser("score", help="timing logs + bounds + baselines -> scored results")
    p.add_argument("--timings", required=True, help="timing log JSONL, or -")
    p.add_argument("--bounds", required=True, help="JSON array of per-workload SOL bounds")
    p.add_argument("--baselines", required=True, help="JSON array of per-workload baselines")
    p.add_argument("--out", default="-")

    p = sub.add_parser("validate", help="problem/workload schema check")
    p.add_argument("problem", help="problem JSON file, or -")
    p.add_argument("--workloads", default=None, help="workload JSONL file")
    p.add_argument("--out", default="-")

    p = sub.add_parser("compare", help="candidate vs reference tensor payloads")
    p.add_argument("candidate")
    p.add_argument("reference")
    p.add_argument("--atol", type=float, default=0.0)
    p.add_argument("--rtol", type=float, default=0.0)
    p.add_argument("--matched-ratio", type=float, default=1.0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("calibrate", help="deviation samples -> tolerance tuple")
    p.add_argument("samples", help="JSON array of max absolute deviations, or -")
    p.add_argument("--dtype", default="fp32")
    p.add_argument("--floor", type=float, default=0.0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("audit", help="scan submission sources for exploit patterns")
    p.add_argument("paths", nargs="+", help="source files or directories")
    p.add_argument("--rules", default=None, help="rule file (packaged defaults when omitted)")
    p.add_argument("--precision", default=None, help="declared problem precision")
    p.add_argument("--min-blob-chars", type=int, default=64)
    p.add_argument("--out", default="-")

    p = sub.add_parser("report", help="scored results -> leaderboard or plot data")
    p.add_argument("results", nargs="?", default=None, help="scored results JSONL, or -")
    p.add_argument("--plot", default=None, choices=["speedup_vs_soldist", "score_landscape",
                                                    "score_vs_headroom", "exploit_distribution"])
    p.add_argument("--findings", default=None, help="findings JSONL (exploit_distribution)")
    p.add_argument("--total-submissions", type=int, default=None)
    p.add_argument("--out", default="-")

    p = sub.add_parser("contour", help="iso-score contour points")
    p.add_argument("--t-sol", type=float, required=True)
    p.add_argument("--t-b", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--n-samples", type=int, default=16)
    p.add_argument("--ref-range", type=_range, default=(1.0, 100.0), metavar="lo,hi")
    p.add_argument("--out", default="-")

    p = sub.add_parser("serve", help="run the analysis service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8337)

    return parser


def _collect_sources(paths) -> Dict[str, str]:
    sources: Dict[str, str] = {}
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            for child in sorted(path.rglob("*")):
                if child.is_file():
                    sources[str(child)] = child.read_text(encoding="utf-8", errors="replace")
        else:
            sources[str(path)] = _read_text(raw)
    return sources


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return EXIT_OK if exc.code == 0 else EXIT_INPUT

    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT

    try:
        if args.command == "serve":
            import uvicorn

            from .service.app import create_app

            uvicorn.run(create_app(), host=args.host, port=args.port)
            return EXIT_OK

        if args.command == "analyze":
            payload = {
                "graph": _read_json(args.graph),
                "hardware": _resolve_hardware(args.hw),
                "dtype": args.dtype,
                "prefetch_weights": args.prefetch_weights,
                "scale_overhead": args.scale_overhead,
                "contraction_dims": args.contraction_dims,
            }
            status, content, _ = _post("/v1/analyze", payload)
            if status != 200:
                return _handle_error(status, content)
            _write_out(args.out, content)
            return EXIT_OK

        if args.command == "score":
            payload = {
                "timings": _read_text(args.timings),
                "bounds": _read_json(args.bounds),
                "baselines": _read_json(args.baselines),
            }
            status, content, _ = _post("/v1/score", payload)
            if status != 200:
                return _handle_error(status, content)
            _write_out(args.out, content)
            return EXIT_OK

        if args.command == "validate":
            payload = {
                "problem": _read_json(args.problem),
                "workloads": _read_text(args.workloads) if args.workloads else None,
            }
            status, content, headers = _post("/v1/validate", payload)
            if status != 200:
                return _handle_error(status, content)
            _write_out(args.out, content)
            return EXIT_OK if headers.get("x-solbound-ok") == "1" else EXIT_VALIDATION

        if args.command == "compare":
            payload = {
                "candidate": _read_json(args.candidate),
                "reference": _read_json(args.reference),
                "tolerance": {"atol": args.atol, "rtol": args.rtol, "matched_ratio": args.matched_ratio},
            }
            status, content, headers = _post("/v1/compare", payload)
            if status != 200:
                return _handle_error(status, content)
            _write_out(args.out, content)
            return EXIT_OK if headers.get("x-solbound-ok") == "1" else EXIT_VALIDATION

        if args.command == "calibrate":
            payload = {"samples": _read_json(args.samples), "dtype": args.dtype, "floor": args.floor}
            status, content, _ = _post("/v1/calibrate", payload)
            if status != 200:
                return _handle_error(status, content)
            _write_out(args.out, content)
            return EXIT_OK

        if args.command == "audit":
            rules = _read_json(args.rules) if args.rules else None
            payload = {
                "sources": _collect_sources(args.paths),
                "rules": rules,
                "declared_precision": args.precision,
                "min_blob_chars": args.min_blob_chars,
            }
            status, content, headers = _post("/v1/audit", payload)
            if status != 200:
                return _handle_error(status, content)
            _write_out(args.out, content)
            rejects = int(headers.get("x-solbound-rejects", "0"))
            return EXIT_AUDIT_REJECT if rejects > 0 else EXIT_OK

        if args.command == "report":
            if args.plot:
                payload = {
                    "kind": args.plot,
                    "results": _read_text(args.results) if args.results else None,
                    "findings": _read_text(args.findings) if args.findings else None,
                    "total_submissions": args.total_submissions,
                }
                status, content, _ = _post("/v1/report/plot", payload)
                if status != 200:
                    return _handle_error(status, content)
                _write_out(args.out, content)
                return EXIT_OK
            if args.results is None:
                _err("report needs a results file (or --plot exploit_distribution --findings ...)")
                return EXIT_INPUT
            payload = {"results": _read_text(args.results)}
            status, content, _ = _post("/v1/report/leaderboard", payload)
            if status != 200:
                return _handle_error(status, content)
            body = json.loads(content)
            _write_out(args.out, body["csv"].encode("utf-8"))
            if args.out != "-":
                twin = Path(args.out).with_suffix(".json")
                twin.write_text(body["json_twin"], encoding="utf-8")
            return EXIT_OK

        if args.command == "contour":
            payload = {
                "t_sol": args.t_sol,
                "t_b": args.t_b,
                "s": args.s,
                "n_samples": args.n_samples,
                "ref_range": args.ref_range,
            }
            status, content, _ = _post("/v1/contour", payload)
            if status != 200:
                return _handle_error(status, content)
            _write_out(args.out, content)
            return EXIT_OK

    except FileNotFoundError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except json.JSONDecodeError as exc:
        _err(f"invalid JSON input: {exc}")
        return EXIT_INPUT
    except httpx.HTTPError as exc:
        _err(f"service unreachable: {exc}")
        return EXIT_INTERNAL

    _err(f"unknown command {args.command!r}")
    return EXIT_INPUT


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
