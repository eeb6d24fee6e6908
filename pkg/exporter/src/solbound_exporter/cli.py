"""export-graph: trace a tensor program and write its einsum graph file.

    export-graph <module-path>:<callable> --shapes <spec> --out <file>

<module-path> is a dotted module name or a path to a .py file; <callable> is
an nn.Module class (instantiated with no arguments), an nn.Module instance,
or a plain function over tensors. --shapes declares one entry per program
input, semicolon-separated: "16,512,2560@bf16;16,512,2560@bf16" (dtype
defaults to fp32). Tracing runs on the meta device, so no arithmetic
executes and weights are never materialized.
"""

from __future__ import annotations

import argparse
import importlib
import importlib.util
import sys
from pathlib import Path

import torch

from .emit import trace_and_export
from .mappings import UnsupportedOperatorError
from .tracing import GRAPH_DTYPES


def parse_shapes(spec: str):
    entries = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        dtype = "fp32"
        if "@" in part:
            part, dtype = part.rsplit("@", 1)
        if dtype not in GRAPH_DTYPES:
            raise ValueError(f"unknown dtype '{dtype}'")
        extents = tuple(int(x) for x in part.replace("x", ",").split(",") if x)
        if not extents or any(e <= 0 for e in extents):
            raise ValueError(f"bad shape '{part}'")
        entries.append((extents, dtype))
    if not entries:
        raise ValueError("--shapes declared no inputs")
    return entries


def load_target(target: str):
    if ":" not in target:
        raise ValueError("target must be <module-path>:<callable>")
    module_path, attr = target.rsplit(":", 1)
    if module_path.endswith(".py") or Path(module_path).exists():
        spec = importlib.util.spec_from_file_location("traced_program", module_path)
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
    else:
        module = importlib.import_module(module_path)
    obj = getattr(module, attr)
    if isinstance(obj, type) and issubclass(obj, torch.nn.Module):
        obj = obj()
    return obj


def build_program(obj, shape_entries):
    inputs = [
        torch.empty(extents, dtype=GRAPH_DTYPES[dtype], device="meta")
        for extents, dtype in shape_entries
    ]
    if isinstance(obj, torch.nn.Module):
        floating = {d for _, d in shape_entries if d not in ("int32", "bool")}
        target_dtype = GRAPH_DTYPES[floating.pop()] if len(floating) == 1 else None
        obj = obj.to(device="meta", dtype=target_dtype)
    return obj, inputs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="export-graph", description=__doc__)
    parser.add_argument("target", help="<module-path>:<callable>")
    parser.add_argument("--shapes", required=True, help="per-input shapes, ';'-separated")
    parser.add_argument("--out", default="-", help="output file, or - for stdout")
    args = parser.parse_args(argv)

    try:
        shape_entries = parse_shapes(args.shapes)
        program, inputs = build_program(load_target(args.target), shape_entries)
        text = trace_and_export(program, inputs, metadata={"exporter": "solbound-exporter/0.1.0"})
    except (ValueError, UnsupportedOperatorError, ImportError, AttributeError, FileNotFoundError) as exc:
        print(f"export-graph: {exc}", file=sys.stderr)
        return 3
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
