"""Turn a trace into a graph file in the analyzer's JSON format.

Roles follow parameter-ness: module parameters export as weights, traced
entry tensors as inputs, the returned tensors as outputs, everything else as
intermediates. Identity and view operations become zero-FLOP permutation
nodes or alias rewiring; reshapes relabel entry tensors at the source and
are rejected elsewhere (the four-kind node dialect cannot express a general
rank change).
"""

from __future__ import annotations

import itertools
import json
from typing import Dict, List, Optional, Sequence, Tuple

import torch

from .mappings import UnsupportedOperatorError, convert
from .tracing import Trace, trace_program


def _letter_binding(specs: Sequence[str], shapes: Sequence[Tuple[int, ...]]) -> Dict[str, int]:
    binding: Dict[str, int] = {}
    for spec, shape in zip(specs, shapes):
        for letter, extent in zip(spec, shape):
            binding[letter] = extent
    return binding


def export_trace(
    trace: Trace,
    input_ids: Sequence[int],
    param_names: Dict[int, str],
    output_ids: Sequence[int],
    metadata: Optional[Dict[str, str]] = None,
) -> dict:
    alias_of: Dict[int, int] = {}

    def resolve(tid: int) -> int:
        while tid in alias_of:
            tid = alias_of[tid]
        return tid

    entry_ids = set(input_ids) | set(param_names)
    consumed_elsewhere: Dict[int, int] = {}
    for event in trace.events:
        if event.op not in ("alias", "reshape", "view", "flatten"):
            for tid in event.inputs:
                consumed_elsewhere[tid] = consumed_elsewhere.get(tid, 0) + 1

    relabeled: Dict[int, Tuple[int, ...]] = {}
    for event in trace.events:
        if event.op == "alias":
            alias_of[event.output] = event.inputs[0]
        elif event.op in ("reshape", "view", "flatten"):
            base = resolve(event.inputs[0])
            if base in entry_ids and consumed_elsewhere.get(base, 0) == 0 and base not in output_ids:
                relabeled[base] = event.output_shape
                alias_of[event.output] = base
            else:
                raise UnsupportedOperatorError(
                    "reshape of a computed or shared tensor cannot be relabeled; "
                    "only entry tensors with a single reshaped use are supported"
                )

    # Name assignment, stable across runs: inputs, params, then discovery order.
    names: Dict[int, str] = {}
    for i, tid in enumerate(input_ids):
        names[tid] = f"arg{i}"
    for tid, pname in param_names.items():
        names[tid] = pname
    fresh = itertools.count(1)

    def name_of(tid: int) -> str:
        tid = resolve(tid)
        if tid not in names:
            names[tid] = f"t{next(fresh)}"
        return names[tid]

    tensors: Dict[str, dict] = {}

    def declare(tid: int, role: str) -> str:
        tid = resolve(tid)
        name = name_of(tid)
        shape = relabeled.get(tid, trace.shapes[tid])
        existing = tensors.get(name)
        if existing is None:
            tensors[name] = {
                "name": name,
                "shape": list(shape),
                "dtype": trace.dtypes[tid],
                "role": role,
            }
        elif role == "output":
            existing["role"] = "output"
        return name

    for tid in input_ids:
        declare(tid, "input")
    for tid in param_names:
        declare(tid, "weight")

    nodes: List[dict] = []
    node_seq = itertools.count(1)

    for event in trace.events:
        if event.op in ("alias", "reshape", "view", "flatten"):
            continue
        templates = convert(event.op, event.input_shapes, event.output_shape, dims=event.dims)
        produced: Dict[str, Tuple[str, Tuple[int, ...]]] = {}
        for template in templates:
            node_id = f"n{next(node_seq)}"
            in_names: List[str] = []
            in_shapes: List[Tuple[int, ...]] = []
            for slot in template.inputs:
                if isinstance(slot, int):
                    # entry tensors keep their role; new ones start intermediate
                    in_names.append(declare(event.inputs[slot], "intermediate"))
                    in_shapes.append(event.input_shapes[slot])
                else:
                    tensor_name, shape = produced[slot]
                    in_names.append(tensor_name)
                    in_shapes.append(shape)

            binding = _letter_binding(template.input_specs, in_shapes)
            out_shape = tuple(binding[c] for c in template.output_spec)

            if template.produces is None:
                out_name = declare(event.output, "intermediate")
                if out_shape != event.output_shape:
                    raise UnsupportedOperatorError(
                        f"'{event.op}' template output {out_shape} != traced {event.output_shape}"
                    )
            else:
                out_name = f"{node_id}_{template.produces}"
                tensors[out_name] = {
                    "name": out_name,
                    "shape": list(out_shape),
                    "dtype": event.output_dtype,
                    "role": "intermediate",
                }
                produced[template.produces] = (out_name, out_shape)

            node = {
                "id": node_id,
                "kind": template.kind,
                "inputs": in_names,
                "input_specs": list(template.input_specs),
                "output": out_name,
                "output_spec": template.output_spec,
            }
            if template.kind == "elementwise":
                node["elementwise_cost"] = template.elementwise_cost
            nodes.append(node)

    # Returned tensors become outputs; an identity return gets an explicit
    # zero-FLOP copy node so the output is produced.
    for i, tid in enumerate(output_ids):
        base = resolve(tid)
        out_name = "output" if len(output_ids) == 1 else f"output{i}"
        if base in entry_ids:
            spec = "".join(chr(ord("a") + d) for d in range(len(trace.shapes[base])))
            node_id = f"n{next(node_seq)}"
            tensors[out_name] = {
                "name": out_name,
                "shape": list(relabeled.get(base, trace.shapes[base])),
                "dtype": trace.dtypes[base],
                "role": "output",
            }
            nodes.append({
                "id": node_id,
                "kind": "permutation",
                "inputs": [name_of(base)],
                "input_specs": [spec],
                "output": out_name,
                "output_spec": spec,
            })
        else:
            current = names[base]
            tensors[current]["role"] = "output"
            if current.startswith("t") and len(output_ids) == 1:
                tensors[current]["name"] = out_name
                tensors[out_name] = tensors.pop(current)
                for node in nodes:
                    node["inputs"] = [out_name if n == current else n for n in node["inputs"]]
                    if node["output"] == current:
                        node["output"] = out_name
                names[base] = out_name

    return {
        "tensors": list(tensors.values()),
        "nodes": nodes,
        "metadata": metadata or {},
    }


def trace_and_export(
    program,
    example_inputs: Sequence[torch.Tensor],
    metadata: Optional[Dict[str, str]] = None,
) -> str:
    """Trace one forward pass and render the graph file text."""
    trace, input_ids, param_names, output_ids = trace_program(program, example_inputs)
    meta = dict(metadata or {})
    if "precision" not in meta:
        floating = {d for d in trace.dtypes.values() if d not in ("int32", "bool")}
        if len(floating) == 1:
            meta["precision"] = floating.pop()
    graph = export_trace(trace, input_ids, param_names, output_ids, metadata=meta)
    return json.dumps(graph, indent=2, ensure_ascii=False) + "\n"
