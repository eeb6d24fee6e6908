"""Extended-einsum graph IR: element types, tensors, nodes, validation.

The IR is the unit every analysis consumes: a dataflow graph of einsum-style
nodes over shaped, typed tensors. Values are immutable after construction and
safe to share across concurrent analyses.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .errors import SpecParseError, GraphCycleError, UnsupportedElementTypeError

LETTER_POOL = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


class Role(str, Enum):
    INPUT = "input"
    WEIGHT = "weight"
    INTERMEDIATE = "intermediate"
    OUTPUT = "output"


class NodeKind(str, Enum):
    CONTRACTION = "contraction"
    ELEMENTWISE = "elementwise"
    REDUCTION = "reduction"
    PERMUTATION = "permutation"


@dataclass(frozen=True)
class ScaleBlock:
    """Per-block scale factor layout for block-scaled low-precision formats."""

    block_size: int
    scale_bits: int


@dataclass(frozen=True)
class ElementType:
    """A tensor element format. ``bits_per_element`` is None only for mixed.

    ``scale_block`` is carried only by block-scaled formats (fp8, nvfp4) and
    contributes bytes only when scale overhead accounting is switched on.
    """

    name: str
    bits_per_element: Optional[int]
    scale_block: Optional[ScaleBlock] = None

    def __post_init__(self):
        if self.scale_block is not None and self.name not in ("fp8", "nvfp4"):
            raise ValueError(f"dtype '{self.name}' does not carry block scaling")


FP32 = ElementType("fp32", 32)
FP16 = ElementType("fp16", 16)
BF16 = ElementType("bf16", 16)
FP8 = ElementType("fp8", 8, ScaleBlock(128, 8))
NVFP4 = ElementType("nvfp4", 4, ScaleBlock(16, 8))
INT32 = ElementType("int32", 32)
BOOL = ElementType("bool", 8)
MIXED = ElementType("mixed", None)

ELEMENT_TYPES: Dict[str, ElementType] = {
    t.name: t for t in (FP32, FP16, BF16, FP8, NVFP4, INT32, BOOL, MIXED)
}


def element_type(name: str) -> ElementType:
    try:
        return ELEMENT_TYPES[name]
    except KeyError:
        raise SpecParseError(f"unknown dtype '{name}'", detail="dtype") from None


@dataclass(frozen=True)
class TensorDecl:
    name: str
    shape: Tuple[int, ...]
    dtype: ElementType
    role: Role

    @property
    def numel(self) -> int:
        return math.prod(self.shape)


@dataclass(frozen=True)
class EinsumNode:
    """One einsum-style operation.

    ``input_specs``/``output_spec`` are strings of single-letter indices; the
    letter at position i binds to extent i of the corresponding tensor shape.
    ``elementwise_cost`` is FLOPs per output element and is meaningful only
    for elementwise nodes (0 for every other kind).
    """

    id: str
    kind: NodeKind
    inputs: Tuple[str, ...]
    input_specs: Tuple[str, ...]
    output: str
    output_spec: str
    elementwise_cost: int = 0


@dataclass(frozen=True)
class EinsumGraph:
    tensors: Dict[str, TensorDecl]
    nodes: Tuple[EinsumNode, ...]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def node(self, node_id: str) -> EinsumNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True)
class Defect:
    """A structural validation failure; data, not an exception."""

    subject: str
    rule: str
    message: str


def _bind_letters(node: EinsumNode, graph: EinsumGraph) -> Tuple[Dict[str, int], List[Defect]]:
    """Map each index letter of ``node`` to its extent; collect conflicts."""
    binding: Dict[str, int] = {}
    defects: List[Defect] = []
    pairs = list(zip(node.input_specs, node.inputs)) + [(node.output_spec, node.output)]
    for spec, tensor_name in pairs:
        decl = graph.tensors.get(tensor_name)
        if decl is None:
            defects.append(Defect(node.id, "unknown tensor", f"node references undeclared tensor '{tensor_name}'"))
            continue
        if len(spec) != len(decl.shape):
            defects.append(
                Defect(
                    node.id,
                    "rank mismatch",
                    f"spec '{spec}' has {len(spec)} indices but tensor '{tensor_name}' has rank {len(decl.shape)}",
                )
            )
            continue
        for letter, extent in zip(spec, decl.shape):
            bound = binding.get(letter)
            if bound is None:
                binding[letter] = extent
            elif bound != extent:
                defects.append(
                    Defect(
                        node.id,
                        "inconsistent extent",
                        f"index '{letter}' bound to {bound} and {extent} within one node",
                    )
                )
    return binding, defects


def validate_graph(graph: EinsumGraph) -> List[Defect]:
    """Check every structural invariant; an empty list means the graph is ok."""
    defects: List[Defect] = []

    for name, decl in graph.tensors.items():
        if not name:
            defects.append(Defect(repr(name), "empty name", "tensor name must be non-empty"))
        if name != decl.name:
            defects.append(Defect(name, "name mismatch", f"declared as '{decl.name}'"))
        if any(e <= 0 for e in decl.shape):
            defects.append(Defect(name, "non-positive extent", f"shape {decl.shape}"))

    seen_ids = set()
    producers: Dict[str, List[str]] = {}
    consumers: Dict[str, List[str]] = {}
    for node in graph.nodes:
        if node.id in seen_ids:
            defects.append(Defect(node.id, "duplicate id", "node id reused"))
        seen_ids.add(node.id)
        producers.setdefault(node.output, []).append(node.id)
        for t in node.inputs:
            consumers.setdefault(t, []).append(node.id)

        in_letters = set("".join(node.input_specs))
        out_letters = set(node.output_spec)
        if len(node.inputs) != len(node.input_specs):
            defects.append(Defect(node.id, "spec arity", "one index spec required per input"))
        missing = out_letters - in_letters
        if missing:
            defects.append(
                Defect(node.id, "unbound output index", f"output indices {sorted(missing)} appear in no input spec")
            )

        if node.kind is NodeKind.CONTRACTION:
            if len(node.inputs) < 2:
                defects.append(Defect(node.id, "contraction arity", "contraction requires >= 2 inputs"))
            if not (in_letters - out_letters):
                defects.append(Defect(node.id, "no contracted index", "contraction must drop >= 1 index"))
        elif node.kind is NodeKind.PERMUTATION:
            if len(node.inputs) != 1:
                defects.append(Defect(node.id, "permutation arity", "permutation takes exactly 1 input"))
            elif sorted(node.input_specs[0]) != sorted(node.output_spec):
                defects.append(Defect(node.id, "index multiset", "permutation must keep the index multiset"))
        elif node.kind is NodeKind.REDUCTION:
            if len(node.inputs) != 1:
                defects.append(Defect(node.id, "reduction arity", "reduction takes exactly 1 input"))
            elif not (out_letters < set(node.input_specs[0])):
                defects.append(Defect(node.id, "not a reduction", "output indices must be a strict subset of input indices"))
        if node.kind is not NodeKind.ELEMENTWISE and node.elementwise_cost != 0:
            defects.append(Defect(node.id, "spurious cost", "elementwise_cost applies to elementwise nodes only"))
        if node.elementwise_cost < 0:
            defects.append(Defect(node.id, "negative cost", "elementwise_cost must be >= 0"))

        _, binding_defects = _bind_letters(node, graph)
        defects.extend(binding_defects)

    for name, decl in graph.tensors.items():
        made_by = producers.get(name, [])
        if decl.role in (Role.INTERMEDIATE, Role.OUTPUT):
            if len(made_by) != 1:
                defects.append(
                    Defect(name, "producer count", f"{decl.role.value} tensor needs exactly one producer, has {len(made_by)}")
                )
        elif made_by:
            defects.append(Defect(name, "unexpected producer", f"{decl.role.value} tensor is produced by {made_by}"))
        if decl.role is Role.INTERMEDIATE and not consumers.get(name):
            defects.append(Defect(name, "dangling intermediate", "intermediate tensor is never consumed"))

    try:
        _kahn_order(graph)
    except GraphCycleError:
        defects.append(Defect("graph", "cycle", "dataflow contains a dependency cycle"))

    return defects


def _kahn_order(graph: EinsumGraph) -> List[str]:
    producer_of: Dict[str, str] = {n.output: n.id for n in graph.nodes}
    deps: Dict[str, set] = {n.id: set() for n in graph.nodes}
    dependents: Dict[str, set] = {n.id: set() for n in graph.nodes}
    for node in graph.nodes:
        for t in node.inputs:
            p = producer_of.get(t)
            if p is not None and p != node.id:
                deps[node.id].add(p)
                dependents[p].add(node.id)

    ready = [nid for nid, d in deps.items() if not d]
    heapq.heapify(ready)
    order: List[str] = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for succ in sorted(dependents[nid]):
            deps[succ].discard(nid)
            if not deps[succ]:
                heapq.heappush(ready, succ)
    if len(order) != len(graph.nodes):
        raise GraphCycleError("graph contains a dataflow cycle; run validate_graph for details")
    return order


def topological_order(graph: EinsumGraph) -> List[str]:
    """Producer-before-consumer node ids, ties broken by ascending id."""
    return _kahn_order(graph)


def tensor_bytes(decl: TensorDecl, include_scale_overhead: bool = False) -> int:
    """External-memory footprint of one tensor, rounded up to whole bytes.

    Sub-byte payloads round up per tensor (tensors are separately allocated);
    block-scale factors are added only when ``include_scale_overhead`` is set.
    """
    dtype = decl.dtype
    if dtype.bits_per_element is None:
        raise UnsupportedElementTypeError(
            f"tensor '{decl.name}': dtype '{dtype.name}' carries no element width; byte accounting is undefined"
        )
    total = -(-decl.numel * dtype.bits_per_element // 8)
    if include_scale_overhead and dtype.scale_block is not None:
        blocks = -(-decl.numel // dtype.scale_block.block_size)
        total += -(-blocks * dtype.scale_block.scale_bits // 8)
    return total


# ---------------------------------------------------------------------------
# Graph file format (UTF-8 JSON)

def _spec_to_letters(spec: Union[str, Sequence[str]], names_to_letters: Dict[str, str]) -> str:
    """Accept a compact letter string or a list of axis names."""
    if isinstance(spec, str):
        return spec
    letters = []
    for name in spec:
        if name not in names_to_letters:
            used = set(names_to_letters.values())
            for candidate in LETTER_POOL:
                if candidate not in used:
                    names_to_letters[name] = candidate
                    break
            else:
                raise SpecParseError("index space exceeds the 52-letter pool", detail="input_specs")
        letters.append(names_to_letters[name])
    return "".join(letters)


def graph_from_obj(obj: Dict[str, Any]) -> EinsumGraph:
    if not isinstance(obj, dict):
        raise SpecParseError("graph document must be a JSON object")
    for key in ("tensors", "nodes"):
        if key not in obj:
            raise SpecParseError(f"missing required field '{key}'", detail=key)

    tensors: Dict[str, TensorDecl] = {}
    for i, t in enumerate(obj["tensors"]):
        where = f"tensors[{i}]"
        try:
            shape = tuple(int(e) for e in t["shape"])
            decl = TensorDecl(str(t["name"]), shape, element_type(str(t["dtype"])), Role(t["role"]))
        except KeyError as exc:
            raise SpecParseError(f"missing field {exc} in tensor declaration", detail=where) from None
        except ValueError as exc:
            raise SpecParseError(str(exc), detail=where) from None
        if decl.name in tensors:
            raise SpecParseError(f"duplicate tensor '{decl.name}'", detail=where)
        tensors[decl.name] = decl

    names_to_letters: Dict[str, str] = {}
    # Reserve letters literally used by any string-form spec first.
    for n in obj["nodes"]:
        for spec in list(n.get("input_specs", [])) + [n.get("output_spec", "")]:
            if isinstance(spec, str):
                for ch in spec:
                    names_to_letters.setdefault(ch, ch)

    nodes: List[EinsumNode] = []
    for i, n in enumerate(obj["nodes"]):
        where = f"nodes[{i}]"
        try:
            kind = NodeKind(n["kind"])
            specs = tuple(_spec_to_letters(s, names_to_letters) for s in n["input_specs"])
            out_spec = _spec_to_letters(n["output_spec"], names_to_letters)
            cost = int(n.get("elementwise_cost", 1 if kind is NodeKind.ELEMENTWISE else 0))
            nodes.append(
                EinsumNode(
                    id=str(n["id"]),
                    kind=kind,
                    inputs=tuple(str(x) for x in n["inputs"]),
                    input_specs=specs,
                    output=str(n["output"]),
                    output_spec=out_spec,
                    elementwise_cost=cost,
                )
            )
        except KeyError as exc:
            raise SpecParseError(f"missing field {exc} in node", detail=where) from None
        except ValueError as exc:
            raise SpecParseError(str(exc), detail=where) from None

    metadata = obj.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SpecParseError("metadata must be an object", detail="metadata")
    return EinsumGraph(tensors=tensors, nodes=tuple(nodes), metadata=dict(metadata))


def load_graph(text: str) -> EinsumGraph:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError("invalid JSON", detail=f"line {exc.lineno} column {exc.colno}") from None
    return graph_from_obj(obj)


def graph_to_obj(graph: EinsumGraph) -> Dict[str, Any]:
    return {
        "tensors": [
            {"name": t.name, "shape": list(t.shape), "dtype": t.dtype.name, "role": t.role.value}
            for t in graph.tensors.values()
        ],
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind.value,
                "inputs": list(n.inputs),
                "input_specs": list(n.input_specs),
                "output": n.output,
                "output_spec": n.output_spec,
                **({"elementwise_cost": n.elementwise_cost} if n.kind is NodeKind.ELEMENTWISE else {}),
            }
            for n in graph.nodes
        ],
        "metadata": graph.metadata,
    }


def dump_graph(graph: EinsumGraph) -> str:
    return json.dumps(graph_to_obj(graph), indent=2, ensure_ascii=False) + "\n"
