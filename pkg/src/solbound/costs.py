"""FLOP counts and fusion-aware external memory traffic for einsum graphs.

Conventions (reproduced against the worked projection+residual example):
  * a k-input contraction costs k FLOPs per point of its full index space —
    (k-1) multiplies plus 1 accumulate, so k=2 gives the standard 2 FLOPs
    per multiply-accumulate;
  * an elementwise node costs ``elementwise_cost`` FLOPs per output element;
  * a reduction costs one accumulate per reduced input element;
  * permutations are pure data movement and cost nothing.

The whole graph is treated as a single fused region: intermediates never hit
external memory, and weights can be excluded from the bandwidth term to model
prefetch overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

from .errors import InconsistentBindingError, IntensityUndefinedError, UnsupportedElementTypeError
from .ir import EinsumGraph, EinsumNode, NodeKind, Role, tensor_bytes, topological_order

# FLOPs per element for common elementwise ops; loaders fall back to 1 and
# nodes may override. Shipped as data so transcendental costs stay a policy.
ELEMENTWISE_FLOP_COSTS: Dict[str, int] = {
    "add": 1,
    "sub": 1,
    "mul": 1,
    "relu": 1,
    "abs": 1,
    "neg": 1,
    "exp": 4,
    "div": 4,
    "sqrt": 4,
    "rsqrt": 4,
    "tanh": 4,
    "sigmoid": 4,
    "gelu": 4,
    "silu": 4,
}
DEFAULT_ELEMENTWISE_COST = 1


@dataclass(frozen=True)
class CostBreakdown:
    per_node_flops: Dict[str, int] = field(default_factory=dict)
    total_flops: int = 0
    external_bytes: int = 0
    intermediate_bytes: int = 0
    prefetch_excluded_bytes: int = 0


def _node_binding(node: EinsumNode, graph: EinsumGraph) -> Dict[str, int]:
    binding: Dict[str, int] = {}
    pairs = list(zip(node.input_specs, node.inputs)) + [(node.output_spec, node.output)]
    for spec, tensor_name in pairs:
        decl = graph.tensors.get(tensor_name)
        if decl is None or len(spec) != len(decl.shape):
            raise InconsistentBindingError(f"node '{node.id}': spec '{spec}' does not bind tensor '{tensor_name}'")
        for letter, extent in zip(spec, decl.shape):
            bound = binding.setdefault(letter, extent)
            if bound != extent:
                raise InconsistentBindingError(
                    f"node '{node.id}': index '{letter}' bound to both {bound} and {extent}"
                )
    return binding


def node_flops(node: EinsumNode, graph: EinsumGraph) -> int:
    """Exact integer FLOP count of one node."""
    binding = _node_binding(node, graph)
    if node.kind is NodeKind.PERMUTATION:
        return 0
    if node.kind is NodeKind.CONTRACTION:
        iteration_points = math.prod(binding.values())
        return len(node.inputs) * iteration_points
    if node.kind is NodeKind.REDUCTION:
        return graph.tensors[node.inputs[0]].numel
    # elementwise
    return node.elementwise_cost * graph.tensors[node.output].numel


def graph_flops(graph: EinsumGraph) -> CostBreakdown:
    """Sum node FLOPs over topological order with exact integer arithmetic."""
    per_node: Dict[str, int] = {}
    for node_id in topological_order(graph):
        node = graph.node(node_id)
        per_node[node_id] = node_flops(node, graph)
    return CostBreakdown(per_node_flops=per_node, total_flops=sum(per_node.values()))


def fused_bytes(
    graph: EinsumGraph,
    prefetch_weights: bool = True,
    scale_overhead: bool = False,
) -> CostBreakdown:
    """External traffic assuming whole-graph fusion.

    Inputs and outputs always hit external memory; weights count only when
    prefetch modeling is off (otherwise they are tallied separately in
    ``prefetch_excluded_bytes``). Intermediates stay on chip and are reported
    but never added to ``external_bytes``.
    """
    external = 0
    intermediate = 0
    excluded = 0
    for decl in graph.tensors.values():
        if decl.role is Role.INTERMEDIATE:
            if decl.dtype.bits_per_element is not None:
                intermediate += tensor_bytes(decl, scale_overhead)
            continue
        if decl.dtype.bits_per_element is None:
            raise UnsupportedElementTypeError(
                f"tensor '{decl.name}' has dtype '{decl.dtype.name}'; external byte accounting is undefined"
            )
        nbytes = tensor_bytes(decl, scale_overhead)
        if decl.role is Role.WEIGHT and prefetch_weights:
            excluded += nbytes
        else:
            external += nbytes
    return CostBreakdown(
        external_bytes=external,
        intermediate_bytes=intermediate,
        prefetch_excluded_bytes=excluded,
    )


def graph_cost(
    graph: EinsumGraph,
    prefetch_weights: bool = True,
    scale_overhead: bool = False,
) -> CostBreakdown:
    """FLOP and byte accounting in one breakdown."""
    flops = graph_flops(graph)
    traffic = fused_bytes(graph, prefetch_weights=prefetch_weights, scale_overhead=scale_overhead)
    return CostBreakdown(
        per_node_flops=flops.per_node_flops,
        total_flops=flops.total_flops,
        external_bytes=traffic.external_bytes,
        intermediate_bytes=traffic.intermediate_bytes,
        prefetch_excluded_bytes=traffic.prefetch_excluded_bytes,
    )


def arithmetic_intensity(flops: int, nbytes: int) -> float:
    if nbytes <= 0:
        raise IntensityUndefinedError(
            "zero external bytes: report 'unbounded intensity' instead of a ratio"
        )
    return flops / nbytes
