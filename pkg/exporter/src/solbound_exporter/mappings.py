"""Operator-to-einsum conversion templates and their numerical validation.

Each supported host operator maps to one or more einsum node templates
(index letters are node-scoped). ``validate_mapping`` replays a template on
random small inputs with a numpy emulator and compares against the live
operator, which is how new table entries earn their place.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib.resources import files
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

LETTERS = "abcdefghijklmnopqrstuvwxyz"


class UnsupportedOperatorError(Exception):
    """Operator missing from the mapping table (no agentic fallback here)."""


class MappingValidationError(Exception):
    """Template emulation diverged from the host operator."""


@dataclass(frozen=True)
class NodeTemplate:
    """One einsum node with node-scoped index letters.

    ``inputs`` refer to operand slots: non-negative ints index the original
    operator inputs, strings name intermediates produced by earlier templates
    in the same conversion.
    """

    kind: str
    inputs: Tuple[object, ...]
    input_specs: Tuple[str, ...]
    output_spec: str
    elementwise_cost: int = 0
    semantic: str = ""
    produces: Optional[str] = None  # intermediate name when not the final node


def load_table() -> Dict[str, dict]:
    text = files("solbound_exporter").joinpath("data/mapping_table.json").read_text(encoding="utf-8")
    table = json.loads(text)
    if table.get("version") != 1:
        raise UnsupportedOperatorError(f"unsupported mapping table version {table.get('version')!r}")
    return table["operators"]


TABLE = load_table()


def _fresh(n: int, used: str = "") -> str:
    out = []
    for ch in LETTERS:
        if len(out) == n:
            break
        if ch not in used:
            out.append(ch)
    return "".join(out)


def _broadcast_spec(
    shape: Tuple[int, ...], out_spec: str, out_shape: Tuple[int, ...], used: List[str]
) -> str:
    """Spec for a broadcast operand: trailing-aligned letters of the output.

    Broadcast size-1 dims keep their rank with a private letter (specs must
    cover every tensor dim); such letters bind extent 1 and never reach the
    output spec.
    """
    spec = []
    for offset in range(1, len(shape) + 1):
        if shape[-offset] == out_shape[-offset]:
            spec.append(out_spec[-offset])
        elif shape[-offset] == 1:
            fresh = _fresh(1, out_spec + "".join(used))
            used.append(fresh)
            spec.append(fresh)
        else:
            raise UnsupportedOperatorError(
                f"operand shape {shape} does not broadcast against {out_shape}"
            )
    return "".join(reversed(spec))


def convert(
    op: str,
    input_shapes: Sequence[Tuple[int, ...]],
    output_shape: Tuple[int, ...],
    dims: Optional[Sequence[int]] = None,
) -> List[NodeTemplate]:
    """Templates for one traced call; ``dims`` carries axis arguments."""
    entry = TABLE.get(op)
    if entry is None:
        raise UnsupportedOperatorError(f"operator '{op}' is not in the mapping table")
    kind = entry["kind"]

    if kind == "contraction":
        return _convert_contraction(op, entry, input_shapes, output_shape)
    if kind == "elementwise":
        return _convert_elementwise(entry, input_shapes, output_shape)
    if kind == "permutation":
        return _convert_permutation(op, input_shapes, output_shape, dims)
    if kind == "reduction":
        return _convert_reduction(input_shapes, output_shape, dims)
    if kind == "composite":
        return _convert_softmax(input_shapes, output_shape, dims)
    raise UnsupportedOperatorError(f"operator '{op}' has non-node kind '{kind}'")


def _convert_contraction(op, entry, input_shapes, output_shape) -> List[NodeTemplate]:
    if len(input_shapes) < 2:
        raise UnsupportedOperatorError(f"'{op}' needs two tensor operands")
    a, b = input_shapes[0], input_shapes[1]
    if op == "linear":
        # x[..., k] @ weight[h, k]^T (+ bias[h])
        batch = _fresh(len(a) - 1)
        k = _fresh(1, batch)
        h = _fresh(1, batch + k)
        nodes = [
            NodeTemplate(
                "contraction", (0, 1), (batch + k, h + k), batch + h,
                produces="lin" if len(input_shapes) > 2 else None,
            )
        ]
        if len(input_shapes) > 2:
            nodes.append(
                NodeTemplate(
                    "elementwise", ("lin", 2), (batch + h, h), batch + h,
                    elementwise_cost=entry.get("bias_cost", 1), semantic="add",
                )
            )
        return nodes
    # matmul family: [..., m, k] x [..., k, n] with matching batch dims
    if len(a) < 1 or len(b) < 1:
        raise UnsupportedOperatorError(f"'{op}' on scalars is not a contraction")
    if len(a) == 1 or len(b) == 1:
        raise UnsupportedOperatorError(f"'{op}' vector forms are not mapped")
    batch_rank = len(output_shape) - 2
    batch = _fresh(batch_rank)
    rest = _fresh(3, batch)
    m, k, n = rest[0], rest[1], rest[2]
    a_batch = batch[len(batch) - (len(a) - 2):] if len(a) > 2 else ""
    b_batch = batch[len(batch) - (len(b) - 2):] if len(b) > 2 else ""
    return [
        NodeTemplate(
            "contraction", (0, 1), (a_batch + m + k, b_batch + k + n), batch + m + n,
        )
    ]


def _convert_elementwise(entry, input_shapes, output_shape) -> List[NodeTemplate]:
    out_spec = _fresh(len(output_shape))
    slots = []
    specs = []
    used: List[str] = []
    for i, shape in enumerate(input_shapes):
        slots.append(i)
        specs.append(_broadcast_spec(shape, out_spec, output_shape, used))
    return [
        NodeTemplate(
            "elementwise", tuple(slots), tuple(specs), out_spec,
            elementwise_cost=entry.get("cost", 1), semantic=entry.get("semantic", ""),
        )
    ]


def _convert_permutation(op, input_shapes, output_shape, dims) -> List[NodeTemplate]:
    rank = len(input_shapes[0])
    in_spec = _fresh(rank)
    if op == "t":
        if rank != 2:
            raise UnsupportedOperatorError("'t' applies to rank-2 tensors")
        order = (1, 0)
    elif op == "transpose":
        if dims is None or len(dims) != 2:
            raise UnsupportedOperatorError("'transpose' needs two axis arguments")
        order = list(range(rank))
        i, j = (d % rank for d in dims)
        order[i], order[j] = order[j], order[i]
    else:  # permute
        if dims is None or len(dims) != rank:
            raise UnsupportedOperatorError("'permute' needs a full axis order")
        order = [d % rank for d in dims]
    out_spec = "".join(in_spec[i] for i in order)
    return [NodeTemplate("permutation", (0,), (in_spec,), out_spec)]


def _convert_reduction(input_shapes, output_shape, dims) -> List[NodeTemplate]:
    rank = len(input_shapes[0])
    in_spec = _fresh(rank)
    if dims is None:
        reduced = set(range(rank))
    else:
        reduced = {d % rank for d in dims}
    if not reduced:
        raise UnsupportedOperatorError("reduction must drop at least one axis")
    out_spec = "".join(c for i, c in enumerate(in_spec) if i not in reduced)
    return [NodeTemplate("reduction", (0,), (in_spec,), out_spec)]


def _convert_softmax(input_shapes, output_shape, dims) -> List[NodeTemplate]:
    rank = len(input_shapes[0])
    spec = _fresh(rank)
    dim = (dims[0] if dims else -1) % rank
    reduced_spec = "".join(c for i, c in enumerate(spec) if i != dim)
    return [
        NodeTemplate("elementwise", (0,), (spec,), spec, 4, "exp", produces="expd"),
        NodeTemplate("reduction", ("expd",), (spec,), reduced_spec, produces="norm"),
        NodeTemplate("elementwise", ("expd", "norm"), (spec, reduced_spec), spec, 4, "div"),
    ]


# ---------------------------------------------------------------------------
# Numerical validation of templates against the host operators

_SEMANTIC_FNS = {
    "add": lambda xs: xs[0] + xs[1],
    "sub": lambda xs: xs[0] - xs[1],
    "mul": lambda xs: xs[0] * xs[1],
    "div": lambda xs: xs[0] / xs[1],
    "relu": lambda xs: np.maximum(xs[0], 0.0),
    "abs": lambda xs: np.abs(xs[0]),
    "neg": lambda xs: -xs[0],
    "exp": lambda xs: np.exp(xs[0]),
    "sqrt": lambda xs: np.sqrt(xs[0]),
    "rsqrt": lambda xs: 1.0 / np.sqrt(xs[0]),
    "tanh": lambda xs: np.tanh(xs[0]),
    "sigmoid": lambda xs: 1.0 / (1.0 + np.exp(-xs[0])),
    "gelu": lambda xs: 0.5 * xs[0] * (1.0 + _erf(xs[0] / math.sqrt(2.0))),
    "silu": lambda xs: xs[0] / (1.0 + np.exp(-xs[0])),
}


def _erf(x):
    from numpy import vectorize

    return vectorize(math.erf)(x)


def _align(arr: np.ndarray, spec: str, out_spec: str) -> np.ndarray:
    """Expand an operand to the output index space by spec letters."""
    # private broadcast letters first: size-1 axes outside the output space
    for i in reversed(range(len(spec))):
        if spec[i] not in out_spec:
            if arr.shape[i] != 1:
                raise MappingValidationError(f"index '{spec[i]}' is neither output nor size-1")
            arr = np.squeeze(arr, axis=i)
            spec = spec[:i] + spec[i + 1:]
    for i, letter in enumerate(out_spec):
        if letter not in spec:
            arr = np.expand_dims(arr, i)
            spec = spec[:i] + letter + spec[i:]
    order = [spec.index(letter) for letter in out_spec]
    return np.transpose(arr, order)


def emulate(templates: Sequence[NodeTemplate], inputs: Sequence[np.ndarray]) -> np.ndarray:
    """Evaluate a conversion template numerically."""
    env: Dict[object, np.ndarray] = {i: np.asarray(x, dtype=np.float64) for i, x in enumerate(inputs)}
    result = None
    for node in templates:
        operands = [env[slot] for slot in node.inputs]
        if node.kind == "contraction":
            result = np.einsum(f"{','.join(node.input_specs)}->{node.output_spec}", *operands)
        elif node.kind == "permutation":
            result = _align(operands[0], node.input_specs[0], node.output_spec)
        elif node.kind == "reduction":
            spec = node.input_specs[0]
            axes = tuple(i for i, c in enumerate(spec) if c not in node.output_spec)
            kept = [c for c in spec if c in node.output_spec]
            result = np.sum(operands[0], axis=axes)
            result = _align(result, "".join(kept), node.output_spec)
        elif node.kind == "elementwise":
            aligned = [
                _align(op_arr, spec, node.output_spec)
                for op_arr, spec in zip(operands, node.input_specs)
            ]
            shapes = [a.shape for a in aligned]
            target = tuple(max(s[i] for s in shapes) for i in range(len(node.output_spec)))
            aligned = [np.broadcast_to(a, target) for a in aligned]
            result = _SEMANTIC_FNS[node.semantic](aligned)
        else:
            raise MappingValidationError(f"cannot emulate node kind '{node.kind}'")
        if node.produces is not None:
            env[node.produces] = result
    return result


def _host_call(op: str, tensors, dims):
    import torch
    import torch.nn.functional as F

    if op == "linear":
        return F.linear(*tensors)
    if op == "softmax":
        return F.softmax(tensors[0], dim=dims[0] if dims else -1)
    if op == "t":
        return tensors[0].t()
    if op == "transpose":
        return torch.transpose(tensors[0], *dims)
    if op == "permute":
        return tensors[0].permute(*dims)
    if op == "sum":
        return torch.sum(tensors[0], dim=list(dims)) if dims else torch.sum(tensors[0])
    fn = getattr(torch, op, None) or getattr(F, op)
    return fn(*tensors)


def validate_mapping(
    op: str,
    shape_samples: Sequence[Sequence[Tuple[int, ...]]],
    dims: Optional[Sequence[int]] = None,
    rtol: float = 1e-5,
    seed: int = 0,
    templates_override: Optional[List[NodeTemplate]] = None,
) -> None:
    """Emulate the operator's template and compare with the live operator.

    Raises MappingValidationError naming the first diverging shape sample.
    ``templates_override`` exists for negative-control tests.
    """
    import torch

    rng = np.random.default_rng(seed)
    for shapes in shape_samples:
        arrays = [rng.standard_normal(shape) for shape in shapes]
        if op == "sqrt" or op == "rsqrt":
            arrays = [np.abs(a) + 0.5 for a in arrays]
        tensors = [torch.as_tensor(a, dtype=torch.float32) for a in arrays]
        expected = _host_call(op, tensors, dims).to(torch.float64).numpy()
        templates = templates_override
        if templates is None:
            templates = convert(op, [tuple(s) for s in shapes], tuple(expected.shape), dims=dims)
        try:
            got = emulate(templates, [t.to(torch.float64).numpy() for t in tensors])
        except (MappingValidationError, ValueError) as exc:
            raise MappingValidationError(
                f"'{op}' template fails to evaluate on shapes {list(shapes)}: {exc}"
            ) from None
        if got.shape != expected.shape or not np.allclose(got, expected, rtol=rtol, atol=1e-6):
            raise MappingValidationError(f"'{op}' template diverges on shapes {list(shapes)}")
