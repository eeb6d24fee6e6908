"""Forward-pass tracing of torch programs on the meta device.

A TorchFunctionMode hook records every public tensor operation during one
forward pass, so the exact eager execution path is captured without running
any arithmetic (meta tensors carry shape and dtype only). Tracing is
process-global state; run concurrent exports in separate processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import torch
from torch.overrides import TorchFunctionMode

from .mappings import TABLE, UnsupportedOperatorError

TORCH_DTYPES = {
    torch.float32: "fp32",
    torch.float16: "fp16",
    torch.bfloat16: "bf16",
    torch.float8_e4m3fn: "fp8",
    torch.int32: "int32",
    torch.bool: "bool",
}
GRAPH_DTYPES = {v: k for k, v in TORCH_DTYPES.items()}

# Interceptions that never describe computation.
_IGNORED_OPS = {
    "__get__", "__set__", "__repr__", "__format__", "size", "dim", "numel",
    "is_floating_point", "stride", "__getitem__", "to", "type_as", "cpu",
    "_has_compatible_shallow_copy_type", "requires_grad_",
}

_METHOD_ALIASES = {
    "__add__": "add", "__radd__": "add", "__iadd__": "add",
    "__sub__": "sub", "__mul__": "mul", "__rmul__": "mul",
    "__truediv__": "div", "__matmul__": "matmul",
    "__neg__": "neg",
}


@dataclass
class TraceEvent:
    op: str
    inputs: Tuple[int, ...]  # tensor ids
    input_shapes: Tuple[Tuple[int, ...], ...]
    output: int
    output_shape: Tuple[int, ...]
    output_dtype: str
    dims: Optional[Tuple[int, ...]] = None


@dataclass
class Trace:
    events: List[TraceEvent] = field(default_factory=list)
    shapes: Dict[int, Tuple[int, ...]] = field(default_factory=dict)
    dtypes: Dict[int, str] = field(default_factory=dict)
    keepalive: List[torch.Tensor] = field(default_factory=list)

    def register(self, tensor: torch.Tensor) -> int:
        key = id(tensor)
        if key not in self.shapes:
            if tensor.dtype not in TORCH_DTYPES:
                raise UnsupportedOperatorError(f"tensor dtype {tensor.dtype} has no graph encoding")
            self.shapes[key] = tuple(tensor.shape)
            self.dtypes[key] = TORCH_DTYPES[tensor.dtype]
            self.keepalive.append(tensor)  # pin ids for the trace lifetime
        return key


def _extract_dims(op: str, args) -> Optional[Tuple[int, ...]]:
    ints = tuple(a for a in args if isinstance(a, int))
    if op in ("transpose", "permute"):
        return ints if ints else None
    if op in ("sum", "softmax"):
        for a in args:
            if isinstance(a, int):
                return (a,)
            if isinstance(a, (tuple, list)) and a and all(isinstance(x, int) for x in a):
                return tuple(a)
        return None
    return None


class _TracerMode(TorchFunctionMode):
    def __init__(self, trace: Trace):
        super().__init__()
        self.trace = trace

    def __torch_function__(self, func, types, args=(), kwargs=None):
        kwargs = kwargs or {}
        out = func(*args, **kwargs)
        name = getattr(func, "__name__", "")
        name = _METHOD_ALIASES.get(name, name)
        if name in _IGNORED_OPS or not isinstance(out, torch.Tensor):
            return out
        tensor_args = [a for a in list(args) + list(kwargs.values()) if isinstance(a, torch.Tensor)]
        if not tensor_args:
            return out  # factory call
        input_ids = tuple(self.trace.register(t) for t in tensor_args)
        dim_args = _extract_dims(name, list(args) + list(kwargs.values()))
        entry = TABLE.get(name)
        if entry is None:
            raise UnsupportedOperatorError(
                f"operator '{name}' is not in the mapping table; extend the table to trace it"
            )
        if entry["kind"] == "alias":
            # pure view/copy: the output is the input as far as dataflow goes
            self.trace.shapes[id(out)] = tuple(out.shape)
            self.trace.dtypes[id(out)] = TORCH_DTYPES[out.dtype]
            self.trace.keepalive.append(out)
            self.trace.events.append(
                TraceEvent(
                    op="alias", inputs=input_ids[:1],
                    input_shapes=(tuple(tensor_args[0].shape),),
                    output=id(out), output_shape=tuple(out.shape),
                    output_dtype=TORCH_DTYPES[out.dtype],
                )
            )
            return out
        output_id = self.trace.register(out)
        self.trace.events.append(
            TraceEvent(
                op=name,
                inputs=input_ids,
                input_shapes=tuple(tuple(t.shape) for t in tensor_args),
                output=output_id,
                output_shape=tuple(out.shape),
                output_dtype=TORCH_DTYPES[out.dtype],
                dims=dim_args,
            )
        )
        return out


def trace_program(
    program,
    example_inputs: Sequence[torch.Tensor],
) -> Tuple[Trace, List[int], Dict[int, str], List[int]]:
    """Run one forward pass under the tracer.

    Returns the trace, input tensor ids, parameter id -> name, and output
    tensor ids. The program is an nn.Module or a plain callable over tensors.
    """
    trace = Trace()
    input_ids = [trace.register(t) for t in example_inputs]
    param_names: Dict[int, str] = {}
    if isinstance(program, torch.nn.Module):
        for name, param in program.named_parameters():
            param_names[trace.register(param)] = name.replace(".", "_")

    with _TracerMode(trace):
        result = program(*example_inputs)

    if isinstance(result, torch.Tensor):
        outputs = [trace.register(result)]
    elif isinstance(result, (tuple, list)) and all(isinstance(t, torch.Tensor) for t in result):
        outputs = [trace.register(t) for t in result]
    else:
        raise UnsupportedOperatorError("program must return a tensor or a tuple of tensors")
    return trace, input_ids, param_names, outputs
