"""Roofline bounds: cost breakdown + hardware spec -> SOL time and bottleneck.

The bound is max(compute time, memory time) with peak compute scaled linearly
to the locked clock. DRAM bandwidth is deliberately not clock-scaled: locking
applies to SM clocks, not the memory clock. An optional tightening replaces
the memory term with a classical contraction I/O lower bound, max(compulsory
footprint, 2*m*n*k/sqrt(buffer_words)) words — a documented proxy for full
buffer-capacity modeling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from .costs import CostBreakdown
from .errors import (
    DegenerateWorkloadError,
    MisconfigurationError,
    SpecParseError,
    UnknownPrecisionError,
)
from .ir import EinsumGraph, NodeKind, element_type

BALANCED_EPSILON = 1e-9  # relative tie threshold for the bottleneck class


class Bottleneck(str, Enum):
    COMPUTE = "compute"
    MEMORY = "memory"
    BALANCED = "balanced"


@dataclass(frozen=True)
class HardwareSpec:
    name: str
    reference_clock_mhz: float
    locked_clock_mhz: float
    peak_flops_by_dtype: Dict[str, float]
    dram_bandwidth_bytes_per_s: float
    dram_capacity_bytes: int
    on_chip_buffer_bytes: int
    provenance: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SolReport:
    flops: int
    external_bytes: int
    intensity: Optional[float]  # None when external_bytes == 0 (unbounded)
    compute_time_s: float
    memory_time_s: float
    sol_time_s: float
    bottleneck: Bottleneck
    dtype_used: str
    memory_bound_term: str = "external"  # or "io_lower_bound"
    traffic_lower_bound_bytes: Optional[int] = None


_HW_FIELDS = (
    "name",
    "reference_clock_mhz",
    "locked_clock_mhz",
    "peak_flops_by_dtype",
    "dram_bandwidth_bytes_per_s",
    "dram_capacity_bytes",
    "on_chip_buffer_bytes",
)


def hardware_from_obj(obj: Dict[str, Any]) -> HardwareSpec:
    for key in _HW_FIELDS:
        if key not in obj:
            raise SpecParseError(f"hardware spec missing required field '{key}'", detail=key)
    spec = HardwareSpec(
        name=str(obj["name"]),
        reference_clock_mhz=float(obj["reference_clock_mhz"]),
        locked_clock_mhz=float(obj["locked_clock_mhz"]),
        peak_flops_by_dtype={str(k): float(v) for k, v in obj["peak_flops_by_dtype"].items()},
        dram_bandwidth_bytes_per_s=float(obj["dram_bandwidth_bytes_per_s"]),
        dram_capacity_bytes=int(obj["dram_capacity_bytes"]),
        on_chip_buffer_bytes=int(obj["on_chip_buffer_bytes"]),
        provenance=dict(obj.get("provenance", {})),
    )
    if spec.reference_clock_mhz <= 0 or spec.locked_clock_mhz <= 0:
        raise SpecParseError("clock frequencies must be positive", detail="locked_clock_mhz")
    if spec.dram_bandwidth_bytes_per_s <= 0:
        raise SpecParseError("bandwidth must be positive", detail="dram_bandwidth_bytes_per_s")
    if any(v <= 0 for v in spec.peak_flops_by_dtype.values()):
        raise SpecParseError("peak throughputs must be positive", detail="peak_flops_by_dtype")
    return spec


def load_hardware_spec(text: str) -> HardwareSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError("invalid JSON in hardware spec", detail=f"line {exc.lineno} column {exc.colno}") from None
    return hardware_from_obj(obj)


def scale_peak(spec: HardwareSpec, dtype: str) -> float:
    """Peak FLOP/s at the locked clock (linear scaling from reference)."""
    try:
        peak = spec.peak_flops_by_dtype[dtype]
    except KeyError:
        raise UnknownPrecisionError(
            f"hardware spec '{spec.name}' has no peak entry for dtype '{dtype}'"
        ) from None
    return peak * spec.locked_clock_mhz / spec.reference_clock_mhz


def _classify(compute_time: float, memory_time: float, sol: float) -> Bottleneck:
    if abs(compute_time - memory_time) <= BALANCED_EPSILON * sol:
        return Bottleneck.BALANCED
    return Bottleneck.COMPUTE if compute_time > memory_time else Bottleneck.MEMORY


def sol_time(cost: CostBreakdown, spec: HardwareSpec, dtype: str) -> SolReport:
    if cost.total_flops == 0 and cost.external_bytes == 0:
        raise DegenerateWorkloadError("workload has zero FLOPs and zero bytes; no bound exists")
    peak = scale_peak(spec, dtype)
    compute_time = cost.total_flops / peak
    memory_time = cost.external_bytes / spec.dram_bandwidth_bytes_per_s
    sol = max(compute_time, memory_time)
    return SolReport(
        flops=cost.total_flops,
        external_bytes=cost.external_bytes,
        intensity=(cost.total_flops / cost.external_bytes) if cost.external_bytes > 0 else None,
        compute_time_s=compute_time,
        memory_time_s=memory_time,
        sol_time_s=sol,
        bottleneck=_classify(compute_time, memory_time, sol),
        dtype_used=dtype,
    )


def contraction_traffic_lower_bound(
    m: int, n: int, k: int, buffer_words: int, bytes_per_word: float
) -> float:
    """Classical GEMM external-traffic bound in bytes.

    max(compulsory footprint m*k + k*n + m*n, 2*m*n*k / sqrt(S)) words for an
    S-word on-chip buffer; never below the footprint, monotone non-increasing
    in S.
    """
    if min(m, n, k, buffer_words) <= 0 or bytes_per_word <= 0:
        raise MisconfigurationError("contraction traffic bound requires positive arguments")
    compulsory = m * k + k * n + m * n
    reuse_limited = 2.0 * m * n * k / math.sqrt(buffer_words)
    return max(float(compulsory), reuse_limited) * bytes_per_word


def tightened_sol_time(
    cost: CostBreakdown,
    spec: HardwareSpec,
    dtype: str,
    contraction_dims: Optional[Tuple[int, int, int]] = None,
    graph: Optional[EinsumGraph] = None,
) -> SolReport:
    """Roofline with the memory term raised to the contraction I/O bound.

    The tightened bound is never below the plain roofline's memory term; the
    report records which term won. When the graph is supplied, asking for a
    contraction bound on a contraction-free graph is rejected.
    """
    base = sol_time(cost, spec, dtype)
    if contraction_dims is None:
        return base
    if graph is not None and not any(n.kind is NodeKind.CONTRACTION for n in graph.nodes):
        raise MisconfigurationError("contraction_dims given but the graph has no contraction node")
    m, n, k = contraction_dims
    dt = element_type(dtype)
    if dt.bits_per_element is None:
        raise MisconfigurationError(f"dtype '{dtype}' has no element width; cannot size buffer words")
    bytes_per_word = dt.bits_per_element / 8.0
    buffer_words = int(spec.on_chip_buffer_bytes / bytes_per_word)
    lb_bytes = contraction_traffic_lower_bound(m, n, k, buffer_words, bytes_per_word)
    effective_bytes = max(float(cost.external_bytes), lb_bytes)
    memory_time = effective_bytes / spec.dram_bandwidth_bytes_per_s
    sol = max(base.compute_time_s, memory_time)
    return SolReport(
        flops=base.flops,
        external_bytes=base.external_bytes,
        intensity=base.intensity,
        compute_time_s=base.compute_time_s,
        memory_time_s=memory_time,
        sol_time_s=sol,
        bottleneck=_classify(base.compute_time_s, memory_time, sol),
        dtype_used=dtype,
        memory_bound_term="io_lower_bound" if lb_bytes > cost.external_bytes else "external",
        traffic_lower_bound_bytes=int(math.ceil(lb_bytes)),
    )
