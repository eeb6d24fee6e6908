"""Desk-scale replay of the measurement harness over recorded data.

Runtime aggregation, tolerance calibration, and output comparison operate on
logs and tensor payloads recorded by a live harness; nothing here touches a
GPU. The measurement protocol constants are carried for log validation and
documentation only — the device-side actions they describe (clock locking,
cache clearing, allocator shifts) happen upstream.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import SpecParseError
from .ir import ElementType, element_type

# Measurement protocol as recorded by the live harness.
WARMUP_ITERATIONS = 10
TIMED_ITERATIONS = 50
TRIAL_COUNT = 3
L2_CLEAR_BUFFER_BYTES = 256 * 1024 * 1024
ALLOCATOR_POINTER_SHIFT_BYTES = 256

TOLERANCE_SAFETY_MARGIN = 1.25

# Per-precision defaults for the parts of the tolerance tuple that are not
# calibrated from deviation samples. Overridable per workload.
DEFAULT_RTOL: Dict[str, float] = {
    "fp32": 1e-5,
    "fp16": 1e-2,
    "bf16": 1e-2,
    "fp8": 5e-2,
    "nvfp4": 5e-2,
    "int32": 0.0,
    "bool": 0.0,
}
DEFAULT_MATCHED_RATIO: Dict[str, float] = {
    "int32": 1.0,
    "bool": 1.0,
}
FALLBACK_MATCHED_RATIO = 0.999


@dataclass(frozen=True)
class ToleranceTuple:
    atol: float
    rtol: float
    matched_ratio: float

    def __post_init__(self):
        if self.atol < 0 or self.rtol < 0:
            raise SpecParseError("atol/rtol must be non-negative", detail="tolerance")
        if not 0.0 < self.matched_ratio <= 1.0:
            raise SpecParseError(
                f"matched_ratio {self.matched_ratio!r} outside (0, 1]", detail="tolerance.matched_ratio"
            )


class RejectReason(str, Enum):
    SHAPE_MISMATCH = "shape_mismatch"
    DTYPE_MISMATCH = "dtype_mismatch"
    NONFINITE = "nonfinite"
    DEGENERATE_ZERO = "degenerate_zero"


@dataclass(frozen=True)
class TensorData:
    """Recorded tensor payload: shape, declared dtype, row-major values.

    Values are held as float64 for comparison math regardless of the declared
    storage dtype.
    """

    shape: Tuple[int, ...]
    dtype: ElementType
    values: np.ndarray

    def __post_init__(self):
        if self.values.size != math.prod(self.shape):
            raise SpecParseError(
                f"payload has {self.values.size} values but shape {self.shape} needs {math.prod(self.shape)}"
            )


@dataclass(frozen=True)
class ComparisonResult:
    correct: bool
    matched_fraction: float
    reject_reason: Optional[RejectReason] = None


def aggregate_runtime(log) -> float:
    """Mean across trials of each trial's mean over timed iterations.

    Accepts a TimingLog or a bare list of trial sample lists. fsum keeps the
    result invariant under permutation of iterations within a trial and of
    trials within a log. Kept as the single point of policy so a median
    variant stays a one-line change.
    """
    trials = getattr(log, "trials", log)
    if not trials:
        raise SpecParseError("timing log has no trials")
    per_trial = []
    for i, trial in enumerate(trials):
        if not trial:
            raise SpecParseError(f"trial {i} is empty")
        per_trial.append(math.fsum(trial) / len(trial))
    return math.fsum(per_trial) / len(per_trial)


def calibrate_tolerance(
    deviation_samples: Sequence[float],
    dtype: ElementType,
    floor: float = 0.0,
) -> ToleranceTuple:
    """atol from probed reference deviations with a 1.25x safety margin."""
    if not deviation_samples:
        raise SpecParseError("calibration requires at least one deviation sample")
    if any(s < 0 for s in deviation_samples):
        raise SpecParseError("deviation samples must be non-negative")
    if floor < 0:
        raise SpecParseError("tolerance floor must be non-negative")
    atol = max(TOLERANCE_SAFETY_MARGIN * max(deviation_samples), floor)
    rtol = DEFAULT_RTOL.get(dtype.name, DEFAULT_RTOL["fp32"])
    ratio = DEFAULT_MATCHED_RATIO.get(dtype.name, FALLBACK_MATCHED_RATIO)
    return ToleranceTuple(atol=atol, rtol=rtol, matched_ratio=ratio)


def compare_outputs(
    candidate: TensorData,
    reference: TensorData,
    tol: ToleranceTuple,
) -> ComparisonResult:
    """Gate a candidate output against the recorded reference.

    Checks run in a fixed order for a deterministic reject reason: shape,
    dtype, non-finite values (on either side), degenerate all-zero candidate,
    then the elementwise |c - r| <= atol + rtol*|r| test. Matched fractions
    come from exact counting, so partitioning can never change the verdict.
    """
    if candidate.shape != reference.shape:
        return ComparisonResult(False, 0.0, RejectReason.SHAPE_MISMATCH)
    if candidate.dtype.name != reference.dtype.name:
        return ComparisonResult(False, 0.0, RejectReason.DTYPE_MISMATCH)
    cand = candidate.values
    ref = reference.values
    if cand.size and (not np.isfinite(cand).all() or not np.isfinite(ref).all()):
        return ComparisonResult(False, 0.0, RejectReason.NONFINITE)
    if cand.size and not cand.any() and (np.abs(ref) > tol.atol).any():
        return ComparisonResult(False, 0.0, RejectReason.DEGENERATE_ZERO)
    if cand.size == 0:
        return ComparisonResult(True, 1.0)
    passed = np.abs(cand - ref) <= tol.atol + tol.rtol * np.abs(ref)
    matched = int(np.count_nonzero(passed))
    fraction = matched / cand.size
    return ComparisonResult(fraction >= tol.matched_ratio, fraction)


# ---------------------------------------------------------------------------
# TensorData file format: JSON header {shape, dtype, encoding} + payload.

_BASE64_NUMPY_DTYPES = {
    "fp32": np.dtype("<f4"),
    "fp16": np.dtype("<f2"),
    "int32": np.dtype("<i4"),
    "bool": np.dtype("|b1"),
}


def tensor_data_from_obj(obj: Dict[str, Any]) -> TensorData:
    for key in ("shape", "dtype", "encoding"):
        if key not in obj:
            raise SpecParseError(f"tensor payload missing field '{key}'", detail=key)
    shape = tuple(int(e) for e in obj["shape"])
    dtype = element_type(str(obj["dtype"]))
    encoding = obj["encoding"]
    if encoding == "inline":
        values = np.asarray(obj.get("values", []), dtype=np.float64).ravel()
    elif encoding == "base64":
        raw = base64.b64decode(str(obj.get("data", "")))
        if dtype.name == "bf16":
            # bf16 is the upper half of fp32: widen uint16 -> uint32 << 16.
            bits = np.frombuffer(raw, dtype="<u2").astype(np.uint32) << 16
            values = bits.view(np.float32).astype(np.float64)
        elif dtype.name in _BASE64_NUMPY_DTYPES:
            values = np.frombuffer(raw, dtype=_BASE64_NUMPY_DTYPES[dtype.name]).astype(np.float64)
        else:
            raise SpecParseError(
                f"dtype '{dtype.name}' has no raw base64 layout; use inline encoding", detail="encoding"
            )
    else:
        raise SpecParseError(f"unknown payload encoding '{encoding}'", detail="encoding")
    return TensorData(shape=shape, dtype=dtype, values=values)


def load_tensor_data(text: str) -> TensorData:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError("invalid JSON in tensor payload", detail=f"line {exc.lineno} column {exc.colno}") from None
    return tensor_data_from_obj(obj)
