import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from solbound.errors import SpecParseError
from solbound.ir import element_type
from solbound.replay import (
    ALLOCATOR_POINTER_SHIFT_BYTES,
    L2_CLEAR_BUFFER_BYTES,
    RejectReason,
    TensorData,
    TIMED_ITERATIONS,
    TRIAL_COUNT,
    ToleranceTuple,
    WARMUP_ITERATIONS,
    aggregate_runtime,
    calibrate_tolerance,
    compare_outputs,
    load_tensor_data,
)

from conftest import FIXTURES


def tensor(shape, values, dtype="fp32"):
    return TensorData(tuple(shape), element_type(dtype), np.asarray(values, dtype=np.float64))


class TestProtocolConstants:
    def test_recorded_measurement_protocol(self):
        assert (WARMUP_ITERATIONS, TIMED_ITERATIONS, TRIAL_COUNT) == (10, 50, 3)
        assert L2_CLEAR_BUFFER_BYTES == 256 * 1024 * 1024
        assert ALLOCATOR_POINTER_SHIFT_BYTES == 256


class TestAggregateRuntime:
    def test_two_level_mean(self):
        assert aggregate_runtime([[1, 2, 3], [2, 2, 2], [3, 3, 3]]) == pytest.approx(7.0 / 3.0)

    def test_single_sample(self):
        assert aggregate_runtime([[5.0]]) == 5.0

    def test_symmetric_mean(self):
        assert aggregate_runtime([[4.0], [6.0]]) == 5.0

    def test_empty_trial_rejected(self):
        with pytest.raises(SpecParseError):
            aggregate_runtime([[1.0], []])

    def test_permutation_invariance(self):
        rng = random.Random(5)
        trials = [[rng.uniform(0.01, 2.0) for _ in range(50)] for _ in range(3)]
        base = aggregate_runtime(trials)
        shuffled = [list(t) for t in trials]
        for t in shuffled:
            rng.shuffle(t)
        rng.shuffle(shuffled)
        assert aggregate_runtime(shuffled) == base  # exact, not approx

    def test_accepts_timing_log_objects(self):
        from solbound.specsio import TimingLog

        log = TimingLog("p", 0, "c", ((1.0, 3.0), (2.0, 2.0)), 10, 2)
        assert aggregate_runtime(log) == 2.0


class TestCalibrateTolerance:
    def test_safety_margin(self):
        tol = calibrate_tolerance([1e-3, 2e-3, 1.5e-3], element_type("bf16"))
        assert tol.atol == pytest.approx(2.5e-3)
        assert tol.rtol == 1e-2
        assert tol.matched_ratio == 0.999

    def test_floor_engages_on_zero_samples(self):
        tol = calibrate_tolerance([0.0, 0.0], element_type("fp32"), floor=1e-7)
        assert tol.atol == 1e-7

    def test_single_sample(self):
        assert calibrate_tolerance([4e-2], element_type("fp32")).atol == pytest.approx(5e-2)

    def test_empty_and_negative_samples_rejected(self):
        with pytest.raises(SpecParseError):
            calibrate_tolerance([], element_type("fp32"))
        with pytest.raises(SpecParseError):
            calibrate_tolerance([-1e-3], element_type("fp32"))

    @given(
        samples=st.lists(st.floats(min_value=0, max_value=1e3), min_size=1, max_size=8),
        scale=st.floats(min_value=1e-3, max_value=1e3),
    )
    def test_scale_equivariant_with_zero_floor(self, samples, scale):
        base = calibrate_tolerance(samples, element_type("fp32")).atol
        scaled = calibrate_tolerance([s * scale for s in samples], element_type("fp32")).atol
        assert scaled == pytest.approx(base * scale, rel=1e-12)


class TestCompareOutputs:
    tol = ToleranceTuple(atol=1e-3, rtol=1e-2, matched_ratio=0.999)

    def test_identity_passes(self):
        ref = tensor([2, 2], [1.0, 2.0, 3.0, 4.0])
        verdict = compare_outputs(ref, ref, self.tol)
        assert verdict.correct and verdict.matched_fraction == 1.0
        assert verdict.reject_reason is None

    def test_nan_candidate_rejected(self):
        cand = tensor([2], [1.0, float("nan")])
        ref = tensor([2], [1.0, 2.0])
        verdict = compare_outputs(cand, ref, self.tol)
        assert not verdict.correct and verdict.reject_reason is RejectReason.NONFINITE

    def test_nan_reference_also_rejected(self):
        cand = tensor([2], [1.0, 2.0])
        ref = tensor([2], [1.0, float("inf")])
        assert compare_outputs(cand, ref, self.tol).reject_reason is RejectReason.NONFINITE

    def test_all_zero_candidate_rejected(self):
        cand = tensor([2], [0.0, 0.0])
        ref = tensor([2], [1.0, 2.0])
        assert compare_outputs(cand, ref, self.tol).reject_reason is RejectReason.DEGENERATE_ZERO

    def test_all_zero_reference_allows_zero_candidate(self):
        cand = tensor([2], [0.0, 0.0])
        ref = tensor([2], [0.0, 0.0])
        assert compare_outputs(cand, ref, self.tol).correct

    def test_shape_mismatch_checked_first(self):
        cand = tensor([4], [0.0, 0.0, 0.0, float("nan")])
        ref = tensor([2, 2], [1.0, 2.0, 3.0, 4.0])
        assert compare_outputs(cand, ref, self.tol).reject_reason is RejectReason.SHAPE_MISMATCH

    def test_dtype_mismatch(self):
        cand = tensor([2], [1.0, 2.0], dtype="fp16")
        ref = tensor([2], [1.0, 2.0])
        assert compare_outputs(cand, ref, self.tol).reject_reason is RejectReason.DTYPE_MISMATCH

    def test_matched_ratio_gate(self):
        ref = tensor([4], [1.0, 1.0, 1.0, 1.0])
        cand = tensor([4], [1.0, 1.0, 1.0, 2.0])
        loose = ToleranceTuple(1e-3, 1e-2, 0.75)
        strict = ToleranceTuple(1e-3, 1e-2, 0.9)
        assert compare_outputs(cand, ref, loose).correct
        assert not compare_outputs(cand, ref, strict).correct

    def test_full_ratio_means_every_element_passes(self):
        rng = random.Random(11)
        tol = ToleranceTuple(1e-3, 1e-2, 1.0)
        for _ in range(50):
            ref_values = [rng.uniform(-2, 2) for _ in range(16)]
            cand_values = [v + rng.uniform(-2e-3, 2e-3) for v in ref_values]
            cand, ref = tensor([16], cand_values), tensor([16], ref_values)
            verdict = compare_outputs(cand, ref, tol)
            brute = all(
                abs(c - r) <= tol.atol + tol.rtol * abs(r)
                for c, r in zip(cand_values, ref_values)
            )
            assert verdict.correct == brute


class TestTensorDataFiles:
    def test_inline_fixture(self):
        data = load_tensor_data((FIXTURES / "tensors/reference_2x2.json").read_text(encoding="utf-8"))
        assert data.shape == (2, 2)
        assert data.values.tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_base64_fixture_carries_nan(self):
        data = load_tensor_data((FIXTURES / "tensors/candidate_nan.json").read_text(encoding="utf-8"))
        assert math.isnan(data.values[1])

    def test_payload_length_must_match_shape(self):
        with pytest.raises(SpecParseError):
            load_tensor_data('{"shape": [3], "dtype": "fp32", "encoding": "inline", "values": [1.0]}')

    def test_bf16_base64_roundtrip(self):
        import base64 as b64
        bits = np.array([1.5, -2.0], dtype=np.float32).view(np.uint32) >> 16
        payload = b64.b64encode(bits.astype("<u2").tobytes()).decode()
        data = load_tensor_data(
            f'{{"shape": [2], "dtype": "bf16", "encoding": "base64", "data": "{payload}"}}'
        )
        assert data.values.tolist() == [1.5, -2.0]
