import math

import pytest
from hypothesis import given, strategies as st

from solbound.costs import CostBreakdown, graph_cost
from solbound.errors import DegenerateWorkloadError, MisconfigurationError, UnknownPrecisionError
from solbound.roofline import (
    Bottleneck,
    HardwareSpec,
    contraction_traffic_lower_bound,
    hardware_from_obj,
    scale_peak,
    sol_time,
    tightened_sol_time,
)


def hw(peak=2.0e15, reference=2000.0, locked=1500.0, bandwidth=8.0e12, buffer_bytes=2**27):
    return HardwareSpec(
        name="test",
        reference_clock_mhz=reference,
        locked_clock_mhz=locked,
        peak_flops_by_dtype={"bf16": peak, "fp32": peak / 2},
        dram_bandwidth_bytes_per_s=bandwidth,
        dram_capacity_bytes=2**37,
        on_chip_buffer_bytes=buffer_bytes,
    )


def cost(flops, nbytes):
    return CostBreakdown(total_flops=flops, external_bytes=nbytes)


class TestScalePeak:
    def test_linear_clock_scaling(self):
        assert scale_peak(hw(peak=2.0e15, reference=2000.0, locked=1500.0), "bf16") == pytest.approx(1.5e15)

    def test_identity_when_locked_equals_reference(self):
        assert scale_peak(hw(peak=2.0e15, reference=1500.0, locked=1500.0), "bf16") == 2.0e15

    def test_unknown_dtype(self):
        with pytest.raises(UnknownPrecisionError, match="fp8"):
            scale_peak(hw(), "fp8")


class TestSolTime:
    def test_projection_residual_bound(self, proj_residual_graph, b200_obj):
        spec = hardware_from_obj(b200_obj)
        report = sol_time(graph_cost(proj_residual_graph), spec, "bf16")
        assert report.compute_time_s == pytest.approx(59.0e-6, rel=1e-2)
        assert report.memory_time_s == pytest.approx(15.7e-6, rel=1e-2)
        assert report.sol_time_s * 1e3 == pytest.approx(0.059, rel=0.02)
        assert report.bottleneck is Bottleneck.COMPUTE

    def test_pure_traffic(self):
        spec = hw(reference=1500.0, locked=1500.0, bandwidth=8e12)
        report = sol_time(cost(0, 8 * 10**12), spec, "bf16")
        assert report.sol_time_s == pytest.approx(1.0)
        assert report.bottleneck is Bottleneck.MEMORY

    def test_balanced_at_equal_times(self):
        spec = hw(peak=1.0e12, reference=1500.0, locked=1500.0, bandwidth=1.0e9)
        report = sol_time(cost(10**12, 10**9), spec, "bf16")
        assert report.bottleneck is Bottleneck.BALANCED
        assert report.sol_time_s == pytest.approx(1.0)

    def test_degenerate_workload(self):
        with pytest.raises(DegenerateWorkloadError):
            sol_time(cost(0, 0), hw(), "bf16")

    def test_sol_is_max_of_terms(self):
        spec = hw()
        report = sol_time(cost(10**12, 10**9), spec, "bf16")
        assert report.sol_time_s == max(report.compute_time_s, report.memory_time_s)

    @given(
        f1=st.integers(min_value=1, max_value=10**15),
        f2=st.integers(min_value=0, max_value=10**15),
        b1=st.integers(min_value=1, max_value=10**12),
        b2=st.integers(min_value=0, max_value=10**12),
    )
    def test_monotone_in_flops_and_bytes(self, f1, f2, b1, b2):
        spec = hw()
        base = sol_time(cost(f1, b1), spec, "bf16").sol_time_s
        more = sol_time(cost(f1 + f2, b1 + b2), spec, "bf16").sol_time_s
        assert more >= base

    def test_halving_clock_doubles_compute_time_only(self):
        full = sol_time(cost(10**12, 10**9), hw(reference=2000.0, locked=2000.0), "bf16")
        half = sol_time(cost(10**12, 10**9), hw(reference=2000.0, locked=1000.0), "bf16")
        assert half.compute_time_s == pytest.approx(2 * full.compute_time_s)
        assert half.memory_time_s == full.memory_time_s


class TestContractionTrafficLowerBound:
    def test_large_buffer_keeps_compulsory_term(self):
        assert contraction_traffic_lower_bound(4, 4, 4, 4096, 2.0) == pytest.approx(48 * 2.0)

    def test_reuse_limited_regime(self):
        words = contraction_traffic_lower_bound(1024, 1024, 1024, 16384, 1.0)
        assert words == pytest.approx(16_777_216.0)
        assert words == pytest.approx(max(3 * 1024 * 1024, 2 * 1024**3 / math.sqrt(16384)))

    def test_monotone_non_increasing_in_buffer(self):
        last = math.inf
        for buffer_words in (256, 1024, 4096, 16384, 2**20, 2**30):
            bound = contraction_traffic_lower_bound(512, 512, 512, buffer_words, 2.0)
            assert bound <= last
            last = bound

    def test_positive_arguments_required(self):
        with pytest.raises(MisconfigurationError):
            contraction_traffic_lower_bound(0, 4, 4, 64, 2.0)


class TestTightenedSolTime:
    def test_huge_buffer_matches_plain_roofline(self, proj_residual_graph, b200_obj):
        spec = hardware_from_obj(b200_obj)
        c = graph_cost(proj_residual_graph)
        plain = sol_time(c, spec, "bf16")
        tight = tightened_sol_time(c, spec, "bf16", contraction_dims=(8192, 2560, 2560), graph=proj_residual_graph)
        assert tight.sol_time_s == pytest.approx(plain.sol_time_s, rel=1e-12)
        assert tight.memory_bound_term == "external"

    def test_small_buffer_gemm_uses_io_bound(self):
        # 16384 bf16 words on chip: 2*1024^3/sqrt(16384) words = 32 MiB of
        # traffic versus a 6 MiB compulsory footprint.
        spec = hw(reference=1500.0, locked=1500.0, buffer_bytes=32768)
        c = cost(2 * 1024**3, 6_291_456)
        tight = tightened_sol_time(c, spec, "bf16", contraction_dims=(1024, 1024, 1024))
        assert tight.traffic_lower_bound_bytes == 33_554_432
        assert tight.memory_bound_term == "io_lower_bound"
        assert tight.memory_time_s == pytest.approx(33_554_432 / spec.dram_bandwidth_bytes_per_s)

    def test_never_below_plain_roofline(self):
        spec = hw(reference=1500.0, locked=1500.0, buffer_bytes=4096)
        for dims in ((64, 64, 64), (256, 128, 512), (1024, 1024, 1024)):
            flops = 2 * dims[0] * dims[1] * dims[2]
            nbytes = 2 * (dims[0] * dims[2] + dims[2] * dims[1] + dims[0] * dims[1])
            plain = sol_time(cost(flops, nbytes), spec, "bf16")
            tight = tightened_sol_time(cost(flops, nbytes), spec, "bf16", contraction_dims=dims)
            assert tight.sol_time_s >= plain.sol_time_s

    def test_contraction_dims_without_contraction_node(self, proj_residual_graph):
        from solbound.ir import EinsumGraph

        no_contraction = EinsumGraph(
            {name: t for name, t in proj_residual_graph.tensors.items()}, (), {}
        )
        with pytest.raises(MisconfigurationError):
            tightened_sol_time(cost(10, 10), hw(), "bf16", contraction_dims=(2, 2, 2), graph=no_contraction)
