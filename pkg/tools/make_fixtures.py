#!/usr/bin/env python3
"""Regenerate the checked-in fixture set under fixtures/.

Fixtures are authored through the package's canonical emitters so byte-level
round-trip tests stay meaningful. Rerun after changing any serializer:

    python tools/make_fixtures.py
"""

from __future__ import annotations

import base64
import json
import struct
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from solbound.ir import dump_graph, load_graph  # noqa: E402

FIXTURES = REPO / "fixtures"


def write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path.relative_to(REPO)}")


def jsonl(records) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


# ---------------------------------------------------------------------------
# Graphs

PROJ_RESIDUAL_GRAPH = {
    "tensors": [
        {"name": "attn_output", "shape": [16, 512, 2560], "dtype": "bf16", "role": "input"},
        {"name": "weight", "shape": [2560, 2560], "dtype": "bf16", "role": "weight"},
        {"name": "residual", "shape": [16, 512, 2560], "dtype": "bf16", "role": "input"},
        {"name": "projected", "shape": [16, 512, 2560], "dtype": "bf16", "role": "intermediate"},
        {"name": "output", "shape": [16, 512, 2560], "dtype": "bf16", "role": "output"},
    ],
    "nodes": [
        {
            "id": "n1",
            "kind": "contraction",
            "inputs": ["attn_output", "weight"],
            "input_specs": ["acb", "bh"],
            "output": "projected",
            "output_spec": "ach",
        },
        {
            "id": "n2",
            "kind": "elementwise",
            "inputs": ["projected", "residual"],
            "input_specs": ["ach", "ach"],
            "output": "output",
            "output_spec": "ach",
            "elementwise_cost": 1,
        },
    ],
    "metadata": {"problem": "attn_out_proj_residual", "precision": "bf16", "direction": "forward"},
}

CYCLIC_GRAPH = {
    "tensors": [
        {"name": "x", "shape": [4, 4], "dtype": "fp32", "role": "input"},
        {"name": "t1", "shape": [4, 4], "dtype": "fp32", "role": "intermediate"},
        {"name": "t2", "shape": [4, 4], "dtype": "fp32", "role": "output"},
    ],
    "nodes": [
        {"id": "n1", "kind": "elementwise", "inputs": ["x", "t2"], "input_specs": ["ab", "ab"],
         "output": "t1", "output_spec": "ab", "elementwise_cost": 1},
        {"id": "n2", "kind": "elementwise", "inputs": ["t1"], "input_specs": ["ab"],
         "output": "t2", "output_spec": "ab", "elementwise_cost": 1},
    ],
    "metadata": {"problem": "deliberately_cyclic", "precision": "fp32"},
}

GEMM_1024_GRAPH = {
    "tensors": [
        {"name": "a", "shape": [1024, 1024], "dtype": "bf16", "role": "input"},
        {"name": "b", "shape": [1024, 1024], "dtype": "bf16", "role": "input"},
        {"name": "c", "shape": [1024, 1024], "dtype": "bf16", "role": "output"},
    ],
    "nodes": [
        {"id": "n1", "kind": "contraction", "inputs": ["a", "b"], "input_specs": ["mk", "kn"],
         "output": "c", "output_spec": "mn"},
    ],
    "metadata": {"problem": "square_gemm_1024", "precision": "bf16"},
}

# Block-scaled low-precision expert GEMM; exercises scale-factor overhead.
NVFP4_EXPERT_GRAPH = {
    "tensors": [
        {"name": "tokens", "shape": [128, 256], "dtype": "nvfp4", "role": "input"},
        {"name": "expert_weight", "shape": [256, 512], "dtype": "nvfp4", "role": "weight"},
        {"name": "activations", "shape": [128, 512], "dtype": "nvfp4", "role": "output"},
    ],
    "nodes": [
        {"id": "n1", "kind": "contraction", "inputs": ["tokens", "expert_weight"],
         "input_specs": ["mk", "kn"], "output": "activations", "output_spec": "mn"},
    ],
    "metadata": {"problem": "nvfp4_moe_expert", "precision": "nvfp4"},
}


# ---------------------------------------------------------------------------
# Problem + workloads

PROJ_RESIDUAL_PROBLEM = {
    "name": "attn_out_proj_residual",
    "category": "L1",
    "op_type": "linear",
    "domain": "llm",
    "direction": "forward",
    "precision": "bf16",
    "axes": [
        {"name": "batch", "kind": "var"},
        {"name": "seq", "kind": "var"},
        {"name": "hidden", "kind": "const", "const_value": 2560},
        {"name": "hidden_out", "kind": "expr", "expr_text": "hidden"},
    ],
    "tensors": [
        {"name": "attn_output", "shape": ["batch", "seq", "hidden"], "dtype": "bf16", "role": "input"},
        {"name": "weight", "shape": ["hidden", "hidden_out"], "dtype": "bf16", "role": "weight"},
        {"name": "residual", "shape": ["batch", "seq", "hidden_out"], "dtype": "bf16", "role": "input"},
        {"name": "projected", "shape": ["batch", "seq", "hidden_out"], "dtype": "bf16", "role": "intermediate"},
        {"name": "output", "shape": ["batch", "seq", "hidden_out"], "dtype": "bf16", "role": "output"},
    ],
    "nodes": [
        {
            "id": "n1",
            "kind": "contraction",
            "inputs": ["attn_output", "weight"],
            "input_specs": [["batch", "seq", "hidden"], ["hidden", "hidden_out"]],
            "output": "projected",
            "output_spec": ["batch", "seq", "hidden_out"],
        },
        {
            "id": "n2",
            "kind": "elementwise",
            "inputs": ["projected", "residual"],
            "input_specs": [["batch", "seq", "hidden_out"], ["batch", "seq", "hidden_out"]],
            "output": "output",
            "output_spec": ["batch", "seq", "hidden_out"],
            "elementwise_cost": 1,
        },
    ],
    "reference": "def run(attn_output, residual, weight):\n    projected = attn_output @ weight.t()\n    return projected + residual\n",
    "metadata": {"source_model": "jamba-reasoning-3b"},
}


def proj_residual_workloads() -> str:
    batches = [1, 2, 4, 8, 16, 32, 64, 16, 8, 4, 2, 1, 32, 64, 16, 8]
    seqs = [128, 256, 512, 1024, 512, 2048, 4096, 8192, 128, 256, 1024, 2048, 512, 128, 4096, 8192]
    records = [
        {
            "bindings": {"batch": b, "seq": s},
            "tolerance": {"atol": 0.001, "rtol": 0.01, "matched_ratio": 0.999},
        }
        for b, s in zip(batches, seqs)
    ]
    return jsonl(records)


BAD_WORKLOADS = (
    '{"bindings": {"batch": 1, "seq": 128}, "tolerance": {"atol": 0.001, "rtol": 0.01, "matched_ratio": 1.5}}\n'
)


# ---------------------------------------------------------------------------
# Timing logs + bounds + baselines for the score subcommand


def timing_fixture() -> tuple[str, str, str]:
    def trial(value: float, n: int = 50) -> list[float]:
        return [value] * n

    timings = [
        {
            "problem": "attn_out_proj_residual",
            "workload_index": 0,
            "candidate_id": "cand_a",
            "warmup_count": 10,
            "timed_count": 50,
            "trials": [trial(0.080), trial(0.081), trial(0.079)],
        },
        {
            "problem": "attn_out_proj_residual",
            "workload_index": 1,
            "candidate_id": "cand_a",
            "warmup_count": 10,
            "timed_count": 50,
            "trials": [trial(0.120), trial(0.120), trial(0.120)],
            "correct": False,
        },
        {
            "problem": "attn_out_proj_residual",
            "workload_index": 2,
            "candidate_id": "cand_a",
            "warmup_count": 0,
            "timed_count": 1,
            "trials": [[0.040]],
        },
        {
            "problem": "rmsnorm_fused",
            "workload_index": 0,
            "candidate_id": "cand_a",
            "warmup_count": 10,
            "timed_count": 50,
            "trials": [trial(0.030), trial(0.030), trial(0.030)],
        },
        {
            "problem": "rmsnorm_fused",
            "workload_index": 0,
            "candidate_id": "cand_b",
            "warmup_count": 10,
            "timed_count": 50,
            "trials": [trial(0.025), trial(0.025), trial(0.025)],
        },
    ]
    meta = {"category": "L1", "op_type": "linear", "precision": "bf16", "domain": "llm"}
    bounds = [
        {"problem": "attn_out_proj_residual", "workload_index": 0, "t_sol_ms": 0.059, "t_ref_ms": 0.200, **meta},
        {"problem": "attn_out_proj_residual", "workload_index": 1, "t_sol_ms": 0.059, "t_ref_ms": 0.220, **meta},
        {"problem": "attn_out_proj_residual", "workload_index": 2, "t_sol_ms": 0.059, "t_ref_ms": 0.180, **meta},
        {"problem": "rmsnorm_fused", "workload_index": 0, "t_sol_ms": 0.010, "t_ref_ms": 0.090,
         "category": "L1", "op_type": "normalization", "precision": "bf16", "domain": "llm"},
    ]
    baselines = [
        {"problem": "attn_out_proj_residual", "workload_index": 0, "t_b_ms": 0.100},
        {"problem": "attn_out_proj_residual", "workload_index": 1, "t_b_ms": 0.110},
        {"problem": "attn_out_proj_residual", "workload_index": 2, "t_b_ms": 0.095},
        {"problem": "rmsnorm_fused", "workload_index": 0, "t_b_ms": 0.040},
    ]
    return jsonl(timings), json.dumps(bounds, indent=2) + "\n", json.dumps(baselines, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Leaderboard fixture: 17 problems whose category medians land on the
# pinned reference aggregates (0.688 / 0.761 / 0.757 / 0.789, overall 0.732).

LEADERBOARD_PLAN = [
    ("l1_gqa_prefill", "L1", "attention", "bf16", [0.500]),
    ("l1_rmsnorm", "L1", "normalization", "bf16", [0.600]),
    ("l1_rope_embed", "L1", "embedding", "bf16", [0.650]),
    ("l1_out_proj", "L1", "linear", "bf16", [0.688]),
    ("l1_swiglu_mlp", "L1", "mlp", "fp32", [0.700]),
    ("l1_square_gemm", "L1", "gemm", "fp16", [0.710]),
    ("l1_window_attn", "L1", "attention", "fp32", [0.720]),
    ("l2_decoder_block", "L2", "fused", "bf16", [0.715]),
    ("l2_moe_dispatch", "L2", "moe", "bf16", [0.732, 0.732]),
    ("l2_cross_attn", "L2", "attention", "bf16", [0.761]),
    ("l2_ssm_chunk_scan", "L2", "ssm", "fp32", [0.780]),
    ("l2_conv_stem", "L2", "convolution", "fp32", [0.800]),
    ("quant_fp8_mla_proj", "Quant", "linear", "fp8", [0.740]),
    ("quant_nvfp4_moe_expert", "Quant", "moe", "nvfp4", [0.757]),
    ("quant_fp8_moe_gate", "Quant", "moe", "fp8", [0.770]),
    ("fib_fused_attention", "FIB", "attention", "bf16", [0.789]),
    ("fib_rmsnorm", "FIB", "normalization", "fp8", [0.795]),
]


def leaderboard_fixture() -> str:
    t_sol, t_b, t_ref = 50.0, 100.0, 200.0
    records = []
    for problem, category, op_type, precision, scores in LEADERBOARD_PLAN:
        for widx, score in enumerate(scores):
            t_k = t_sol + (1.0 / score - 1.0) * (t_b - t_sol)
            records.append(
                {
                    "problem": problem,
                    "workload_index": widx,
                    "candidate_id": "agent_best",
                    "correct": True,
                    "t_k_ms": t_k,
                    "t_b_ms": t_b,
                    "t_sol_ms": t_sol,
                    "t_ref_ms": t_ref,
                    "score": score,
                    "band": "above_baseline" if score < 0.7 else "strong",
                    "headroom_fraction": (t_ref - t_k) / (t_ref - t_sol),
                    "speedup_vs_ref": t_ref / t_k,
                    "signals": [],
                    "category": category,
                    "op_type": op_type,
                    "precision": precision,
                    "domain": "llm",
                }
            )
    return jsonl(records)


# ---------------------------------------------------------------------------
# Flagged-submission findings shaped like a large agent campaign's recorded
# exploit distribution:
# counts per family over 4062 total submissions.

FLAGGED_COUNTS = [
    ("PrecisionDowngrade", "precision-downgrade-half", "review", 259),
    ("MonkeyPatching", "monkey-patching-timing-functions", "reject", 134),
    ("StreamInjection", "stream-injection-side-streams", "reject", 100),
    ("CachedOutputReuse", "cached-output-data-ptr-key", "reject", 67),
    ("JitForking", "jit-forking", "reject", 12),
    ("OneTimeCorrectness", "one-time-correctness-sentinel", "review", 10),
    ("ThreadInjection", "thread-injection-python-threads", "reject", 7),
]
TOTAL_SUBMISSIONS = 4062


def flagged_findings() -> str:
    records = []
    for family, rule_id, severity, count in FLAGGED_COUNTS:
        for i in range(count):
            records.append(
                {
                    "rule_id": rule_id,
                    "family": family,
                    "file": f"submissions/{family.lower()}_{i:04d}.py",
                    "line": 1,
                    "matched_excerpt": f"flagged {family} pattern",
                    "severity": severity,
                }
            )
    return jsonl(records)


# ---------------------------------------------------------------------------
# Tensor payloads for compare


def tensor_inline(shape, values, dtype="fp32") -> str:
    return json.dumps({"shape": shape, "dtype": dtype, "encoding": "inline", "values": values}, indent=2) + "\n"


def tensor_base64_f32(shape, values) -> str:
    raw = struct.pack(f"<{len(values)}f", *values)
    return (
        json.dumps(
            {"shape": shape, "dtype": "fp32", "encoding": "base64", "data": base64.b64encode(raw).decode("ascii")},
            indent=2,
        )
        + "\n"
    )


# ---------------------------------------------------------------------------


def main() -> None:
    write(FIXTURES / "graphs/proj_residual.json", dump_graph(load_graph(json.dumps(PROJ_RESIDUAL_GRAPH))))
    write(FIXTURES / "graphs/cyclic.json", json.dumps(CYCLIC_GRAPH, indent=2) + "\n")
    write(FIXTURES / "graphs/gemm1024.json", dump_graph(load_graph(json.dumps(GEMM_1024_GRAPH))))
    write(FIXTURES / "graphs/nvfp4_expert.json", dump_graph(load_graph(json.dumps(NVFP4_EXPERT_GRAPH))))

    write(FIXTURES / "problems/attn_out_proj_residual.json", json.dumps(PROJ_RESIDUAL_PROBLEM, indent=2) + "\n")
    write(FIXTURES / "problems/workloads.jsonl", proj_residual_workloads())
    write(FIXTURES / "problems/workloads_bad_ratio.jsonl", BAD_WORKLOADS)

    timings, bounds, baselines = timing_fixture()
    write(FIXTURES / "timing/timings.jsonl", timings)
    write(FIXTURES / "timing/bounds.json", bounds)
    write(FIXTURES / "timing/baselines.json", baselines)

    write(FIXTURES / "scoring/leaderboard_results.jsonl", leaderboard_fixture())
    write(FIXTURES / "audit/flagged_findings.jsonl", flagged_findings())

    write(FIXTURES / "tensors/reference_2x2.json", tensor_inline([2, 2], [1.0, 2.0, 3.0, 4.0]))
    write(FIXTURES / "tensors/candidate_identical.json", tensor_inline([2, 2], [1.0, 2.0, 3.0, 4.0]))
    write(FIXTURES / "tensors/candidate_close.json", tensor_inline([2, 2], [1.0005, 2.0, 3.0, 4.0]))
    write(FIXTURES / "tensors/candidate_zero.json", tensor_inline([2, 2], [0.0, 0.0, 0.0, 0.0]))
    write(FIXTURES / "tensors/candidate_wrong_shape.json", tensor_inline([4], [1.0, 2.0, 3.0, 4.0]))
    nan = float("nan")
    write(FIXTURES / "tensors/candidate_nan.json", tensor_base64_f32([2, 2], [1.0, nan, 3.0, 4.0]))

    write(FIXTURES / "calibration/deviation_samples.json", json.dumps([0.001, 0.002, 0.0015]) + "\n")

    print("fixture set complete")


if __name__ == "__main__":
    main()
