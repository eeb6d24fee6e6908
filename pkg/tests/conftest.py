from __future__ import annotations

import itertools
import json
import random
from pathlib import Path

import pytest

from solbound.ir import EinsumGraph, EinsumNode, NodeKind, Role, TensorDecl, element_type, load_graph

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"

# One entry per CLI surface: (name, argv, documented exit code). Paths are
# relative to the repo root; determinism checks run each twice.
DETERMINISM_CASES = [
    ("analyze", ["analyze", "fixtures/graphs/proj_residual.json", "--hw", "b200"], 0),
    ("analyze-prefetch-off",
     ["analyze", "fixtures/graphs/proj_residual.json", "--hw", "b200", "--prefetch-weights", "off"], 0),
    ("analyze-tightened",
     ["analyze", "fixtures/graphs/gemm1024.json", "--hw", "b200", "--contraction-dims", "1024,1024,1024"], 0),
    ("analyze-scale-overhead",
     ["analyze", "fixtures/graphs/nvfp4_expert.json", "--hw", "b200", "--scale-overhead", "on"], 0),
    ("score",
     ["score", "--timings", "fixtures/timing/timings.jsonl", "--bounds", "fixtures/timing/bounds.json",
      "--baselines", "fixtures/timing/baselines.json"], 0),
    ("validate",
     ["validate", "fixtures/problems/attn_out_proj_residual.json",
      "--workloads", "fixtures/problems/workloads.jsonl"], 0),
    ("compare",
     ["compare", "fixtures/tensors/candidate_close.json", "fixtures/tensors/reference_2x2.json",
      "--atol", "0.001", "--rtol", "0.01", "--matched-ratio", "0.5"], 0),
    ("calibrate", ["calibrate", "fixtures/calibration/deviation_samples.json", "--dtype", "fp32"], 0),
    ("audit", ["audit", "fixtures/corpus/redteam", "--precision", "fp32"], 2),
    ("audit-clean", ["audit", "fixtures/corpus/clean", "--precision", "fp32"], 0),
    ("report", ["report", "fixtures/scoring/leaderboard_results.jsonl"], 0),
    ("report-plot",
     ["report", "fixtures/scoring/leaderboard_results.jsonl", "--plot", "score_landscape"], 0),
    ("report-exploit-plot",
     ["report", "--plot", "exploit_distribution", "--findings", "fixtures/audit/flagged_findings.jsonl",
      "--total-submissions", "4062"], 0),
    ("contour", ["contour", "--t-sol", "50", "--t-b", "100", "--s", "0.7", "--n-samples", "8"], 0),
]


@pytest.fixture(scope="session")
def proj_residual_graph() -> EinsumGraph:
    return load_graph((FIXTURES / "graphs/proj_residual.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def b200_obj() -> dict:
    from importlib.resources import files

    return json.loads(files("solbound").joinpath("data/hw/b200.json").read_text(encoding="utf-8"))


def brute_force_node_flops(node: EinsumNode, graph: EinsumGraph) -> int:
    """Count multiplies and accumulates by walking the full iteration space.

    Independent of the analytic path: extents come from explicit enumeration
    over letter ranges, one (k-1)-multiply + 1-accumulate bump per point.
    """
    binding = {}
    for spec, tname in zip(node.input_specs + (node.output_spec,), node.inputs + (node.output,)):
        for letter, extent in zip(spec, graph.tensors[tname].shape):
            binding[letter] = extent
    if node.kind is NodeKind.PERMUTATION:
        return 0
    if node.kind is NodeKind.CONTRACTION:
        letters = sorted(binding)
        count = 0
        for _ in itertools.product(*(range(binding[c]) for c in letters)):
            count += (len(node.inputs) - 1) + 1
        return count
    if node.kind is NodeKind.REDUCTION:
        count = 0
        for _ in itertools.product(*(range(e) for e in graph.tensors[node.inputs[0]].shape)):
            count += 1
        return count
    count = 0
    for _ in itertools.product(*(range(e) for e in graph.tensors[node.output].shape)):
        count += node.elementwise_cost
    return count


def make_random_graph(rng: random.Random, max_nodes: int = 3, max_extent: int = 6) -> EinsumGraph:
    """Small random valid graph for oracle-equivalence and topology tests."""
    letters = "abcdef"
    extents = {c: rng.randint(1, max_extent) for c in letters}
    tensors: dict[str, TensorDecl] = {}
    nodes = []
    fresh = itertools.count()
    produced: list[tuple[str, str]] = []  # (tensor name, spec)

    def new_tensor(spec: str, role: Role) -> str:
        name = f"t{next(fresh)}"
        shape = tuple(extents[c] for c in spec)
        tensors[name] = TensorDecl(name, shape, element_type("fp32"), role)
        return name

    def pick_input(spec_len_range=(1, 3)) -> tuple[str, str]:
        lo, hi = spec_len_range
        reusable = [i for i, (_, spec) in enumerate(produced) if lo <= len(spec) <= hi]
        if reusable and rng.random() < 0.5:
            name, spec = produced.pop(rng.choice(reusable))
            tensors[name] = TensorDecl(name, tensors[name].shape, tensors[name].dtype, Role.INTERMEDIATE)
            return name, spec
        spec = "".join(rng.sample(letters, rng.randint(lo, hi)))
        return new_tensor(spec, Role.INPUT), spec

    n_nodes = rng.randint(1, max_nodes)
    for i in range(n_nodes):
        kind = rng.choice(list(NodeKind))
        if kind is NodeKind.CONTRACTION:
            in1, spec1 = pick_input((1, 3))
            shared = rng.choice(spec1)
            extra = [c for c in letters if c not in spec1]
            spec2 = shared + "".join(rng.sample(extra, rng.randint(0, min(2, len(extra)))))
            in2 = new_tensor(spec2, Role.INPUT)
            out_letters = [c for c in dict.fromkeys(spec1 + spec2) if c != shared]
            out_spec = "".join(out_letters)
            node = EinsumNode(f"n{i}", kind, (in1, in2), (spec1, spec2), new_tensor(out_spec, Role.OUTPUT), out_spec)
        elif kind is NodeKind.ELEMENTWISE:
            in1, spec1 = pick_input((1, 3))
            cost = rng.randint(0, 4)
            node = EinsumNode(f"n{i}", kind, (in1,), (spec1,), new_tensor(spec1, Role.OUTPUT), spec1, cost)
        elif kind is NodeKind.REDUCTION:
            in1, spec1 = pick_input((2, 3))
            keep = rng.randint(0, len(spec1) - 1)
            out_spec = "".join(rng.sample(list(spec1), keep))
            node = EinsumNode(f"n{i}", kind, (in1,), (spec1,), new_tensor(out_spec, Role.OUTPUT), out_spec)
        else:
            in1, spec1 = pick_input((1, 3))
            out_spec = "".join(rng.sample(list(spec1), len(spec1)))
            node = EinsumNode(f"n{i}", kind, (in1,), (spec1,), new_tensor(out_spec, Role.OUTPUT), out_spec)
        nodes.append(node)
        produced.append((node.output, node.output_spec))

    return EinsumGraph(tensors=tensors, nodes=tuple(nodes), metadata={"precision": "fp32"})
