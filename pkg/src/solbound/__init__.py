"""Speed-of-light bounds, scoring, and submission auditing for tensor kernels."""

__version__ = "0.1.0"

from .ir import (  # noqa: F401
    EinsumGraph,
    EinsumNode,
    ElementType,
    NodeKind,
    Role,
    TensorDecl,
    load_graph,
    tensor_bytes,
    topological_order,
    validate_graph,
)
from .costs import CostBreakdown, arithmetic_intensity, fused_bytes, graph_cost, graph_flops, node_flops  # noqa: F401
from .roofline import (  # noqa: F401
    Bottleneck,
    HardwareSpec,
    SolReport,
    contraction_traffic_lower_bound,
    scale_peak,
    sol_time,
    tightened_sol_time,
)
from .scoring import (  # noqa: F401
    AuditSignal,
    RuntimeTriple,
    ScoreBand,
    ScoredResult,
    audit_signals,
    best_of_k,
    headroom_fraction,
    score_band,
    score_result,
    sol_score,
    speedup,
    suite_score,
)
