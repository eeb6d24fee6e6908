"""Exception types shared across the package."""


class SolboundError(Exception):
    """Base class for all package-specific failures."""


class SpecParseError(SolboundError):
    """Malformed input document (graph, problem, workload, log, rule file).

    ``detail`` carries the field path or line/column information when known.
    """

    def __init__(self, message, detail=None):
        super().__init__(message if detail is None else f"{message} ({detail})")
        self.detail = detail


class GraphDefectsError(SolboundError):
    """A structurally invalid graph was handed to an analysis entry point."""

    def __init__(self, defects):
        self.defects = list(defects)
        summary = "; ".join(f"{d.subject}: {d.rule}" for d in self.defects[:8])
        super().__init__(f"graph fails validation: {summary}")


class UnsupportedElementTypeError(SolboundError):
    """Byte accounting requested for a dtype that carries no bit width."""


class InconsistentBindingError(SolboundError):
    """An einsum index letter is unbound or bound to conflicting extents."""


class GraphCycleError(SolboundError):
    """Topological ordering requested for a cyclic dataflow graph."""


class IntensityUndefinedError(SolboundError):
    """Division by zero bytes; callers should report 'unbounded intensity'."""


class UnknownPrecisionError(SolboundError):
    """Hardware spec has no peak-throughput entry for the requested dtype."""


class DegenerateWorkloadError(SolboundError):
    """A workload with zero FLOPs and zero bytes has no roofline bound."""


class MisconfigurationError(SolboundError):
    """Analysis options inconsistent with the graph under analysis."""


class EmptySuiteError(SolboundError):
    """Suite-level aggregation over zero results."""


class DegenerateReferenceError(SolboundError):
    """Headroom is undefined when the reference runtime is at or below SOL."""


class ExpressionError(SolboundError):
    """Axis expression failed to parse or evaluate; ``column`` is 0-based."""

    def __init__(self, message, column=None):
        suffix = "" if column is None else f" at column {column}"
        super().__init__(message + suffix)
        self.column = column


class RuleLoadError(SolboundError):
    """Audit rule file is structurally invalid or has a bad regex."""


class UndefinedCorrelationError(SolboundError):
    """Pearson correlation over a constant series."""
