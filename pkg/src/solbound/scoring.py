"""SOL score, correctness gating, suite aggregation, and audit signals.

The score S = 1 / (1 + (t_k - t_sol) / (t_b - t_sol)) maps a candidate
runtime onto [0, 1]: baseline parity scores 0.5, reaching the bound scores 1,
and slower kernels decay smoothly toward 0. Triples that violate the scoring
preconditions (candidate below the bound, or baseline at/below the bound) are
never scored; they surface as audit signals for bound review instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .errors import DegenerateReferenceError, EmptySuiteError


class SignalKind(str, Enum):
    SOL_VIOLATION = "SOL_VIOLATION"
    BASELINE_AT_SOL = "BASELINE_AT_SOL"


@dataclass(frozen=True)
class AuditSignal:
    kind: SignalKind
    detail: str


@dataclass(frozen=True)
class RuntimeTriple:
    """Candidate / baseline / bound runtimes in seconds (t_ref optional)."""

    t_k: float
    t_b: float
    t_sol: float
    t_ref: Optional[float] = None


class ScoreBand(Enum):
    """Left-closed score bands; 1.0 belongs to the top band."""

    FAR_BELOW_BASELINE = ("far_below_baseline", 0.0, 0.4)
    BELOW_BASELINE = ("below_baseline", 0.4, 0.5)
    ABOVE_BASELINE = ("above_baseline", 0.5, 0.7)
    STRONG = ("strong", 0.7, 0.9)
    NEAR_SOL = ("near_sol", 0.9, 1.0)

    def __init__(self, label: str, lo: float, hi: float):
        self.label = label
        self.lo = lo
        self.hi = hi


@dataclass(frozen=True)
class ScoredResult:
    triple: RuntimeTriple
    correctness: bool
    score: Optional[float]
    headroom_fraction: Optional[float] = None
    speedup_vs_ref: Optional[float] = None
    band: Optional[ScoreBand] = None
    signals: Tuple[AuditSignal, ...] = ()

    @property
    def gated_score(self) -> float:
        """Contribution to suite aggregates: C * S, 0 when unscored."""
        if not self.correctness or self.score is None:
            return 0.0
        return self.score


def audit_signals(triple: RuntimeTriple) -> List[AuditSignal]:
    signals: List[AuditSignal] = []
    if triple.t_k < triple.t_sol:
        signals.append(
            AuditSignal(
                SignalKind.SOL_VIOLATION,
                f"candidate runtime {triple.t_k!r} is below the SOL bound {triple.t_sol!r}",
            )
        )
    if triple.t_b <= triple.t_sol:
        signals.append(
            AuditSignal(
                SignalKind.BASELINE_AT_SOL,
                f"baseline runtime {triple.t_b!r} is at or below the SOL bound {triple.t_sol!r}; problem considered solved",
            )
        )
    return signals


def sol_score(triple: RuntimeTriple) -> Optional[float]:
    """Score in [0, 1], or None when the triple raises audit signals.

    Evaluated in exact rational arithmetic with a single final rounding, so
    the result is unit-rescaling independent and agrees with the algebraic
    equivalent form (gap / (gap + excess)) to the last bit. Chained double
    rounding would drift a few ulp, enough to flip band boundaries.
    """
    if audit_signals(triple):
        return None
    gap = Fraction(triple.t_b) - Fraction(triple.t_sol)
    excess = Fraction(triple.t_k) - Fraction(triple.t_sol)
    return float(1 / (1 + excess / gap))


def score_band(s: float) -> ScoreBand:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"score {s!r} outside [0, 1]")
    for band in ScoreBand:
        if band.lo <= s < band.hi:
            return band
    return ScoreBand.NEAR_SOL  # s == 1.0


def headroom_fraction(t_ref: float, t_k: float, t_sol: float) -> float:
    """Share of the reference-to-SOL gap closed by the candidate.

    Negative for slowdowns; exceeds 1 only when the candidate undercuts the
    bound (which independently raises SOL_VIOLATION).
    """
    if t_ref <= t_sol:
        raise DegenerateReferenceError(
            f"reference runtime {t_ref!r} is at or below the SOL bound {t_sol!r}; headroom undefined"
        )
    return (t_ref - t_k) / (t_ref - t_sol)


def speedup(t_ref: float, t_k: float) -> float:
    if t_ref <= 0 or t_k <= 0:
        raise ValueError("speedup requires positive runtimes")
    return t_ref / t_k


def score_result(triple: RuntimeTriple, correctness: bool) -> ScoredResult:
    """Score one measurement, attaching signals and optional metrics."""
    signals = tuple(audit_signals(triple))
    score = sol_score(triple)
    band = score_band(score) if score is not None else None
    headroom = None
    speedup_vs_ref = None
    if triple.t_ref is not None:
        if triple.t_ref > triple.t_sol:
            headroom = headroom_fraction(triple.t_ref, triple.t_k, triple.t_sol)
        if triple.t_ref > 0 and triple.t_k > 0:
            speedup_vs_ref = speedup(triple.t_ref, triple.t_k)
    return ScoredResult(
        triple=triple,
        correctness=correctness,
        score=score,
        headroom_fraction=headroom,
        speedup_vs_ref=speedup_vs_ref,
        band=band,
        signals=signals,
    )


def suite_score(results: Sequence[ScoredResult]) -> float:
    """Arithmetic mean of gated scores: (1/N) * sum(C_j * S_j)."""
    if not results:
        raise EmptySuiteError("suite score over an empty result list")
    return sum(r.gated_score for r in results) / len(results)


def best_of_k(candidates: Sequence[ScoredResult]) -> ScoredResult:
    """Candidate maximizing C*S; ties by smaller t_k, then submission order."""
    if not candidates:
        raise EmptySuiteError("best-of-k over an empty candidate list")
    best_idx = 0
    for i in range(1, len(candidates)):
        a, b = candidates[i], candidates[best_idx]
        key_a = (-a.gated_score, a.triple.t_k, i)
        key_b = (-b.gated_score, b.triple.t_k, best_idx)
        if key_a < key_b:
            best_idx = i
    return candidates[best_idx]
