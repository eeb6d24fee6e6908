import math

import pytest
from hypothesis import given, strategies as st

from solbound.errors import DegenerateReferenceError, EmptySuiteError
from solbound.scoring import (
    RuntimeTriple,
    ScoreBand,
    SignalKind,
    audit_signals,
    best_of_k,
    headroom_fraction,
    score_band,
    score_result,
    sol_score,
    speedup,
    suite_score,
)


def triple(t_k, t_b=100.0, t_sol=50.0, t_ref=None):
    return RuntimeTriple(t_k=t_k, t_b=t_b, t_sol=t_sol, t_ref=t_ref)


class TestSolScore:
    def test_baseline_parity_scores_half(self):
        assert sol_score(triple(100.0)) == 0.5

    def test_bound_scores_one(self):
        assert sol_score(triple(50.0)) == 1.0

    def test_slowdown_scores_one_third(self):
        assert sol_score(triple(150.0)) == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_violating_triples_are_unscored(self):
        assert sol_score(triple(40.0)) is None
        assert sol_score(triple(60.0, t_b=50.0)) is None

    def test_strictly_decreasing(self):
        values = [sol_score(triple(t)) for t in (50.0, 60.0, 75.0, 100.0, 150.0, 400.0, 5000.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_decays_below_any_epsilon(self):
        eps = 0.01
        t_k = 50.0 + (100.0 - 50.0) * (1.0 / eps - 1.0)
        assert sol_score(triple(t_k)) == pytest.approx(eps, abs=1e-12)
        assert sol_score(triple(t_k * 1.001)) < eps

    @given(
        t_sol=st.floats(min_value=1e-6, max_value=1e3),
        gap=st.floats(min_value=1e-6, max_value=1e3),
        above=st.floats(min_value=0.0, max_value=1e4),
    )
    def test_equivalent_form_identity(self, t_sol, gap, above):
        # the equivalent form, evaluated exactly on the same float inputs
        from fractions import Fraction

        t_b = t_sol + gap
        t_k = t_sol + above
        s1 = sol_score(triple(t_k, t_b=t_b, t_sol=t_sol))
        g = Fraction(t_b) - Fraction(t_sol)
        d = Fraction(t_k) - Fraction(t_sol)
        s2 = float(g / (d + g))
        assert abs(s1 - s2) <= 2 * math.ulp(s1)

    @given(
        scale=st.floats(min_value=1e-6, max_value=1e6),
        above=st.floats(min_value=0.0, max_value=1e3),
    )
    def test_time_unit_independence(self, scale, above):
        base = triple(50.0 + above)
        scaled = RuntimeTriple(base.t_k * scale, base.t_b * scale, base.t_sol * scale)
        assert sol_score(scaled) == pytest.approx(sol_score(base), rel=1e-9)


class TestAuditSignals:
    def test_sol_violation(self):
        kinds = [s.kind for s in audit_signals(triple(40.0))]
        assert kinds == [SignalKind.SOL_VIOLATION]

    def test_baseline_at_sol(self):
        kinds = [s.kind for s in audit_signals(triple(60.0, t_b=50.0))]
        assert kinds == [SignalKind.BASELINE_AT_SOL]

    def test_well_formed_triple_is_silent(self):
        assert audit_signals(triple(60.0)) == []


class TestSuiteScore:
    def test_symmetric_mean(self):
        results = [score_result(triple(t_k), True) for t_k in (50.0, 100.0)]
        results.append(score_result(triple(1e9), True))
        assert suite_score(results) == pytest.approx(0.5, abs=1e-7)

    def test_gating_zeroes_failed_workloads(self):
        # scores 0.9 and 0.8 by construction; first gated to zero
        t_for_09 = 50.0 + (1.0 / 0.9 - 1.0) * 50.0
        t_for_08 = 50.0 + (1.0 / 0.8 - 1.0) * 50.0
        failed = score_result(triple(t_for_09), False)
        passed = score_result(triple(t_for_08), True)
        assert failed.score == pytest.approx(0.9)
        assert suite_score([failed, passed]) == pytest.approx(0.4)

    def test_singleton(self):
        assert suite_score([score_result(triple(50.0), True)]) == 1.0

    def test_empty_suite_rejected(self):
        with pytest.raises(EmptySuiteError):
            suite_score([])

    def test_n_copies_equal_single_gated_score(self):
        result = score_result(triple(80.0), True)
        assert suite_score([result] * 7) == result.gated_score


class TestBestOfK:
    def test_max_gated_score_wins(self):
        t = lambda s: 50.0 + (1.0 / s - 1.0) * 50.0
        candidates = [
            score_result(triple(t(0.4)), True),
            score_result(triple(t(0.9)), False),
            score_result(triple(t(0.7)), True),
        ]
        assert best_of_k(candidates) is candidates[2]

    def test_all_gated_prefers_faster_then_first(self):
        # zero contributions tie; smaller t_k breaks it, then submission order
        candidates = [score_result(triple(80.0), False), score_result(triple(70.0), False)]
        assert best_of_k(candidates) is candidates[1]
        same = [score_result(triple(80.0), False), score_result(triple(80.0), False)]
        assert best_of_k(same) is same[0]

    def test_singleton_identity(self):
        only = score_result(triple(75.0), True)
        assert best_of_k([only]) is only

    def test_tie_broken_by_faster_runtime(self):
        a = score_result(triple(80.0), True)
        b = score_result(triple(80.0), True)
        faster = score_result(RuntimeTriple(79.0, 100.0, 50.0), True)
        # force equal scores by reusing the same triple values
        assert best_of_k([a, b]) is a


class TestHeadroomAndSpeedup:
    def test_two_thirds_reclaimed(self):
        assert headroom_fraction(200.0, 100.0, 50.0) == pytest.approx(2.0 / 3.0)

    def test_no_improvement(self):
        assert headroom_fraction(200.0, 200.0, 50.0) == 0.0

    def test_full_headroom(self):
        assert headroom_fraction(200.0, 50.0, 50.0) == 1.0

    def test_degenerate_reference(self):
        with pytest.raises(DegenerateReferenceError):
            headroom_fraction(50.0, 60.0, 50.0)

    def test_speedup_values(self):
        assert speedup(200.0, 100.0) == 2.0
        assert speedup(100.0, 100.0) == 1.0
        assert speedup(100.0, 400.0) == 0.25

    def test_speedup_guards(self):
        with pytest.raises(ValueError):
            speedup(0.0, 1.0)


class TestScoreBand:
    @pytest.mark.parametrize(
        "value,band",
        [
            (0.95, ScoreBand.NEAR_SOL),
            (1.0, ScoreBand.NEAR_SOL),
            (0.39, ScoreBand.FAR_BELOW_BASELINE),
            (0.0, ScoreBand.FAR_BELOW_BASELINE),
            (0.5, ScoreBand.ABOVE_BASELINE),
            (0.4, ScoreBand.BELOW_BASELINE),
            (0.7, ScoreBand.STRONG),
            (0.9, ScoreBand.NEAR_SOL),
        ],
    )
    def test_left_closed_bands(self, value, band):
        assert score_band(value) is band

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            score_band(1.01)
        with pytest.raises(ValueError):
            score_band(-0.01)


class TestScoreResult:
    def test_attaches_optional_metrics(self):
        result = score_result(triple(100.0, t_ref=200.0), True)
        assert result.score == 0.5
        assert result.band is ScoreBand.ABOVE_BASELINE
        assert result.headroom_fraction == pytest.approx(2.0 / 3.0)
        assert result.speedup_vs_ref == 2.0
        assert result.signals == ()

    def test_violation_keeps_signals_not_score(self):
        result = score_result(triple(40.0, t_ref=200.0), True)
        assert result.score is None
        assert result.band is None
        assert [s.kind for s in result.signals] == [SignalKind.SOL_VIOLATION]
        assert result.gated_score == 0.0
