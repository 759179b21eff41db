"""Interval estimates, two-sample tests, effect sizes and session reports."""
import csv
import math

import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from semnav.analytics import (
    LatencySummary,
    build_session_report,
    clopper_pearson_interval,
    cohens_d,
    contingency_by_method,
    fishers_exact_2x2,
    mann_whitney,
    write_report_csv,
)


class TestClopperPearson:
    def test_perfect_run_closed_form(self):
        lower, upper = clopper_pearson_interval(33, 33)
        assert upper == 1.0
        assert lower == pytest.approx(0.025 ** (1 / 33))
        assert lower == pytest.approx(0.8942372, abs=1e-6)

    def test_zero_successes_closed_form(self):
        lower, upper = clopper_pearson_interval(0, 20)
        assert lower == 0.0
        assert upper == pytest.approx(1 - 0.025 ** (1 / 20))

    def test_interior_case_against_scipy(self):
        # scipy.stats.binomtest is an independent implementation of the same
        # exact interval
        ours = clopper_pearson_interval(5, 10)
        ref = scipy.stats.binomtest(5, 10).proportion_ci(0.95, method="exact")
        assert ours[0] == pytest.approx(ref.low, abs=1e-9)
        assert ours[1] == pytest.approx(ref.high, abs=1e-9)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            clopper_pearson_interval(5, 4)
        with pytest.raises(ValueError):
            clopper_pearson_interval(0, 0)

    @settings(max_examples=50, deadline=None)
    @given(
        trials=st.integers(min_value=1, max_value=60),
        data=st.data(),
    )
    def test_contains_point_estimate(self, trials, data):
        successes = data.draw(st.integers(min_value=0, max_value=trials))
        lower, upper = clopper_pearson_interval(successes, trials)
        assert lower <= successes / trials <= upper


class TestMannWhitney:
    def test_no_overlap_u_is_maximal(self):
        r = mann_whitney([10.0] * 3, [1.0, 2.0, 3.0])
        assert r.u_statistic == 9.0

    def test_documented_latency_comparison(self):
        vlm = [8552, 8203, 8935, 2566, 7921, 5317, 5634, 7412, 6890, 7156]  # ms
        fast = [0.065] + [0.056] * 16 + [0.074] * 16  # ms
        r = mann_whitney(vlm, fast, alternative="greater")
        assert r.u_statistic == 330.0  # 10 * 33, complete separation
        p_two = mann_whitney(vlm, fast).p_value
        assert r.p_value == pytest.approx(p_two / 2, rel=1e-6)

    def test_exact_agrees_with_scipy_small_samples(self):
        a, b = [3.1, 4.5, 2.2, 6.0], [1.0, 1.5, 2.9]
        ours = mann_whitney(a, b, exact=True)
        ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
        assert ours.u_statistic == ref.statistic
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_normal_approx_agrees_with_scipy(self):
        a = [float(x) for x in range(20)]
        b = [float(x) + 5.0 for x in range(15)]
        ours = mann_whitney(a, b)
        ref = scipy.stats.mannwhitneyu(
            a, b, alternative="two-sided", method="asymptotic", use_continuity=True
        )
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-6)

    def test_ties_handled_with_midranks(self):
        ours = mann_whitney([1.0, 2.0, 2.0, 3.0], [2.0, 2.0, 4.0, 5.0])
        ref = scipy.stats.mannwhitneyu(
            [1.0, 2.0, 2.0, 3.0], [2.0, 2.0, 4.0, 5.0],
            alternative="two-sided", method="asymptotic", use_continuity=True,
        )
        assert ours.u_statistic == ref.statistic
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-6)

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            mann_whitney([], [1.0])

    def test_unknown_alternative_rejected(self):
        with pytest.raises(ValueError):
            mann_whitney([1.0], [2.0], alternative="less")


class TestCohensD:
    def test_hand_oracle(self):
        # means 4 and 2, both variances 1 -> pooled sd 1 -> d = 2
        assert cohens_d([3.0, 4.0, 5.0], [1.0, 2.0, 3.0]) == pytest.approx(2.0)

    def test_sign_follows_sample_order(self):
        assert cohens_d([1.0, 2.0, 3.0], [3.0, 4.0, 5.0]) == pytest.approx(-2.0)

    def test_zero_variance_is_none(self):
        assert cohens_d([2.0, 2.0], [2.0, 2.0]) is None

    def test_tiny_samples_rejected(self):
        with pytest.raises(ValueError):
            cohens_d([1.0], [1.0, 2.0])

    @settings(max_examples=50, deadline=None)
    @given(
        shift=st.floats(min_value=-100, max_value=100, allow_nan=False),
        sample=st.lists(
            st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=2, max_size=20
        ),
    )
    def test_translation_invariance(self, shift, sample):
        base = cohens_d(sample, [0.0, 1.0, 2.0])
        moved = cohens_d([x + shift for x in sample], [y + shift for y in [0.0, 1.0, 2.0]])
        if base is None:
            assert moved is None
        else:
            assert moved == pytest.approx(base, abs=1e-6)


class TestFisher:
    def test_documented_method_table(self):
        assert fishers_exact_2x2([[28, 5], [8, 0]]) == pytest.approx(0.563169, abs=1e-5)

    def test_against_scipy(self):
        for table in ([[8, 2], [1, 5]], [[3, 3], [3, 3]], [[10, 0], [0, 10]]):
            ref = scipy.stats.fisher_exact(table, alternative="two-sided")[1]
            assert fishers_exact_2x2(table) == pytest.approx(ref, rel=1e-9)

    def test_degenerate_margin_is_one(self):
        assert fishers_exact_2x2([[0, 0], [3, 4]]) == 1.0
        assert fishers_exact_2x2([[0, 3], [0, 4]]) == 1.0

    def test_negative_entry_rejected(self):
        with pytest.raises(ValueError):
            fishers_exact_2x2([[1, -1], [2, 3]])


class TestReports:
    def test_latency_summary_small_n(self):
        one = LatencySummary.of([5.0])
        assert (one.n, one.mean, one.sd_population, one.sd_sample) == (1, 5.0, 0.0, None)
        assert LatencySummary.of([]) is None

    def test_full_experiment_report(self, all_decisions):
        report = build_session_report([e.to_dict() for e in all_decisions])
        assert report.total_decisions == 82
        assert report.method_counts == {
            "L3a_m3_preference": 51,
            "L3a_deterministic": 21,
            "L3b_vlm": 10,
        }
        assert report.per_platform_decisions == {"xplorer-b": 43, "xplorer-c": 39}
        assert report.vlm_latency.n == 10

    def test_return_commands_excluded(self, artifacts):
        report = build_session_report([e.to_dict() for e in artifacts.session_a.entries])
        assert report.return_commands_excluded == 3
        assert report.total_decisions == 37

    def test_contingency_from_session_b(self, artifacts):
        rows = [
            e.to_dict()
            for e in artifacts.session_b.entries
            if not e.extra.get("return_command")
        ]
        assert contingency_by_method(rows) == [[28, 5], [8, 0]]

    def test_csv_round_trip(self, all_decisions, tmp_path):
        report = build_session_report([e.to_dict() for e in all_decisions])
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[-1]["scenario"] == "TOTAL"
        assert int(rows[-1]["decisions"]) == 82
        assert sum(int(r["decisions"]) for r in rows[:-1]) == 82
