"""Acceptance gate: the eight headline behaviors of the full stack.

Each test class pins one externally stated result (exact counts, statistic
values and tolerances); the module fixtures replay the complete three-session
protocol once.
"""
import statistics
import time
from collections import Counter

import pytest

from semnav.analytics import (
    clopper_pearson_interval,
    cohens_d,
    contingency_by_method,
    fishers_exact_2x2,
    mann_whitney,
)
from semnav.executive import FrozenClock, is_event, read_audit_file
from semnav.experiment import build_oracle, bundled_script
from semnav.memory import compile_digest, extract_memory, group_preferences
from semnav.resolver import METHOD_DETERMINISTIC, METHOD_M3, METHOD_VLM, Resolution, resolve
from semnav.simulation import (
    OUTCOME_COMPLETE,
    ConcurrentJob,
    canonical_decision,
    compare_runs,
    run_concurrent,
    run_session,
)

S3NEW = "Take me somewhere I can sit and relax"

EXPECTED_NODE_BY_SCENARIO = {"S1": 0, "S2": 8, "S3old": 14, "S3new": 9, "S4": 5, "S5": 19}


def decisions_of(result):
    return [e for e in result.entries if not e.extra.get("return_command")]


class TestCriterion1DeterministicResolution:
    """Golden fast-path resolutions, exact and fast."""

    CASES = [
        ("go to node 7", (0.0, 0.0, 0.0), 7, 1),
        ("mergi la nodul 12", (0.0, 0.0, 0.0), 12, 1),
        ("go to lab_cb204", (0.0, 0.0, 0.0), 5, 2),
        ("go to cb203 entrance", (0.0, 0.0, 0.0), 22, 2),
        ("go to plant_4", (0.0, 0.0, 0.0), 13, 2),
        ("go to lab_chair", (0.0, 0.0, 0.0), 9, 3),
        ("the mechanical engineering lab", (0.0, 0.0, 0.0), 5, 4),
        ("where is the chair", (0.0, 0.0, 0.0), 9, 5),
        ("Take me to the closest plant", (23.0, 0.0, 0.0), 19, 6),
        ("du-mă la cel mai apropiat plant", (16.0, 0.0, 0.0), 13, 6),
    ]

    def test_golden_suite_exact_and_under_one_second(self, graph, pois, policy):
        start = time.perf_counter()
        for instruction, pose, node, step in self.CASES:
            r = resolve(instruction, graph, pois, pose, None, policy)
            assert isinstance(r, Resolution), instruction
            assert (r.node_id, r.step) == (node, step), instruction
        assert time.perf_counter() - start < 1.0


@pytest.fixture(scope="module")
def s3new_replay(graph, pois, policy, artifacts, tmp_path_factory):
    out = tmp_path_factory.mktemp("s3new")
    start = time.perf_counter()
    result = run_session(
        bundled_script("session_a_s3new"), graph, pois, policy, build_oracle(),
        out / "audit.jsonl", digest=artifacts.digest_initial, clock=FrozenClock(),
    )
    return result, time.perf_counter() - start


class TestCriterion2PreferenceLearning:
    """Seven escalations of one new instruction become a Step-0 preference."""

    def test_all_seven_escalate_to_vlm(self, s3new_replay):
        result, _ = s3new_replay
        assert [e.resolution_method for e in result.entries] == [METHOD_VLM] * 7
        assert [e.node_id for e in result.entries] == [9, 9, 9, 9, 15, 9, 9]

    def test_promotion_frequency_and_consistency(self, s3new_replay, policy):
        result, _ = s3new_replay
        (pref,) = [
            p
            for p in group_preferences([e.to_dict() for e in result.entries], policy)
            if p.key == "relax sit"
        ]
        assert pref.frequency == 7
        assert pref.consistency == pytest.approx(6 / 7, abs=1e-4)
        assert pref.dominant_node == 9
        assert pref.ready_for_l3a_promotion

    def test_promotion_lands_in_digest(self, artifacts):
        assert artifacts.digest_initial.promotion_frequency("relax sit") == 0
        assert artifacts.digest_after_a.promotion_frequency("relax sit") == 7

    def test_session_b_uses_step0_for_all_three(self, artifacts):
        rows = [e for e in decisions_of(artifacts.session_b) if e.extra["scenario"] == "S3new"]
        assert len(rows) == 3
        assert all(e.resolution_method == METHOD_M3 for e in rows)
        assert all(e.node_id == 9 for e in rows)
        assert all(e.extra["step"] == 0 for e in rows)

    def test_learning_loop_under_ten_seconds(self, s3new_replay):
        _, elapsed = s3new_replay
        assert elapsed < 10.0


class TestCriterion3SemanticAccuracy:
    """Session B: every fast-path decision picks the semantically right node."""

    def test_33_m3_decisions_all_correct(self, artifacts):
        rows = [
            e for e in decisions_of(artifacts.session_b) if e.resolution_method == METHOD_M3
        ]
        assert len(rows) == 33
        for e in rows:
            assert e.node_id == EXPECTED_NODE_BY_SCENARIO[e.extra["scenario"]]

    def test_41_of_41_semantically_correct(self, artifacts):
        rows = decisions_of(artifacts.session_b)
        assert len(rows) == 41
        for e in rows:
            assert e.node_id == EXPECTED_NODE_BY_SCENARIO[e.extra["scenario"]]

    def test_confidence_interval_prints_documented_value(self):
        lower, upper = clopper_pearson_interval(33, 33)
        assert f"[{lower:.3f}, {upper:.3f}]" == "[0.894, 1.000]"


class TestCriterion4LatencyGap:
    """Fast path vs VLM: four orders of magnitude, U = 231, huge effect."""

    VLM_MS = [8552.0, 8203.0, 8935.0, 2566.0, 7921.0, 5317.0, 5634.0]
    FAST_MS = [0.065] + [0.056] * 16 + [0.074] * 16

    def test_measured_fast_path_under_one_ms(self, all_decisions):
        fast = [
            e.timing["resolve_ms"]
            for e in all_decisions
            if e.resolution_method != METHOD_VLM
        ]
        assert len(fast) == 72
        assert statistics.fmean(fast) < 1.0

    def test_ratio_exceeds_ten_thousand(self, all_decisions):
        fast = [
            e.timing["resolve_ms"]
            for e in all_decisions
            if e.resolution_method != METHOD_VLM
        ]
        vlm = [e.timing["vlm_ms"] for e in all_decisions if e.resolution_method == METHOD_VLM]
        assert statistics.fmean(vlm) / statistics.fmean(fast) > 1e4

    def test_mann_whitney_complete_separation(self):
        # tie-free variance, matching the reported analysis of these samples
        r = mann_whitney(
            self.VLM_MS, self.FAST_MS, alternative="greater", tie_correction=False
        )
        assert r.u_statistic == 231.0  # 7 x 33, no overlap
        assert r.z == pytest.approx(4.0935, abs=1e-3)
        assert r.p_value == pytest.approx(2.12e-5, rel=0.05)

    def test_session_a_vlm_latencies_match_audit(self, artifacts):
        rows = [
            e for e in decisions_of(artifacts.session_a)
            if e.extra["scenario"] == "S3new"
        ]
        assert [e.timing["vlm_ms"] for e in rows] == self.VLM_MS

    def test_cohens_d(self):
        d = cohens_d(self.VLM_MS, self.FAST_MS)
        assert d == pytest.approx(7.30, abs=0.02)

    def test_constructed_comparison_sample_moments(self):
        assert statistics.fmean(self.FAST_MS) == pytest.approx(0.065, abs=1e-9)
        assert statistics.stdev(self.FAST_MS) == pytest.approx(0.009, abs=1e-4)


class TestCriterion5MethodIndependence:
    """Navigation misses are independent of the resolution method."""

    def test_contingency_table(self, artifacts):
        rows = [e.to_dict() for e in decisions_of(artifacts.session_b)]
        assert contingency_by_method(rows) == [[28, 5], [8, 0]]

    def test_fisher_p_value(self):
        assert fishers_exact_2x2([[28, 5], [8, 0]]) == pytest.approx(0.563, abs=0.001)


class TestCriterion6FastPathCoverage:
    """72 of 82 decisions stay on the fast path; every escalation is platform C."""

    def test_method_split(self, all_decisions):
        counts = Counter(e.resolution_method for e in all_decisions)
        assert sum(counts.values()) == 82
        assert counts[METHOD_M3] + counts[METHOD_DETERMINISTIC] == 72
        assert counts[METHOD_VLM] == 10
        assert (72 / 82) == pytest.approx(0.88, abs=0.005)

    def test_all_escalations_on_platform_c(self, all_decisions):
        platforms = {
            e.platform_id for e in all_decisions if e.resolution_method == METHOD_VLM
        }
        assert platforms == {"xplorer-c"}


class TestCriterion7ConcurrentSessions:
    """Two platforms share one backend and one digest without interference."""

    def test_four_of_four_missions_complete_at_the_right_nodes(self, artifacts):
        nodes = {
            pid: [e.node_id for e in result.entries]
            for pid, result in artifacts.session_c.items()
        }
        assert nodes == {"xplorer-b": [8, 22], "xplorer-c": [0, 5]}
        for result in artifacts.session_c.values():
            assert all(e.nav_outcome == OUTCOME_COMPLETE for e in result.entries)

    def test_both_startups_report_the_same_digest_hash(self, artifacts):
        expected = artifacts.digest_after_a.md5()
        hashes = []
        for pid in artifacts.session_c:
            records = read_audit_file(
                artifacts.logs_dir / f"session_c_{pid.replace('-', '_')}.jsonl"
            )
            startups = [r for r in records if r.get("event") == "navigator_startup"]
            assert len(startups) == 1
            hashes.append(startups[0]["memory_digest_hash"])
        assert hashes == [expected, expected]

    def test_audit_files_are_platform_pure(self, artifacts):
        for pid in artifacts.session_c:
            records = read_audit_file(
                artifacts.logs_dir / f"session_c_{pid.replace('-', '_')}.jsonl"
            )
            assert {r["platform_id"] for r in records} == {pid}

    def test_concurrent_equals_sequential_per_platform(
        self, artifacts, graph, pois, policy, tmp_path
    ):
        # sequential rerun of the same scripts, same digest, same seeds
        sequential = {}
        for pid in artifacts.session_c:
            sequential[pid] = run_session(
                bundled_script(f"session_c_{pid.replace('-', '_')}"),
                graph, pois, policy, build_oracle(), tmp_path / f"{pid}.jsonl",
                digest=artifacts.digest_after_a, clock=FrozenClock(),
            )
        for pid, concurrent_result in artifacts.session_c.items():
            report = compare_runs(
                [e.to_dict() for e in concurrent_result.entries],
                [e.to_dict() for e in sequential[pid].entries],
            )
            assert report.matched, (pid, report)


class TestCriterion8SystemInvariants:
    """Cross-cutting invariants over every audit record of the protocol."""

    def test_every_decision_has_full_schema(self, artifacts):
        from semnav.executive import validate_audit_record

        for path in artifacts.audit_files:
            for lineno, record in enumerate(read_audit_file(path), start=1):
                validate_audit_record(record, str(path), lineno)

    def test_vlm_ms_zero_exactly_for_fast_path(self, all_decisions):
        for e in all_decisions:
            if e.resolution_method == METHOD_VLM:
                assert e.timing["vlm_ms"] > 0
            else:
                assert e.timing["vlm_ms"] == 0

    def test_decision_counts_by_platform(self, all_decisions):
        counts = Counter(e.platform_id for e in all_decisions)
        assert counts == {"xplorer-b": 43, "xplorer-c": 39}

    def test_digest_stays_within_limit(self, artifacts, policy):
        for digest in (artifacts.digest_initial, artifacts.digest_after_a):
            assert not digest.oversize
            assert len(digest.serialize()) <= policy.digest_char_limit

    def test_digest_promotion_sets(self, artifacts):
        assert len(artifacts.digest_initial.promotions) == 5
        keys = {p.key for p in artifacts.digest_after_a.promotions}
        assert keys == {
            "air fresh hot",
            "break needs personal place short",
            "female ward",
            "find fire got help something stop washroom",
            "male ward",
            "relax sit",
        }

    def test_extraction_reproduces_digest_hash(self, artifacts, pois, policy):
        # digest compiled in-test from seed+A logs matches the one the
        # refresh workflow produced during the experiment
        files = [
            artifacts.logs_dir / "seed_xplorer_c.jsonl",
            artifacts.logs_dir / "session_a_xplorer_c.jsonl",
        ]
        store = extract_memory(files, pois, ("xplorer-b", "xplorer-c"), policy)
        assert compile_digest(store, policy).md5() == artifacts.digest_after_a.md5()

    def test_replay_of_full_protocol_is_decision_stable(self, artifacts, tmp_path):
        from semnav.executive import FrozenClock
        from semnav.experiment import run_experiment

        again = run_experiment(tmp_path, clock=FrozenClock())
        for first, second in (
            (artifacts.session_a, again.session_a),
            (artifacts.session_b, again.session_b),
        ):
            a = sorted(canonical_decision(e.to_dict()) for e in first.entries)
            b = sorted(canonical_decision(e.to_dict()) for e in second.entries)
            assert a == b
        assert again.digest_after_a.md5() == artifacts.digest_after_a.md5()
