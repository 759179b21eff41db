"""Session harness: scripted missions, synthetic navigation outcomes,
concurrent multi-platform runs and an audit-level integrity check.

Navigation is not physically simulated; a seeded outcome model draws
success/failure and a terminal pose per mission, so entire sessions replay
deterministically from (script, seed).
"""
from __future__ import annotations

import csv
import json
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import vlm
from .executive import (
    AuditEntry,
    AuditLog,
    Clock,
    ProposedAction,
    SessionEvent,
    build_affordance_manifest,
    confirm_arrival,
    validate_action,
)
from .resolver import EscalationSignal, METHOD_VLM, resolve
from .world import NavGraph, Policy, StaticPoi, euclidean, merge_semantic_objects

OUTCOME_COMPLETE = "mission_complete"
OUTCOME_MISSED = "missed"
OUTCOME_BLOCKED = "blocked"
OUTCOME_ABORTED = "aborted"

NAV_SPEED_MPS = 0.5  # synthetic cruise speed used to derive nav_total_s


@dataclass(frozen=True)
class Mission:
    instruction: str
    pose: tuple[float, float, float]
    scenario: str = ""
    success_prob: float = 1.0
    return_command: bool = False


@dataclass(frozen=True)
class ScenarioScript:
    platform_id: str
    missions: tuple[Mission, ...]
    seed: int = 0


def load_script(path: str | Path) -> ScenarioScript:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    missions = tuple(
        Mission(
            instruction=m["instruction"],
            pose=tuple(float(v) for v in m["pose"]),
            scenario=m.get("scenario", ""),
            success_prob=float(m.get("success_prob", 1.0)),
            return_command=bool(m.get("return_command", False)),
        )
        for m in doc["missions"]
    )
    return ScenarioScript(
        platform_id=doc["platform_id"], missions=missions, seed=int(doc.get("seed", 0))
    )


@dataclass(frozen=True)
class NavResult:
    outcome: str
    end_pose: tuple[float, float, float]
    nav_total_s: float
    xy_error_m: float


class NavOutcomeModel:
    """Seeded synthetic terminal-state model.

    Successes land near the goal (xy error ~ 0.30 m on average, inside the
    pose-confirmation radius); failures strand the platform well outside it
    (~ 3.77 m on average).
    """

    SUCCESS_XY_MEAN = 0.30
    SUCCESS_XY_SD = 0.08
    FAILURE_XY_MEAN = 3.77
    FAILURE_XY_SD = 0.45

    def __init__(self, seed: int = 0) -> None:
        self.rng = np.random.default_rng(seed)

    def simulate(
        self,
        graph: NavGraph,
        target_node: int,
        start_pose: tuple[float, float, float],
        success_prob: float,
    ) -> NavResult:
        node = graph.node(target_node)
        success = bool(self.rng.random() < success_prob)
        if success:
            error = max(0.02, float(self.rng.normal(self.SUCCESS_XY_MEAN, self.SUCCESS_XY_SD)))
        else:
            error = max(2.0, float(self.rng.normal(self.FAILURE_XY_MEAN, self.FAILURE_XY_SD)))
        angle = float(self.rng.uniform(0.0, 2.0 * np.pi))
        end = (
            node.x + error * float(np.cos(angle)),
            node.y + error * float(np.sin(angle)),
            float(self.rng.uniform(-np.pi, np.pi)),
        )
        distance = euclidean((start_pose[0], start_pose[1]), (node.x, node.y))
        nav_total_s = round(distance / NAV_SPEED_MPS + float(self.rng.uniform(2.0, 6.0)), 3)
        return NavResult(
            outcome=OUTCOME_COMPLETE if success else OUTCOME_MISSED,
            end_pose=(round(end[0], 3), round(end[1], 3), round(end[2], 3)),
            nav_total_s=nav_total_s,
            xy_error_m=round(error, 3),
        )


def step_navigation(
    model: NavOutcomeModel,
    graph: NavGraph,
    target_node: int,
    start_pose: tuple[float, float, float],
    success_prob: float = 1.0,
) -> NavResult:
    return model.simulate(graph, target_node, start_pose, success_prob)


@dataclass
class SessionResult:
    platform_id: str
    entries: list[AuditEntry] = field(default_factory=list)


def _blocked_confirmation() -> dict:
    return {"confirmation_method": "none", "confirmed": False, "payload": {}}


def run_session(
    script: ScenarioScript,
    graph: NavGraph,
    pois: Sequence[StaticPoi],
    policy: Policy,
    backend,
    audit_path: str | Path,
    digest=None,
    outcome_model: Optional[NavOutcomeModel] = None,
    clock: Optional[Clock] = None,
    context=None,
    detections: Sequence = (),
    monitor_csv: Optional[str | Path] = None,
    version: str = "1.0.0",
    model_name: str = "scripted-oracle",
    policy_path: str = "policy.yaml",
) -> SessionResult:
    """Drive one platform through its mission script, auditing every decision.

    ``context``, when given, supplies live pose/objects via the HTTP bridge;
    otherwise the scripted mission poses are used directly.
    """
    clock = clock or Clock()
    model = outcome_model or NavOutcomeModel(script.seed)
    result = SessionResult(platform_id=script.platform_id)
    digest_hash = digest.md5() if digest is not None else "none"
    meta = {
        "model": model_name,
        "policy_path": policy_path,
        "architecture": "fast-path cascade + VLM fallback",
    }

    monitor = None
    monitor_fh = None
    if monitor_csv is not None:
        monitor_fh = open(monitor_csv, "w", newline="", encoding="utf-8")
        monitor = csv.writer(monitor_fh)
        monitor.writerow(
            ["timestamp", "platform_id", "instruction", "method", "node_id", "nav_outcome", "confirmed"]
        )

    with AuditLog(audit_path) as log:
        log.append(
            SessionEvent(
                "navigator_startup", clock.timestamp(), script.platform_id, version, digest_hash, meta
            )
        )
        for mission in script.missions:
            pose = tuple(context.pose()) if context is not None else mission.pose
            merged = merge_semantic_objects(pois, detections, policy.detection_dedup_radius)
            resolved = resolve(mission.instruction, graph, pois, pose, digest, policy)

            extra: dict = {
                "scenario": mission.scenario,
                "return_command": mission.return_command,
                "start_pose": [round(v, 3) for v in pose],
            }
            vlm_ms = 0.0
            if isinstance(resolved, EscalationSignal):
                method = METHOD_VLM
                extra["escalation_reason"] = resolved.reason
                prompt = vlm.build_decision_prompt(
                    mission.instruction, pose, graph, merged, digest
                )
                raw, vlm_ms = vlm.query_backend(backend, prompt)
                decision = vlm.parse_decision_response(raw, vlm_ms)
                node_id = decision.node_id
                extra["vlm_reason"] = decision.reason
                if decision.parse_anomaly:
                    extra["parse_anomaly"] = True
                resolve_ms = round(resolved.resolve_time_us / 1000.0, 4)
            else:
                method = resolved.method
                node_id = resolved.node_id
                extra["step"] = resolved.step
                if resolved.m3_match is not None:
                    extra["m3_match_info"] = {
                        "jaccard": round(resolved.m3_match.jaccard, 4),
                        "preference_key": resolved.m3_match.preference_key,
                        "frequency": resolved.m3_match.frequency,
                    }
                resolve_ms = round(resolved.resolve_time_us / 1000.0, 4)

            if node_id is None:
                validation = {"allowed": False, "failed_check": None}
                nav_outcome = OUTCOME_ABORTED
                confirmation = _blocked_confirmation()
                nav_total_s = 0.0
            else:
                manifest = build_affordance_manifest(graph, merged, policy)
                goal = graph.node(node_id) if graph.has_node(node_id) else None
                goal_distance = (
                    euclidean((pose[0], pose[1]), (goal.x, goal.y)) if goal else float("inf")
                )
                action = ProposedAction("NavigateToPose", node_id, goal_distance)
                verdict = validate_action(action, manifest, policy)
                validation = {"allowed": verdict.allowed, "failed_check": verdict.failed_check}
                if not verdict.allowed:
                    nav_outcome = OUTCOME_BLOCKED
                    confirmation = _blocked_confirmation()
                    nav_total_s = 0.0
                else:
                    nav = step_navigation(model, graph, node_id, pose, mission.success_prob)
                    nav_outcome = nav.outcome
                    nav_total_s = nav.nav_total_s
                    extra["xy_error_m"] = nav.xy_error_m
                    extra["end_pose"] = list(nav.end_pose)
                    extra["distance_traveled_m"] = round(goal_distance, 3)
                    record = confirm_arrival(
                        node_id, graph, pois, nav.end_pose, policy, backend
                    )
                    confirmation = {
                        "confirmation_method": record.confirmation_method,
                        "confirmed": record.confirmed,
                        "payload": record.payload,
                    }

            entry = AuditEntry(
                timestamp=clock.timestamp(),
                platform_id=script.platform_id,
                instruction=mission.instruction,
                resolution_method=method,
                node_id=node_id,
                validation=validation,
                nav_outcome=nav_outcome,
                timing={"resolve_ms": resolve_ms, "vlm_ms": vlm_ms, "nav_total_s": nav_total_s},
                confirmation=confirmation,
                extra=extra,
                images={"start": None, "finish": None},
            )
            log.append(entry)
            result.entries.append(entry)
            if monitor is not None:
                monitor.writerow(
                    [
                        entry.timestamp,
                        entry.platform_id,
                        entry.instruction,
                        entry.resolution_method,
                        entry.node_id,
                        entry.nav_outcome,
                        entry.confirmation["confirmed"],
                    ]
                )
        log.append(
            SessionEvent(
                "shutdown", clock.timestamp(), script.platform_id, version, digest_hash, meta
            )
        )
    if monitor_fh is not None:
        monitor_fh.close()
    return result


# ---------------------------------------------------------------------------
# concurrent runs


@dataclass
class ConcurrentJob:
    script: ScenarioScript
    audit_path: str | Path
    digest: object = None
    outcome_seed: Optional[int] = None  # defaults to the script seed


def run_concurrent(
    jobs: Sequence[ConcurrentJob],
    graph: NavGraph,
    pois: Sequence[StaticPoi],
    policy: Policy,
    backend,
    clock: Optional[Clock] = None,
) -> dict[str, SessionResult]:
    """Run several platforms in parallel against one shared backend.

    Each platform gets its own seeded outcome model, so per-platform audit
    content is independent of thread interleaving (up to volatile fields).
    """
    results: dict[str, SessionResult] = {}
    errors: list[BaseException] = []
    lock = threading.Lock()

    def work(job: ConcurrentJob) -> None:
        try:
            seed = job.outcome_seed if job.outcome_seed is not None else job.script.seed
            result = run_session(
                job.script,
                graph,
                pois,
                policy,
                backend,
                job.audit_path,
                digest=job.digest,
                outcome_model=NavOutcomeModel(seed),
                clock=clock,
            )
            with lock:
                results[job.script.platform_id] = result
        except BaseException as exc:  # surfaced to the caller below
            with lock:
                errors.append(exc)

    threads = [threading.Thread(target=work, args=(job,)) for job in jobs]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return results


# ---------------------------------------------------------------------------
# integrity check: concurrent vs sequential audit equivalence


@dataclass
class IntegrityReport:
    matched: bool
    only_in_first: list[str]
    only_in_second: list[str]


def canonical_decision(record: dict) -> str:
    """Strip wall-clock-derived fields so runs can be compared as multisets."""
    doc = json.loads(json.dumps(record))  # deep copy
    doc.pop("timestamp", None)
    doc.get("timing", {}).pop("resolve_ms", None)
    payload = doc.get("confirmation", {}).get("payload", {})
    payload.pop("inference_ms", None)
    return json.dumps(doc, sort_keys=True)


def compare_runs(first: Sequence[dict], second: Sequence[dict]) -> IntegrityReport:
    a = Counter(canonical_decision(r) for r in first)
    b = Counter(canonical_decision(r) for r in second)
    only_a = sorted((a - b).elements())
    only_b = sorted((b - a).elements())
    return IntegrityReport(matched=not only_a and not only_b, only_in_first=only_a, only_in_second=only_b)
