"""Executive contract: affordance manifest, observation normalization,
action validation, audit logging and post-arrival confirmation routing.

Audit completeness is a hard guarantee: every decision becomes exactly one
flushed JSONL line with every schema field present (nulls explicit), and a
write failure aborts the session rather than dropping a record.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import vlm
from .world import NavGraph, Policy, StaticPoi, euclidean, pois_at_node

SCHEMA_VERSION = "2.0"

AUDIT_FIELDS = (
    "timestamp",
    "platform_id",
    "instruction",
    "resolution_method",
    "node_id",
    "validation",
    "nav_outcome",
    "timing",
    "confirmation",
    "extra",
    "images",
)


class Clock:
    """Wall clock; produces UTC ISO-8601 timestamps with millisecond precision."""

    def timestamp(self) -> str:
        return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


class FrozenClock(Clock):
    """Deterministic counter clock for byte-exact replay tests."""

    def __init__(self, start: int = 0) -> None:
        self._counter = itertools.count(start)

    def timestamp(self) -> str:
        return f"1970-01-01T00:00:{next(self._counter) % 60:02d}.000+00:00"


@dataclass(frozen=True)
class AffordanceManifest:
    nodes: tuple
    objects: tuple
    allowed_actions: frozenset[str]


@dataclass(frozen=True)
class Observation:
    pose: tuple[float, float, float]
    static_count: int
    dynamic_count: int
    nearest_nodes: tuple[tuple[str, int], ...]
    image: Optional[bytes] = None


@dataclass(frozen=True)
class ProposedAction:
    action: str
    target_node: int
    goal_distance: float


@dataclass(frozen=True)
class ValidationResult:
    allowed: bool
    failed_check: Optional[int] = None  # 1 allowlist, 2 node existence, 3 distance


def build_affordance_manifest(
    graph: NavGraph, merged_objects: Sequence, policy: Policy
) -> AffordanceManifest:
    """Rebuilt fresh each decision cycle from graph + merged objects + policy."""
    return AffordanceManifest(
        nodes=tuple(graph.nodes),
        objects=tuple(merged_objects),
        allowed_actions=policy.allowed_actions,
    )


def normalize_observation(
    pose: tuple[float, float, float],
    merged_objects: Sequence,
    image: Optional[bytes] = None,
) -> Observation:
    static = [o for o in merged_objects if o.source == "static"]
    dynamic = [o for o in merged_objects if o.source != "static"]
    nearest = tuple(
        (getattr(o, "obj_id", o.poi_class), o.nearest_node) for o in merged_objects
    )
    return Observation(
        pose=pose,
        static_count=len(static),
        dynamic_count=len(dynamic),
        nearest_nodes=nearest,
        image=image,
    )


def validate_action(
    action: ProposedAction, manifest: AffordanceManifest, policy: Policy
) -> ValidationResult:
    """Three ordered checks; the first failure is recorded and wins."""
    if action.action not in manifest.allowed_actions:
        return ValidationResult(False, failed_check=1)
    if all(n.node_id != action.target_node for n in manifest.nodes):
        return ValidationResult(False, failed_check=2)
    if action.goal_distance > policy.max_goal_distance:
        return ValidationResult(False, failed_check=3)
    return ValidationResult(True)


@dataclass
class ConfirmationRecord:
    confirmation_method: str  # pose_based | vlm_landmark | vlm_contextual | vlm_architectural
    confirmed: bool
    payload: dict


def confirm_arrival(
    target_node: int,
    graph: NavGraph,
    pois: Sequence[StaticPoi],
    end_pose: tuple[float, float, float],
    policy: Policy,
    backend=None,
    image: Optional[bytes] = None,
) -> ConfirmationRecord:
    """Route post-arrival confirmation by the target's visual signature type.

    The result is recorded in the audit entry only; it never alters the
    navigation outcome.
    """
    here = pois_at_node(pois, target_node)
    visual = [p for p in here if p.signature_type != "none"]
    if not visual:
        node = graph.node(target_node)
        distance = euclidean((end_pose[0], end_pose[1]), (node.x, node.y))
        return ConfirmationRecord(
            confirmation_method="pose_based",
            confirmed=distance <= policy.confirmation_radius,
            payload={"distance_m": round(distance, 3), "radius_m": policy.confirmation_radius},
        )

    signature = visual[0].signature_type
    method = f"vlm_{signature}"
    expected = [p.poi_class for p in visual]
    prompt = vlm.build_confirmation_prompt(target_node, expected, image=image)
    try:
        raw, latency_ms = vlm.query_backend(backend, prompt)
    except vlm.BackendError as exc:
        return ConfirmationRecord(
            confirmation_method=method,
            confirmed=False,
            payload={"anomaly": True, "error": str(exc)},
        )
    report = vlm.parse_confirmation_response(raw)
    payload = {
        "at_target": report.at_target,
        "confidence": report.confidence,
        "scene_description": report.scene_description,
        "reasoning": report.reasoning,
        "identified_objects": report.identified_objects,
        "inference_ms": latency_ms,
    }
    if report.parse_anomaly:
        payload["anomaly"] = True
    return ConfirmationRecord(
        confirmation_method=method,
        confirmed=report.at_target and not report.parse_anomaly,
        payload=payload,
    )


@dataclass
class AuditEntry:
    timestamp: str
    platform_id: str
    instruction: str
    resolution_method: str
    node_id: Optional[int]
    validation: dict
    nav_outcome: str
    timing: dict  # resolve_ms, vlm_ms (0 if L3a), nav_total_s
    confirmation: dict
    extra: dict
    images: dict

    def __post_init__(self) -> None:
        if not self.platform_id:
            raise ValueError("platform_id must be non-empty")
        is_vlm = self.resolution_method == "L3b_vlm"
        if not is_vlm and self.timing.get("vlm_ms", 0) != 0:
            raise ValueError("vlm_ms must be 0 exactly when the decision was not L3b")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in AUDIT_FIELDS}

    @classmethod
    def from_dict(cls, record: dict) -> "AuditEntry":
        return cls(**{name: record[name] for name in AUDIT_FIELDS})


@dataclass
class SessionEvent:
    kind: str  # session_start | navigator_startup | shutdown
    timestamp: str
    platform_id: str
    version: str
    memory_digest_hash: str  # MD5 hex or "none"
    policy: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "event": self.kind,
            "timestamp": self.timestamp,
            "platform_id": self.platform_id,
            "version": self.version,
            "memory_digest_hash": self.memory_digest_hash,
            "policy": self.policy,
        }


def is_event(record: dict) -> bool:
    return "event" in record


class AuditLog:
    """One JSONL sink per (session, platform); append-with-flush, never reorders."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: AuditEntry | SessionEvent) -> None:
        line = json.dumps(record.to_dict(), sort_keys=True)
        self._fh.write(line + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "AuditLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_audit_file(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed audit line: {exc}") from exc
    return records


def validate_audit_record(record: dict, path: str = "", lineno: int = 0) -> None:
    """Schema check used by the extractor and the refresh workflow."""
    where = f"{path}:{lineno}: " if path else ""
    if is_event(record):
        for key in ("timestamp", "platform_id", "version", "memory_digest_hash"):
            if key not in record:
                raise ValueError(f"{where}event record missing field {key!r}")
        return
    for key in AUDIT_FIELDS:
        if key not in record:
            raise ValueError(f"{where}decision record missing field {key!r}")
    for key in ("resolve_ms", "vlm_ms", "nav_total_s"):
        if key not in record["timing"]:
            raise ValueError(f"{where}timing missing field {key!r}")


def make_timestamp(clock: Optional[Clock] = None) -> str:
    return (clock or Clock()).timestamp()
