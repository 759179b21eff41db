"""Offline memory extraction, preference promotion and digest compilation.

The extractor is a snapshot-rebuild batch process: every run regenerates
all five category files from the audit logs it is given, so identical
inputs produce byte-identical outputs. The compiled digest is the only
artifact consumed at runtime (Step 0 index + prompt prefix).
"""
from __future__ import annotations

import difflib
import hashlib
import json
import logging
import os
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean
from typing import Iterable, Optional, Sequence

from .executive import is_event, read_audit_file, validate_audit_record
from .resolver import METHOD_VLM
from .text import jaccard_similarity, normalize_text, token_signature, tokenize
from .vlm import CONFIDENCE_VALUES
from .world import Policy, StaticPoi

log = logging.getLogger(__name__)

DIGEST_FILENAME = "digest.json"


# ---------------------------------------------------------------------------
# category records


@dataclass
class M1EntityRecord:
    obj_id: str
    node_id: int
    signature_type: str
    visit_count: int
    success_rate: float
    mean_nav_time_s: float
    mean_confidence: float
    visit_count_by_platform: dict
    success_rate_by_platform: dict
    unreliable: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class M2Pattern:
    node_id: int
    keywords: list[str]  # sorted
    observation_count: int
    confidence: float
    description: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class M3Preference:
    key: str
    examples: list[str]  # sorted unique raw instructions
    frequency: int
    dominant_node: int
    consistency: float
    method_counts: dict
    ready_for_l3a_promotion: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class M4Platform:
    platform_id: str
    version: str
    model: str
    policy_path: str
    signature_counts: dict
    architecture: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class M5TaskSummary:
    platform_id: str
    instruction: str
    method: str
    node_id: Optional[int]
    outcome: str
    resolve_ms: float
    vlm_ms: float
    nav_total_s: float
    anomalies: list[str]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class MemoryStore:
    m1: list[M1EntityRecord]
    m2: list[M2Pattern]
    m3: list[M3Preference]
    m4: dict[str, M4Platform]
    m5: dict[str, list[M5TaskSummary]]
    task_count: int
    success_rate: float


# ---------------------------------------------------------------------------
# digest


@dataclass(frozen=True)
class DigestEntity:
    obj_id: str
    node_id: int
    visits: int
    success_rate: float
    signature_type: str


@dataclass(frozen=True)
class DigestPattern:
    node_id: int
    keywords: tuple[str, ...]
    confidence: float


@dataclass(frozen=True)
class DigestPromotion:
    key: str
    examples: tuple[str, ...]
    node_id: int
    frequency: int


@dataclass(frozen=True)
class Digest:
    entities: tuple[DigestEntity, ...]
    patterns: tuple[DigestPattern, ...]
    promotions: tuple[DigestPromotion, ...]
    stats: dict
    oversize: bool = False  # promotions alone exceeded the char limit

    def promotion_frequency(self, key: str) -> int:
        for p in self.promotions:
            if p.key == key:
                return p.frequency
        return 0

    def serialize(self) -> str:
        doc = {
            "entities": [e.__dict__ for e in self.entities],
            "patterns": [
                {"node_id": p.node_id, "keywords": list(p.keywords), "confidence": p.confidence}
                for p in self.patterns
            ],
            "promotions": [
                {
                    "key": p.key,
                    "examples": list(p.examples),
                    "node_id": p.node_id,
                    "frequency": p.frequency,
                }
                for p in self.promotions
            ],
            "stats": self.stats,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def md5(self) -> str:
        return hashlib.md5(self.serialize().encode("utf-8")).hexdigest()


EMPTY_DIGEST = Digest(entities=(), patterns=(), promotions=(), stats={"task_count": 0, "success_rate": 0.0})


def load_digest(path: str | Path) -> Optional[Digest]:
    """Tolerant digest loader: missing/corrupt/empty degrades to None."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
        doc = json.loads(raw)
        entities = tuple(DigestEntity(**e) for e in doc["entities"])
        patterns = tuple(
            DigestPattern(p["node_id"], tuple(p["keywords"]), p["confidence"])
            for p in doc["patterns"]
        )
        promotions = tuple(
            DigestPromotion(p["key"], tuple(p["examples"]), p["node_id"], p["frequency"])
            for p in doc["promotions"]
        )
        return Digest(entities, patterns, promotions, doc["stats"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        log.warning("digest %s unusable (%s); continuing without memory", path, exc)
        return None


def write_digest(digest: Digest, path: str | Path) -> str:
    """Atomic write (new file + rename); returns the MD5 of the final bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(digest.serialize(), encoding="utf-8")
    os.replace(tmp, path)
    return digest.md5()


# ---------------------------------------------------------------------------
# extraction


def _confidence_value(confirmation: dict) -> float:
    if confirmation.get("confirmation_method") == "pose_based":
        return 1.0 if confirmation.get("confirmed") else 0.0
    return CONFIDENCE_VALUES.get(confirmation.get("payload", {}).get("confidence", ""), 0.0)


def _read_all(audit_files: Sequence[str | Path]) -> tuple[list[dict], list[dict]]:
    decisions: list[dict] = []
    events: list[dict] = []
    for path in audit_files:
        records = read_audit_file(path)
        for lineno, record in enumerate(records, start=1):
            validate_audit_record(record, str(path), lineno)
            (events if is_event(record) else decisions).append(record)
    return decisions, events


def extract_m1(
    decisions: list[dict], pois: Sequence[StaticPoi], platforms: Sequence[str]
) -> list[M1EntityRecord]:
    records = []
    for poi in sorted(pois, key=lambda p: p.obj_id):
        visits = [d for d in decisions if d["node_id"] == poi.nearest_node]
        confirmed = [d for d in visits if d["confirmation"].get("confirmed")]
        by_platform_visits = Counter(d["platform_id"] for d in visits)
        by_platform_success: dict[str, float] = {}
        for pid in platforms:
            pvisits = [d for d in visits if d["platform_id"] == pid]
            if pvisits:
                by_platform_success[pid] = round(
                    sum(1 for d in pvisits if d["confirmation"].get("confirmed")) / len(pvisits), 4
                )
        records.append(
            M1EntityRecord(
                obj_id=poi.obj_id,
                node_id=poi.nearest_node,
                signature_type=poi.signature_type,
                visit_count=len(visits),
                success_rate=round(len(confirmed) / len(visits), 4) if visits else 0.0,
                mean_nav_time_s=round(mean(d["timing"]["nav_total_s"] for d in visits), 3)
                if visits
                else 0.0,
                mean_confidence=round(mean(_confidence_value(d["confirmation"]) for d in visits), 4)
                if visits
                else 0.0,
                visit_count_by_platform={p: by_platform_visits[p] for p in sorted(by_platform_visits)},
                success_rate_by_platform=by_platform_success,
                unreliable=len(visits) < 2,
            )
        )
    return records


def cluster_observations(
    scene_texts_by_node: dict[int, list[tuple[str, float]]], policy: Policy
) -> list[M2Pattern]:
    """Greedy seeded clustering of scene texts per node.

    Each observation joins the first cluster whose seed keyword set reaches
    the Jaccard threshold, otherwise it founds a new cluster. Clusters with
    enough observations and high enough mean confidence become patterns.
    """
    patterns: list[M2Pattern] = []
    for node_id in sorted(scene_texts_by_node):
        clusters: list[dict] = []  # {"seed": set, "confidences": [...], "count": int}
        for text, confidence in scene_texts_by_node[node_id]:
            keywords = tokenize(normalize_text(text))
            if not keywords:
                continue
            for cluster in clusters:
                if jaccard_similarity(cluster["seed"], keywords) >= policy.m2.cluster_jaccard:
                    cluster["count"] += 1
                    cluster["confidences"].append(confidence)
                    break
            else:
                clusters.append({"seed": keywords, "count": 1, "confidences": [confidence]})
        for cluster in clusters:
            conf = mean(cluster["confidences"])
            if cluster["count"] >= policy.m2.min_observations and conf >= policy.m2.min_confidence:
                keywords = sorted(cluster["seed"])
                patterns.append(
                    M2Pattern(
                        node_id=node_id,
                        keywords=keywords,
                        observation_count=cluster["count"],
                        confidence=round(conf, 4),
                        description=" ".join(keywords),
                    )
                )
    return patterns


def extract_m2(decisions: list[dict], policy: Policy) -> list[M2Pattern]:
    scenes: dict[int, list[tuple[str, float]]] = defaultdict(list)
    for d in decisions:
        payload = d["confirmation"].get("payload") or {}
        text = payload.get("scene_description", "")
        if text and d["node_id"] is not None:
            scenes[d["node_id"]].append((text, _confidence_value(d["confirmation"])))
    return cluster_observations(dict(scenes), policy)


def group_preferences(decisions: Iterable[dict], policy: Policy) -> list[M3Preference]:
    """Group decisions by token signature and apply the promotion criteria."""
    groups: dict[str, list[dict]] = defaultdict(list)
    for d in decisions:
        if d["node_id"] is None:
            continue
        key = token_signature(d["instruction"])
        if key:
            groups[key].append(d)
    preferences = []
    for key in sorted(groups):
        members = groups[key]
        node_counts = Counter(d["node_id"] for d in members)
        top = max(node_counts.values())
        dominant = min(n for n, c in node_counts.items() if c == top)
        consistency = node_counts[dominant] / len(members)
        method_counts = Counter(d["resolution_method"] for d in members)
        promoted = (
            len(members) >= policy.promotion.min_frequency
            and consistency >= policy.promotion.min_consistency
            and method_counts.get(METHOD_VLM, 0) >= policy.promotion.min_l3b_count
        )
        preferences.append(
            M3Preference(
                key=key,
                examples=sorted({d["instruction"] for d in members}),
                frequency=len(members),
                dominant_node=dominant,
                consistency=round(consistency, 4),
                method_counts=dict(sorted(method_counts.items())),
                ready_for_l3a_promotion=promoted,
            )
        )
    return preferences


def extract_m4(events: list[dict], platforms: Sequence[str], pois: Sequence[StaticPoi]) -> dict:
    signature_counts = Counter(p.signature_type for p in pois)
    m4 = {}
    for pid in platforms:
        startups = [
            e for e in events if e.get("event") == "navigator_startup" and e["platform_id"] == pid
        ]
        if not startups:
            continue
        latest = startups[-1]
        meta = latest.get("policy", {})
        m4[pid] = M4Platform(
            platform_id=pid,
            version=latest.get("version", ""),
            model=meta.get("model", ""),
            policy_path=meta.get("policy_path", ""),
            signature_counts=dict(sorted(signature_counts.items())),
            architecture=meta.get("architecture", ""),
        )
    return m4


def extract_m5(decisions: list[dict]) -> dict[str, list[M5TaskSummary]]:
    m5: dict[str, list[M5TaskSummary]] = defaultdict(list)
    for d in decisions:
        anomalies = []
        if d["confirmation"].get("payload", {}).get("anomaly"):
            anomalies.append("confirmation_anomaly")
        if d["extra"].get("parse_anomaly"):
            anomalies.append("vlm_parse_anomaly")
        if not d["validation"]["allowed"]:
            anomalies.append(f"blocked_check_{d['validation']['failed_check']}")
        if d["nav_outcome"] != "mission_complete":
            anomalies.append("nav_missed")
        m5[d["platform_id"]].append(
            M5TaskSummary(
                platform_id=d["platform_id"],
                instruction=d["instruction"],
                method=d["resolution_method"],
                node_id=d["node_id"],
                outcome=d["nav_outcome"],
                resolve_ms=d["timing"]["resolve_ms"],
                vlm_ms=d["timing"]["vlm_ms"],
                nav_total_s=d["timing"]["nav_total_s"],
                anomalies=anomalies,
            )
        )
    return dict(m5)


def extract_memory(
    audit_files: Sequence[str | Path],
    pois: Sequence[StaticPoi],
    platforms: Sequence[str] = (),
    policy: Policy = Policy(),
) -> MemoryStore:
    """Rebuild all five memory categories from scratch."""
    decisions, events = _read_all(sorted(str(p) for p in audit_files))
    known = set(platforms)
    if known:
        for d in decisions:
            if d["platform_id"] not in known:
                warnings.warn(
                    f"unknown platform_id {d['platform_id']!r}; aggregated globally only",
                    stacklevel=2,
                )
                break
    confirmed = sum(1 for d in decisions if d["confirmation"].get("confirmed"))
    return MemoryStore(
        m1=extract_m1(decisions, pois, platforms),
        m2=extract_m2(decisions, policy),
        m3=group_preferences(decisions, policy),
        m4=extract_m4(events, platforms, pois),
        m5=extract_m5(decisions),
        task_count=len(decisions),
        success_rate=round(confirmed / len(decisions), 4) if decisions else 0.0,
    )


def write_memory_files(store: MemoryStore, out_dir: str | Path, platforms: Sequence[str] = ()) -> list[Path]:
    """Write M1..M5 JSONL files; per-platform M4/M5 when platforms are given."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(name: str, records: Iterable) -> None:
        path = out / name
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        written.append(path)

    dump("M1.jsonl", store.m1)
    dump("M2.jsonl", store.m2)
    dump("M3.jsonl", store.m3)
    if platforms:
        for pid in platforms:
            if pid in store.m4:
                dump(f"M4_{pid}.jsonl", [store.m4[pid]])
            dump(f"M5_{pid}.jsonl", store.m5.get(pid, []))
    else:
        dump("M4.jsonl", store.m4.values())
        dump("M5.jsonl", [r for rs in store.m5.values() for r in rs])
    return written


def compile_digest(store: MemoryStore, policy: Policy = Policy()) -> Digest:
    """Top-5 entities, top-3 patterns, every promoted preference, global stats.

    If the canonical serialization exceeds the char limit, entities trim to 3
    and patterns to 2. Promotions are never trimmed; if they alone exceed the
    limit the digest is emitted oversize with a hard warning.
    """
    entities = [
        DigestEntity(r.obj_id, r.node_id, r.visit_count, r.success_rate, r.signature_type)
        for r in sorted(store.m1, key=lambda r: (-r.visit_count, r.obj_id))
        if r.visit_count > 0
    ]
    patterns = [
        DigestPattern(p.node_id, tuple(p.keywords), p.confidence)
        for p in sorted(store.m2, key=lambda p: (-p.confidence, p.node_id, p.description))
    ]
    promotions = tuple(
        DigestPromotion(p.key, tuple(p.examples), p.dominant_node, p.frequency)
        for p in store.m3
        if p.ready_for_l3a_promotion
    )
    stats = {"task_count": store.task_count, "success_rate": store.success_rate}

    digest = Digest(tuple(entities[:5]), tuple(patterns[:3]), promotions, stats)
    if len(digest.serialize()) > policy.digest_char_limit:
        digest = Digest(tuple(entities[:3]), tuple(patterns[:2]), promotions, stats)
    if len(digest.serialize()) > policy.digest_char_limit:
        promotions_only = Digest((), (), promotions, stats)
        if len(promotions_only.serialize()) > policy.digest_char_limit:
            log.warning(
                "digest promotions alone exceed the %d-char limit; emitting oversize",
                policy.digest_char_limit,
            )
            return Digest((), (), promotions, stats, oversize=True)
        return promotions_only
    return digest


# ---------------------------------------------------------------------------
# refresh workflow


@dataclass
class RefreshReport:
    validated_files: list[str]
    old_md5: Optional[str]
    new_md5: str
    diff: list[str]
    changed: bool

    def render(self) -> str:
        lines = [f"validated {len(self.validated_files)} audit file(s)"]
        if self.changed:
            lines.append("digest diff:")
            lines.extend(self.diff)
        else:
            lines.append("no diff")
        lines.append(f"digest md5: {self.new_md5}")
        return "\n".join(lines)


def _pretty(serialized: str) -> list[str]:
    return json.dumps(json.loads(serialized), indent=1, sort_keys=True).splitlines()


def refresh_workflow(
    logs_dir: str | Path,
    memory_dir: str | Path,
    pois: Sequence[StaticPoi],
    platforms: Sequence[str] = (),
    policy: Policy = Policy(),
) -> RefreshReport:
    """Validate -> backup -> extract -> diff -> hash.

    Validation failure aborts before any memory file is replaced.
    """
    logs_dir, memory_dir = Path(logs_dir), Path(memory_dir)
    audit_files = sorted(str(p) for p in logs_dir.glob("*.jsonl"))

    # step 1: validate everything before touching the memory directory
    for path in audit_files:
        for lineno, record in enumerate(read_audit_file(path), start=1):
            validate_audit_record(record, path, lineno)

    digest_path = memory_dir / DIGEST_FILENAME
    old_serialized = None
    old_md5 = None
    if digest_path.exists():
        old_serialized = digest_path.read_text(encoding="utf-8")
        old_md5 = hashlib.md5(old_serialized.encode("utf-8")).hexdigest()
        backup = digest_path.with_suffix(".json.bak")
        backup.write_text(old_serialized, encoding="utf-8")

    # step 2: extract with platform demultiplexing
    store = extract_memory(audit_files, pois, platforms, policy)
    write_memory_files(store, memory_dir, platforms)
    digest = compile_digest(store, policy)
    new_md5 = write_digest(digest, digest_path)

    # step 3: diff and hash
    old_lines = _pretty(old_serialized) if old_serialized else []
    diff = list(
        difflib.unified_diff(old_lines, _pretty(digest.serialize()), "old_digest", "new_digest", lineterm="")
    )
    return RefreshReport(
        validated_files=audit_files,
        old_md5=old_md5,
        new_md5=new_md5,
        diff=diff,
        changed=bool(diff),
    )
