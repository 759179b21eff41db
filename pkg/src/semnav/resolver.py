"""Fast deterministic instruction resolution (the L3a cascade).

Seven ordered tests, Step 0 through Step 6. The first step that produces a
single unambiguous target returns immediately; when all seven fail the
caller receives an explicit escalation signal instead of a best guess.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .text import jaccard_similarity, normalize_text, tokenize
from .world import NavGraph, Policy, StaticPoi, euclidean, normalized_class_terms

METHOD_M3 = "L3a_m3_preference"
METHOD_DETERMINISTIC = "L3a_deterministic"
METHOD_VLM = "L3b_vlm"

PROXIMITY_KEYWORDS = ("closest", "nearest", "cel mai apropiat")

_NODE_REF = re.compile(r"\b(?:node|nodul)\s+(\d+)\b")


@dataclass(frozen=True)
class M3Match:
    jaccard: float
    preference_key: str
    frequency: int


@dataclass(frozen=True)
class Resolution:
    method: str
    node_id: int
    step: Optional[int] = None
    m3_match: Optional[M3Match] = None
    resolve_time_us: float = 0.0


@dataclass(frozen=True)
class EscalationSignal:
    reason: str
    resolve_time_us: float = 0.0


@dataclass
class ResolveTrace:
    """Records which steps were evaluated, for order/property tests."""

    steps_evaluated: list[int] = field(default_factory=list)


def match_m3_preference(
    tokens: set[str], digest, threshold: float
) -> Optional[tuple[int, float, str]]:
    """Step 0: Jaccard match of the instruction against promoted preferences.

    Returns (node_id, score, preference_key) only when every candidate at or
    above the threshold agrees on a single node; ties across different nodes
    reject the match and the cascade continues.
    """
    if digest is None:
        return None
    candidates: list[tuple[float, int, str]] = []
    for promo in digest.promotions:
        best = 0.0
        for example in promo.examples:
            score = jaccard_similarity(tokens, tokenize(normalize_text(example)))
            best = max(best, score)
        if best >= threshold:
            candidates.append((best, promo.node_id, promo.key))
    if not candidates:
        return None
    top = max(c[0] for c in candidates)
    winners = {c[1] for c in candidates if c[0] == top}
    if len(winners) != 1:
        return None
    score, node_id, key = max(candidates, key=lambda c: c[0])
    return node_id, score, key


def step_node_id(instruction: str, graph: NavGraph) -> Optional[int]:
    """Step 1: explicit "node <N>" / "nodul <N>" reference."""
    m = _NODE_REF.search(instruction)
    if not m:
        return None
    node_id = int(m.group(1))
    return node_id if graph.has_node(node_id) else None


def step_node_name(instruction: str, graph: NavGraph) -> Optional[int]:
    """Step 2: bidirectional substring containment against node names."""
    matches = [
        n.node_id
        for n in graph.nodes
        if normalize_text(n.name) in instruction or instruction in normalize_text(n.name)
    ]
    return matches[0] if len(matches) == 1 else None


def step_object_id(instruction: str, pois: Iterable[StaticPoi]) -> Optional[int]:
    """Step 3: substring containment against POI object ids."""
    matches = [p.nearest_node for p in pois if normalize_text(p.obj_id) in instruction]
    return matches[0] if len(matches) == 1 else None


def _value_mentioned(value: str, instruction_words: list[str]) -> bool:
    # whole-word containment: the normalized value's words must appear as a
    # contiguous run, so type=men never fires inside "department"
    words = normalize_text(value).split()
    if not words:
        return False
    n = len(words)
    return any(instruction_words[i : i + n] == words for i in range(len(instruction_words) - n + 1))


def step_attribute_scoring(instruction: str, pois: Iterable[StaticPoi]) -> Optional[int]:
    """Step 4: count attribute values present verbatim in the instruction.

    No synonym or affordance expansion; the unique highest scorer with at
    least one hit wins, ties reject.
    """
    words = instruction.split()
    scores: list[tuple[int, StaticPoi]] = []
    for poi in pois:
        score = sum(1 for v in poi.attributes.values() if _value_mentioned(v, words))
        scores.append((score, poi))
    if not scores:
        return None
    best = max(s for s, _ in scores)
    if best < 1:
        return None
    winners = [p for s, p in scores if s == best]
    return winners[0].nearest_node if len(winners) == 1 else None


def mentioned_classes(instruction: str, pois: Iterable[StaticPoi]) -> list[str]:
    """Classes from the static inventory lexically present in the instruction."""
    words = instruction.split()
    found = []
    for poi_class in sorted({p.poi_class for p in pois}):
        for term in normalized_class_terms(poi_class):
            if _value_mentioned(term, words):
                found.append(poi_class)
                break
    return found


def step_single_class(instruction: str, pois: list[StaticPoi]) -> Optional[int]:
    """Step 5: exactly one class mentioned and exactly one static instance."""
    classes = mentioned_classes(instruction, pois)
    if len(classes) != 1:
        return None
    instances = [p for p in pois if p.poi_class == classes[0]]
    return instances[0].nearest_node if len(instances) == 1 else None


def step_proximity(
    instruction: str, pois: list[StaticPoi], pose: tuple[float, float, float]
) -> Optional[int]:
    """Step 6: proximity keyword + one multi-instance class -> nearest instance.

    Exact distance ties break toward the lowest node id so the cascade stays
    deterministic.
    """
    if not any(kw in instruction for kw in PROXIMITY_KEYWORDS):
        return None
    classes = mentioned_classes(instruction, pois)
    if len(classes) != 1:
        return None
    instances = [p for p in pois if p.poi_class == classes[0]]
    if len(instances) <= 1:
        return None
    xy = (pose[0], pose[1])
    best = min(instances, key=lambda p: (euclidean(xy, p.position), p.nearest_node))
    return best.nearest_node


def resolve(
    instruction: str,
    graph: NavGraph,
    pois: list[StaticPoi],
    pose: tuple[float, float, float],
    digest=None,
    policy: Policy = Policy(),
    trace: Optional[ResolveTrace] = None,
) -> Resolution | EscalationSignal:
    """Run the cascade in strict order 0..6 and return the first match."""
    start = time.perf_counter()
    norm = normalize_text(instruction)
    tokens = tokenize(norm)
    failures: list[str] = []

    def elapsed_us() -> float:
        return (time.perf_counter() - start) * 1e6

    def note(step: int) -> None:
        if trace is not None:
            trace.steps_evaluated.append(step)

    note(0)
    m3 = match_m3_preference(tokens, digest, policy.jaccard_threshold)
    if m3 is not None:
        node_id, score, key = m3
        frequency = digest.promotion_frequency(key)
        return Resolution(
            METHOD_M3, node_id, step=0,
            m3_match=M3Match(score, key, frequency),
            resolve_time_us=elapsed_us(),
        )
    failures.append("step 0: no unambiguous preference match")

    deterministic_steps = (
        (1, lambda: step_node_id(norm, graph), "no valid node reference"),
        (2, lambda: step_node_name(norm, graph), "no unique node name containment"),
        (3, lambda: step_object_id(norm, pois), "no unique object id containment"),
        (4, lambda: step_attribute_scoring(norm, pois), "no unique attribute score winner"),
        (5, lambda: step_single_class(norm, pois), "no single-instance class mention"),
        (6, lambda: step_proximity(norm, pois, pose), "no proximity + multi-instance class"),
    )
    for step, fn, why in deterministic_steps:
        note(step)
        node_id = fn()
        if node_id is not None:
            return Resolution(
                METHOD_DETERMINISTIC, node_id, step=step, resolve_time_us=elapsed_us()
            )
        failures.append(f"step {step}: {why}")

    return EscalationSignal(reason="; ".join(failures), resolve_time_us=elapsed_us())
