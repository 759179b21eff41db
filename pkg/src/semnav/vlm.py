"""Deliberative-path gateway: prompt construction, backend querying, parsing.

Two backend modes share one behavioral contract: a scripted oracle used by
every test and simulation, and a live HTTP chat-completion client for a
locally hosted model server. Access to one backend instance is serialized,
mirroring a single shared inference server.
"""
from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import httpx
import numpy as np

from .text import normalize_text, token_signature, tokenize
from .world import NavGraph, StaticPoi, euclidean

DEFAULT_CHAT_URL = "http://localhost:11434/api/chat"
DEFAULT_MODEL = "qwen3.5:4b"
CHAT_PARAMS = {"temperature": 0.3, "num_predict": 500, "num_ctx": 16384, "think": False}

CONFIDENCE_VALUES = {"HIGH": 1.0, "MEDIUM": 0.6, "LOW": 0.3}

# canonical section headers; fixed so prompt tests are byte-stable
SECTION_HEADERS = (
    "== OBSERVED ENVIRONMENT ==",
    "== CURRENT STATE ==",
    "== NAVIGATION GRAPH ==",
    "== SEMANTIC OBJECTS BY ZONE ==",
    "== DESIGNATED SEATING / RESTING LOCATIONS ==",
    "== TASK AND RULES ==",
)


@dataclass(frozen=True)
class DecisionPrompt:
    text: str
    instruction: str
    image: Optional[bytes] = None
    kind: str = "decision"


@dataclass(frozen=True)
class ConfirmationPrompt:
    text: str
    target_node: int
    expected_objects: tuple[str, ...]
    image: Optional[bytes] = None
    kind: str = "confirmation"


@dataclass
class VlmDecision:
    node_id: Optional[int]
    reason: str
    raw_text: str
    inference_time_ms: float = 0.0
    parse_anomaly: bool = False


@dataclass
class ConfirmationReport:
    at_target: bool
    confidence: str
    scene_description: str
    reasoning: str
    identified_objects: list[dict]
    parse_anomaly: bool = False


def build_memory_prefix(digest) -> str:
    """Render digest entities and patterns as a prompt prefix block.

    Promotions are never rendered here; they feed Step 0 of the fast path.
    An absent or empty digest yields the empty string.
    """
    if digest is None or (not digest.entities and not digest.patterns):
        return ""
    lines = [SECTION_HEADERS[0]]
    for e in digest.entities:
        lines.append(
            f"- {e.obj_id} (node {e.node_id}): {e.visits} visits, "
            f"success rate {e.success_rate:.2f}, signature {e.signature_type}"
        )
    for p in digest.patterns:
        lines.append(
            f"- near node {p.node_id} the camera typically sees: "
            f"{' '.join(p.keywords)} (confidence {p.confidence:.2f})"
        )
    return "\n".join(lines) + "\n"


def _objects_by_zone(objects: Sequence, pose: tuple[float, float, float]) -> str:
    by_node: dict[int, list] = {}
    for obj in objects:
        by_node.setdefault(obj.nearest_node, []).append(obj)
    lines = []
    for node_id in sorted(by_node):
        lines.append(f"zone node {node_id}:")
        for obj in by_node[node_id]:
            dist = euclidean((pose[0], pose[1]), obj.position)
            if obj.source == "static":
                attrs = ", ".join(f"{k}={v}" for k, v in sorted(obj.attributes.items()))
                lines.append(
                    f"  - {obj.obj_id} [{obj.poi_class}] (static, reliable"
                    + (f"; {attrs}" if attrs else "")
                    + f") at {dist:.1f} m"
                )
            else:
                lines.append(
                    f"  - {obj.poi_class} (yolo, confidence {obj.confidence:.2f}) at {dist:.1f} m"
                )
    return "\n".join(lines)


def seating_objects(objects: Sequence) -> list:
    return [
        o
        for o in objects
        if o.source == "static"
        and (
            o.attributes.get("seating") == "true"
            or o.attributes.get("use") == "resting spot"
        )
    ]


def build_decision_prompt(
    instruction: str,
    pose: tuple[float, float, float],
    graph: NavGraph,
    merged_objects: Sequence,
    digest=None,
    image: Optional[bytes] = None,
) -> DecisionPrompt:
    """Assemble the six fixed-order prompt sections."""
    parts = []
    prefix = build_memory_prefix(digest)
    if prefix:
        parts.append(prefix.rstrip("\n"))

    parts.append(SECTION_HEADERS[1])
    parts.append(f"robot pose: x={pose[0]:.2f} y={pose[1]:.2f} yaw={pose[2]:.2f}")

    parts.append(SECTION_HEADERS[2])
    for n in graph.nodes:
        parts.append(f"- node {n.node_id}: {n.name} at ({n.x:.1f}, {n.y:.1f})")

    parts.append(SECTION_HEADERS[3])
    parts.append(_objects_by_zone(merged_objects, pose))

    parts.append(SECTION_HEADERS[4])
    seats = seating_objects(merged_objects)
    if seats:
        for o in seats:
            parts.append(f"- {o.obj_id} [{o.poi_class}] at node {o.nearest_node}")
    else:
        parts.append("(none)")

    parts.append(SECTION_HEADERS[5])
    parts.append(f"instruction: {instruction}")
    parts.append(
        "rules:\n"
        "1. respond with a JSON object {\"node_id\": <integer>, \"reason\": <string>}\n"
        "2. node_id must be selected from the navigation graph above\n"
        "3. prefer static (surveyed) objects over yolo detections of the same class\n"
        "4. for seating or resting requests prefer the designated seating locations\n"
        "   over yolo-detected chairs"
    )
    return DecisionPrompt(text="\n".join(parts), instruction=instruction, image=image)


def build_confirmation_prompt(
    target_node: int,
    expected_objects: Iterable[str],
    image: Optional[bytes] = None,
) -> ConfirmationPrompt:
    expected = tuple(expected_objects)
    text = (
        "== ARRIVAL CONFIRMATION ==\n"
        f"target node: {target_node}\n"
        f"expected objects: {', '.join(expected)}\n"
        "Inspect the attached camera image and respond with a JSON object\n"
        '{"at_target": <bool>, "confidence": "HIGH"|"MEDIUM"|"LOW",\n'
        ' "scene_description": <string>, "reasoning": <string>,\n'
        ' "identified_objects": [{"label": ..., "position": ..., "salience": ...}]}'
    )
    return ConfirmationPrompt(text=text, target_node=target_node, expected_objects=expected, image=image)


_FENCE = re.compile(r"^```[a-zA-Z]*\s*|\s*```$", re.MULTILINE)
_THINK_CLOSE = "</think>"


def _extract_json(raw: str) -> Optional[dict]:
    text = raw
    if _THINK_CLOSE in text:
        text = text.split(_THINK_CLOSE, 1)[1]
    text = _FENCE.sub("", text).strip()
    try:
        value = json.loads(text)
        return value if isinstance(value, dict) else None
    except json.JSONDecodeError:
        pass
    # fall back to the first brace-balanced object in the text
    start = text.find("{")
    while start != -1:
        depth = 0
        for i in range(start, len(text)):
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
                if depth == 0:
                    try:
                        value = json.loads(text[start : i + 1])
                        return value if isinstance(value, dict) else None
                    except json.JSONDecodeError:
                        break
        start = text.find("{", start + 1)
    return None


def parse_decision_response(raw: str, inference_time_ms: float = 0.0) -> VlmDecision:
    obj = _extract_json(raw)
    if obj is None or not isinstance(obj.get("node_id"), int):
        return VlmDecision(None, "", raw, inference_time_ms, parse_anomaly=True)
    return VlmDecision(
        node_id=obj["node_id"],
        reason=str(obj.get("reason", "")),
        raw_text=raw,
        inference_time_ms=inference_time_ms,
    )


def parse_confirmation_response(raw: str) -> ConfirmationReport:
    obj = _extract_json(raw)
    if obj is None or "at_target" not in obj:
        return ConfirmationReport(False, "LOW", "", "", [], parse_anomaly=True)
    confidence = str(obj.get("confidence", "LOW")).upper()
    if confidence not in CONFIDENCE_VALUES:
        confidence = "LOW"
    identified = obj.get("identified_objects")
    if not isinstance(identified, list):
        identified = []
    return ConfirmationReport(
        at_target=bool(obj["at_target"]),
        confidence=confidence,
        scene_description=str(obj.get("scene_description", "")),
        reasoning=str(obj.get("reasoning", "")),
        identified_objects=[o for o in identified if isinstance(o, dict)],
    )


class BackendError(RuntimeError):
    """Retryable transport failure on the HTTP path."""


@dataclass
class OracleRule:
    """One scripted behavior: either a fixed replay sequence or a seeded draw.

    ``responses`` entries are (node_id, reason, latency_ms) replayed in order
    (cycling at the end); ``choices``/``weights`` draw from a distribution
    with latency from ``latency_ms_range``.
    """

    instruction: str
    responses: list[tuple[int, str, float]] = field(default_factory=list)
    choices: list[tuple[int, str]] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    latency_ms_range: tuple[float, float] = (2500.0, 9000.0)
    _cursor: int = 0

    def matches(self, instruction: str) -> bool:
        return token_signature(instruction) == token_signature(self.instruction)

    def next_response(self, rng: np.random.Generator) -> tuple[int, str, float]:
        if self.responses:
            node_id, reason, latency = self.responses[self._cursor % len(self.responses)]
            self._cursor += 1
            return node_id, reason, latency
        idx = rng.choice(len(self.choices), p=_normalized(self.weights, len(self.choices)))
        node_id, reason = self.choices[idx]
        latency = rng.uniform(*self.latency_ms_range)
        return node_id, reason, latency


def _normalized(weights: list[float], n: int) -> list[float]:
    if not weights:
        return [1.0 / n] * n
    total = sum(weights)
    return [w / total for w in weights]


class ScriptedOracle:
    """Deterministic stand-in for the model server.

    Decision prompts are answered from per-instruction rules; confirmation
    prompts are answered from per-node scene descriptions: at_target is true
    iff every expected object is lexically present in the scene text.
    """

    mode = "scripted_oracle"

    def __init__(
        self,
        rules: Sequence[OracleRule],
        scenes: Optional[dict[int, str]] = None,
        seed: int = 0,
        default_node: int = 0,
        real_time: bool = False,
    ) -> None:
        self.rules = list(rules)
        self.scenes = dict(scenes or {})
        self.rng = np.random.default_rng(seed)
        self.default_node = default_node
        self.real_time = real_time
        self._lock = threading.Lock()

    def _decision_text(self, prompt: DecisionPrompt) -> tuple[str, float]:
        for rule in self.rules:
            if rule.matches(prompt.instruction):
                node_id, reason, latency = rule.next_response(self.rng)
                return json.dumps({"node_id": node_id, "reason": reason}), latency
        return (
            json.dumps({"node_id": self.default_node, "reason": "fallback"}),
            float(self.rng.uniform(2500.0, 9000.0)),
        )

    def _confirmation_text(self, prompt: ConfirmationPrompt) -> tuple[str, float]:
        scene = self.scenes.get(prompt.target_node, "")
        scene_norm = normalize_text(scene)
        found = [
            obj for obj in prompt.expected_objects
            if normalize_text(obj) in scene_norm
        ]
        if found and len(found) == len(prompt.expected_objects):
            at_target, confidence = True, "HIGH"
        elif found:
            at_target, confidence = False, "MEDIUM"
        else:
            at_target, confidence = False, "LOW"
        report = {
            "at_target": at_target,
            "confidence": confidence,
            "scene_description": scene,
            "reasoning": f"observed {len(found)}/{len(prompt.expected_objects)} expected objects",
            "identified_objects": [
                {"label": obj, "position": "center", "salience": "high"} for obj in found
            ],
        }
        return json.dumps(report), float(self.rng.uniform(1500.0, 4000.0))

    def query(self, prompt) -> tuple[str, float]:
        with self._lock:
            if prompt.kind == "confirmation":
                text, latency = self._confirmation_text(prompt)
            else:
                text, latency = self._decision_text(prompt)
            if self.real_time:
                time.sleep(latency / 1000.0)
            return text, latency


class HttpChatBackend:
    """Chat-completion client for an Ollama-style local model server."""

    mode = "http_chat"

    def __init__(
        self,
        endpoint: str = DEFAULT_CHAT_URL,
        model: str = DEFAULT_MODEL,
        params: Optional[dict] = None,
        timeout: float = 120.0,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.params = dict(CHAT_PARAMS if params is None else params)
        self.timeout = timeout
        self._lock = threading.Lock()

    def query(self, prompt) -> tuple[str, float]:
        payload = {
            "model": self.model,
            "stream": False,
            "think": self.params.get("think", False),
            "options": {
                k: v for k, v in self.params.items() if k != "think"
            },
            "messages": [{"role": "user", "content": prompt.text}],
        }
        with self._lock:
            start = time.perf_counter()
            try:
                resp = httpx.post(self.endpoint, json=payload, timeout=self.timeout)
                resp.raise_for_status()
            except httpx.HTTPError as exc:
                raise BackendError(f"chat request failed: {exc}") from exc
            elapsed_ms = (time.perf_counter() - start) * 1000.0
        data = resp.json()
        text = data.get("message", {}).get("content", "")
        return text, elapsed_ms


def query_backend(backend, prompt) -> tuple[str, float]:
    """Serialized query against either backend mode."""
    return backend.query(prompt)
