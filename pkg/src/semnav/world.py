"""Navigation graph, static POIs, policy and semantic-object merging.

The graph and POI set are loaded from GeoJSON feature collections and are
immutable after load; every other module treats them as a read-only
grounding substrate.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import yaml

from .text import normalize_text

SIGNATURE_TYPES = ("landmark", "contextual", "architectural", "none")


class WorldError(ValueError):
    """Raised for malformed graph / POI / policy files."""


@dataclass(frozen=True)
class NavNode:
    node_id: int
    name: str
    x: float
    y: float


@dataclass(frozen=True)
class NavEdge:
    from_id: int
    to_id: int
    cost: float


@dataclass(frozen=True)
class NavGraph:
    nodes: tuple[NavNode, ...]
    edges: tuple[NavEdge, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise WorldError("empty graph: at least one node is required")
        ids = [n.node_id for n in self.nodes]
        if len(ids) != len(set(ids)):
            raise WorldError("duplicate node ids in graph")
        for n in self.nodes:
            if not n.name:
                raise WorldError(f"node {n.node_id} has an empty name")
        known = set(ids)
        for e in self.edges:
            if e.from_id not in known or e.to_id not in known:
                raise WorldError(f"dangling edge {e.from_id}->{e.to_id}")
            if e.cost < 0:
                raise WorldError(f"negative edge cost on {e.from_id}->{e.to_id}")

    def node(self, node_id: int) -> NavNode:
        return self._by_id()[node_id]

    def has_node(self, node_id: int) -> bool:
        return node_id in self._by_id()

    def _by_id(self) -> dict[int, NavNode]:
        # cached on the instance despite frozen=True; object.__setattr__ keeps
        # the public surface immutable
        cache = self.__dict__.get("_index")
        if cache is None:
            cache = {n.node_id: n for n in self.nodes}
            object.__setattr__(self, "_index", cache)
        return cache


@dataclass(frozen=True)
class StaticPoi:
    obj_id: str
    poi_class: str
    position: tuple[float, float]
    nearest_node: int
    signature_type: str
    attributes: dict[str, str] = field(default_factory=dict)

    source: str = "static"


@dataclass(frozen=True)
class DetectedObject:
    poi_class: str
    confidence: float
    position: tuple[float, float]
    nearest_node: int
    source: str = "yolo"

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise WorldError(f"detection confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class PromotionPolicy:
    min_frequency: int = 3
    min_consistency: float = 0.80
    min_l3b_count: int = 1


@dataclass(frozen=True)
class M2Policy:
    cluster_jaccard: float = 0.5
    min_observations: int = 3
    min_confidence: float = 0.6


@dataclass(frozen=True)
class Policy:
    allowed_actions: frozenset[str] = frozenset(
        {"ComputeRoute", "FollowPath", "NavigateToPose", "Spin"}
    )
    max_goal_distance: float = 50.0
    confirmation_radius: float = 1.5
    jaccard_threshold: float = 0.6
    promotion: PromotionPolicy = PromotionPolicy()
    m2: M2Policy = M2Policy()
    digest_char_limit: int = 2000
    detection_dedup_radius: float = 1.0

    def __post_init__(self) -> None:
        if not self.allowed_actions:
            raise WorldError("policy allowed_actions must be non-empty")
        if not 0.0 <= self.jaccard_threshold <= 1.0:
            raise WorldError("jaccard_threshold outside [0, 1]")
        if self.max_goal_distance <= 0 or self.confirmation_radius <= 0:
            raise WorldError("distance thresholds must be positive")


def load_policy(path: str | Path) -> Policy:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    promotion = PromotionPolicy(**raw.pop("promotion", {}))
    m2 = M2Policy(**raw.pop("m2", {}))
    if "allowed_actions" in raw:
        raw["allowed_actions"] = frozenset(raw["allowed_actions"])
    return Policy(promotion=promotion, m2=m2, **raw)


def _features(path: Path, expect: str) -> list[dict]:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise WorldError(f"{path}: cannot parse GeoJSON: {exc}") from exc
    if doc.get("type") != "FeatureCollection" or "features" not in doc:
        raise WorldError(f"{path}: not a GeoJSON FeatureCollection ({expect})")
    return doc["features"]


def load_world(graph_file: str | Path, poi_file: str | Path) -> tuple[NavGraph, list[StaticPoi]]:
    """Load and validate the navigation graph and static POI set."""
    graph_path, poi_path = Path(graph_file), Path(poi_file)

    nodes: list[NavNode] = []
    edges: list[NavEdge] = []
    for i, feat in enumerate(_features(graph_path, "graph")):
        props = feat.get("properties", {})
        kind = props.get("kind")
        try:
            if kind == "node":
                x, y = feat["geometry"]["coordinates"]
                nodes.append(NavNode(int(props["id"]), str(props["name"]), float(x), float(y)))
            elif kind == "edge":
                edges.append(NavEdge(int(props["from"]), int(props["to"]), float(props["cost"])))
            else:
                raise WorldError(f"{graph_path}: feature {i}: unknown kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise WorldError(f"{graph_path}: feature {i}: {exc}") from exc
    try:
        graph = NavGraph(tuple(nodes), tuple(edges))
    except WorldError as exc:
        raise WorldError(f"{graph_path}: {exc}") from exc

    pois: list[StaticPoi] = []
    seen: set[str] = set()
    for i, feat in enumerate(_features(poi_path, "pois")):
        props = dict(feat.get("properties", {}))
        try:
            obj_id = str(props.pop("obj_id"))
            poi_class = str(props.pop("class"))
            nearest = int(props.pop("nearest_node"))
            sig = str(props.pop("visual_signature_type"))
            x, y = feat["geometry"]["coordinates"]
        except (KeyError, TypeError, ValueError) as exc:
            raise WorldError(f"{poi_path}: feature {i}: {exc}") from exc
        if obj_id in seen:
            raise WorldError(f"{poi_path}: feature {i}: duplicate obj_id {obj_id!r}")
        seen.add(obj_id)
        if sig not in SIGNATURE_TYPES:
            raise WorldError(f"{poi_path}: feature {i}: unknown signature_type {sig!r}")
        if not graph.has_node(nearest):
            raise WorldError(f"{poi_path}: feature {i}: nearest_node {nearest} not in graph")
        attributes = {str(k): str(v) for k, v in props.items()}
        pois.append(StaticPoi(obj_id, poi_class, (float(x), float(y)), nearest, sig, attributes))
    return graph, pois


def euclidean(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def merge_semantic_objects(
    static: Iterable[StaticPoi],
    detections: Iterable[DetectedObject],
    dedup_radius: float = 1.0,
) -> list[StaticPoi | DetectedObject]:
    """Merge surveyed POIs with live detections.

    Static objects always win: a detection whose class has any static
    instance is suppressed. Remaining detections of the same class within
    ``dedup_radius`` collapse to the highest-confidence one.
    """
    static = list(static)
    static_classes = {p.poi_class for p in static}
    survivors: list[DetectedObject] = []
    for det in sorted(detections, key=lambda d: -d.confidence):
        if det.poi_class in static_classes:
            continue
        if any(
            kept.poi_class == det.poi_class
            and euclidean(kept.position, det.position) <= dedup_radius
            for kept in survivors
        ):
            continue
        survivors.append(det)
    return list(static) + survivors


def pois_at_node(pois: Iterable[StaticPoi], node_id: int) -> list[StaticPoi]:
    return [p for p in pois if p.nearest_node == node_id]


def normalized_class_terms(poi_class: str) -> list[str]:
    """Lexical terms that count as a mention of a POI class.

    The full normalized class name plus, for multi-word classes, the head
    word ("potted plant" -> "plant") so that everyday phrasings register
    without treating a bare modifier ("fire") as a class mention.
    """
    name = normalize_text(poi_class)
    terms = [name]
    words = name.split()
    if len(words) > 1:
        terms.append(words[-1])
    return terms
