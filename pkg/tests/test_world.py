"""Graph/POI loading, validation and semantic-object merging."""
from collections import Counter

import pytest

from semnav.world import (
    DetectedObject,
    NavEdge,
    NavGraph,
    NavNode,
    Policy,
    StaticPoi,
    WorldError,
    euclidean,
    merge_semantic_objects,
    normalized_class_terms,
    pois_at_node,
)


class TestFixtureShape:
    def test_counts(self, graph, pois):
        assert len(graph.nodes) == 24
        assert len(graph.edges) == 60  # 30 bidirectional pairs
        assert len(pois) == 18

    def test_classes(self, pois):
        classes = Counter(p.poi_class for p in pois)
        assert len(classes) == 8
        assert classes["potted plant"] == 5
        assert classes["laboratory"] == 4

    def test_signature_distribution(self, pois):
        sig = Counter(p.signature_type for p in pois)
        assert sig == {"landmark": 15, "none": 2, "contextual": 1}

    def test_poi_bearing_nodes(self, pois):
        assert len({p.nearest_node for p in pois}) == 14

    def test_edges_symmetric_with_positive_costs(self, graph):
        pairs = {(e.from_id, e.to_id) for e in graph.edges}
        assert all((b, a) in pairs for a, b in pairs)
        assert all(e.cost > 0 for e in graph.edges)

    def test_named_nodes(self, graph):
        assert graph.node(0).name == "toilet_m"
        assert graph.node(5).name == "cb204"
        assert graph.node(22).name == "cb203_entrance"


class TestValidation:
    def test_duplicate_node_ids(self):
        nodes = (NavNode(1, "a", 0, 0), NavNode(1, "b", 1, 0))
        with pytest.raises(WorldError, match="duplicate"):
            NavGraph(nodes, ())

    def test_dangling_edge(self):
        with pytest.raises(WorldError, match="dangling"):
            NavGraph((NavNode(1, "a", 0, 0),), (NavEdge(1, 2, 1.0),))

    def test_negative_cost(self):
        nodes = (NavNode(1, "a", 0, 0), NavNode(2, "b", 1, 0))
        with pytest.raises(WorldError, match="negative"):
            NavGraph(nodes, (NavEdge(1, 2, -1.0),))

    def test_empty_graph(self):
        with pytest.raises(WorldError, match="empty"):
            NavGraph((), ())

    def test_detection_confidence_range(self):
        with pytest.raises(WorldError):
            DetectedObject("chair", 1.2, (0, 0), 1)

    def test_policy_threshold_range(self):
        with pytest.raises(WorldError):
            Policy(jaccard_threshold=1.5)


class TestMerge:
    def test_static_wins_over_detection_of_same_class(self, pois):
        det = DetectedObject("potted plant", 0.95, (16.0, 1.0), 13)
        merged = merge_semantic_objects(pois, [det])
        assert det not in merged
        assert len(merged) == len(pois)

    def test_novel_class_survives(self, pois):
        det = DetectedObject("person", 0.8, (5.0, 0.0), 3)
        merged = merge_semantic_objects(pois, [det])
        assert det in merged

    def test_dedup_keeps_highest_confidence(self):
        a = DetectedObject("person", 0.6, (0.0, 0.0), 1)
        b = DetectedObject("person", 0.9, (0.5, 0.0), 1)
        far = DetectedObject("person", 0.5, (5.0, 0.0), 2)
        merged = merge_semantic_objects([], [a, b, far], dedup_radius=1.0)
        assert merged == [b, far]

    def test_pois_at_node(self, pois):
        at9 = {p.obj_id for p in pois_at_node(pois, 9)}
        assert at9 == {"radiator_main", "lab_chair"}


class TestClassTerms:
    def test_multiword_head(self):
        assert normalized_class_terms("potted plant") == ["potted plant", "plant"]

    def test_modifier_not_a_term(self):
        # "fire" alone must not count as a fire-hydrant mention
        assert "fire" not in normalized_class_terms("fire hydrant")

    def test_single_word(self):
        assert normalized_class_terms("radiator") == ["radiator"]


def test_euclidean():
    assert euclidean((0, 0), (3, 4)) == 5.0
