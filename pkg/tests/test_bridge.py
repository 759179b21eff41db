"""Context bridge fidelity: HTTP payloads mirror in-process state exactly."""
import base64

import pytest
from fastapi.testclient import TestClient

from semnav.bridge import (
    CONTEXT_SERVER_URL_ENV,
    DEFAULT_BRIDGE_URL,
    bridge_url,
    create_app,
    graph_to_dict,
    object_to_dict,
)
from semnav.world import DetectedObject


@pytest.fixture()
def client(graph, pois):
    det = DetectedObject("person", 0.85, (3.0, 1.0), 2)
    app = create_app(graph, pois, pose=(1.0, 2.0, 0.5), detections=[det], camera_frame=b"JPEG")
    return TestClient(app)


class TestFidelity:
    def test_graph_payload_matches_serializer(self, client, graph):
        assert client.get("/graph").json() == graph_to_dict(graph)

    def test_graph_shape(self, client):
        doc = client.get("/graph").json()
        assert len(doc["nodes"]) == 24 and len(doc["edges"]) == 60

    def test_objects_payload_matches_serializer(self, client, pois):
        doc = client.get("/objects").json()
        assert doc["static"] == [object_to_dict(p) for p in pois]
        assert len(doc["detections"]) == 1
        assert doc["detections"][0]["class"] == "person"
        assert doc["detections"][0]["confidence"] == 0.85

    def test_static_objects_carry_attributes(self, client):
        doc = client.get("/objects").json()
        by_id = {o["obj_id"]: o for o in doc["static"]}
        assert by_id["lab_cb204"]["attributes"]["department"] == "mechanical engineering"
        assert by_id["radiator_main"]["visual_signature_type"] == "landmark"


class TestPose:
    def test_get(self, client):
        assert client.get("/pose").json() == {"x": 1.0, "y": 2.0, "yaw": 0.5}

    def test_put_round_trip(self, client):
        assert client.put("/pose", json={"x": 4.0, "y": 5.0, "yaw": 1.0}).json() == {"ok": True}
        assert client.get("/pose").json() == {"x": 4.0, "y": 5.0, "yaw": 1.0}


class TestCamera:
    def test_frame_base64(self, client):
        frame = client.get("/camera").json()["frame"]
        assert base64.b64decode(frame) == b"JPEG"

    def test_no_frame_is_null(self, graph, pois):
        client = TestClient(create_app(graph, pois))
        assert client.get("/camera").json() == {"frame": None}


class TestUrlResolution:
    def test_explicit_wins(self, monkeypatch):
        monkeypatch.setenv(CONTEXT_SERVER_URL_ENV, "http://env:1")
        assert bridge_url("http://given:2") == "http://given:2"

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv(CONTEXT_SERVER_URL_ENV, "http://env:1")
        assert bridge_url() == "http://env:1"

    def test_default(self, monkeypatch):
        monkeypatch.delenv(CONTEXT_SERVER_URL_ENV, raising=False)
        assert bridge_url() == DEFAULT_BRIDGE_URL
