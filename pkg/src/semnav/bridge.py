"""HTTP context bridge: exposes pose, graph, semantic objects and camera
frames over REST so decision logic can run off-robot.

The payloads are plain JSON mirrors of the in-process structures; fidelity
(bridge output == in-process state) is covered by tests.
"""
from __future__ import annotations

import base64
import os
from typing import Optional, Sequence

import httpx
import uvicorn
from fastapi import FastAPI

from .world import DetectedObject, NavGraph, StaticPoi

CONTEXT_SERVER_URL_ENV = "CONTEXT_SERVER_URL"
DEFAULT_BRIDGE_URL = "http://127.0.0.1:8711"


def graph_to_dict(graph: NavGraph) -> dict:
    return {
        "nodes": [
            {"node_id": n.node_id, "name": n.name, "x": n.x, "y": n.y} for n in graph.nodes
        ],
        "edges": [
            {"from": e.from_id, "to": e.to_id, "cost": e.cost} for e in graph.edges
        ],
    }


def object_to_dict(obj) -> dict:
    doc = {
        "class": obj.poi_class,
        "position": list(obj.position),
        "nearest_node": obj.nearest_node,
        "source": obj.source,
    }
    if obj.source == "static":
        doc["obj_id"] = obj.obj_id
        doc["visual_signature_type"] = obj.signature_type
        doc["attributes"] = dict(obj.attributes)
    else:
        doc["confidence"] = obj.confidence
    return doc


def create_app(
    graph: NavGraph,
    pois: Sequence[StaticPoi],
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0),
    detections: Sequence[DetectedObject] = (),
    camera_frame: Optional[bytes] = None,
) -> FastAPI:
    app = FastAPI(title="context bridge")
    app.state.pose = tuple(pose)
    app.state.detections = list(detections)
    app.state.camera_frame = camera_frame

    @app.get("/pose")
    def get_pose() -> dict:
        x, y, yaw = app.state.pose
        return {"x": x, "y": y, "yaw": yaw}

    @app.put("/pose")
    def put_pose(body: dict) -> dict:
        # simulation driver hook; a real deployment publishes pose read-only
        app.state.pose = (float(body["x"]), float(body["y"]), float(body["yaw"]))
        return {"ok": True}

    @app.get("/graph")
    def get_graph() -> dict:
        return graph_to_dict(graph)

    @app.get("/objects")
    def get_objects() -> dict:
        return {
            "static": [object_to_dict(p) for p in pois],
            "detections": [object_to_dict(d) for d in app.state.detections],
        }

    @app.get("/camera")
    def get_camera() -> dict:
        frame = app.state.camera_frame
        return {"frame": base64.b64encode(frame).decode("ascii") if frame else None}

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8711) -> None:
    uvicorn.run(app, host=host, port=port, log_level="warning")


def bridge_url(explicit: Optional[str] = None) -> str:
    return explicit or os.environ.get(CONTEXT_SERVER_URL_ENV, DEFAULT_BRIDGE_URL)


class HttpContextClient:
    """Client side of the bridge, duck-typed for the session runner."""

    def __init__(self, base_url: Optional[str] = None, timeout: float = 10.0) -> None:
        self.base_url = bridge_url(base_url).rstrip("/")
        self.timeout = timeout

    def _get(self, path: str) -> dict:
        resp = httpx.get(self.base_url + path, timeout=self.timeout)
        resp.raise_for_status()
        return resp.json()

    def pose(self) -> tuple[float, float, float]:
        doc = self._get("/pose")
        return (doc["x"], doc["y"], doc["yaw"])

    def set_pose(self, pose: tuple[float, float, float]) -> None:
        resp = httpx.put(
            self.base_url + "/pose",
            json={"x": pose[0], "y": pose[1], "yaw": pose[2]},
            timeout=self.timeout,
        )
        resp.raise_for_status()

    def graph(self) -> dict:
        return self._get("/graph")

    def objects(self) -> dict:
        return self._get("/objects")

    def camera(self) -> Optional[bytes]:
        frame = self._get("/camera")["frame"]
        return base64.b64decode(frame) if frame else None
