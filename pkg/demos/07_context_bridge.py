"""Serve the context bridge in a background thread and read pose, graph and
semantic objects back over HTTP with the duck-typed client.
"""
import threading
import time

import uvicorn

from semnav import fiir_world
from semnav.bridge import HttpContextClient, create_app
from semnav.world import DetectedObject

HOST, PORT = "127.0.0.1", 8719

graph, pois = fiir_world()
detections = [DetectedObject("person", 0.85, (3.0, 1.0), 2)]
app = create_app(graph, pois, pose=(1.0, 2.0, 0.0), detections=detections)

server = uvicorn.Server(uvicorn.Config(app, host=HOST, port=PORT, log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)

client = HttpContextClient(f"http://{HOST}:{PORT}")
print(f"pose: {client.pose()}")

doc = client.graph()
print(f"graph: {len(doc['nodes'])} nodes, {len(doc['edges'])} edges")

objects = client.objects()
print(f"objects: {len(objects['static'])} static, {len(objects['detections'])} detected")
print(f"first detection: {objects['detections'][0]}")

client.set_pose((4.0, 5.0, 1.0))
print(f"pose after simulation-driver update: {client.pose()}")

server.should_exit = True
thread.join(timeout=5)
