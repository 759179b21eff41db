"""Walk the seven-step fast-path cascade on a handful of instructions.

Shows which step claims each instruction, in both English and Romanian,
and what an escalation (no step matched) looks like.
"""
from semnav import default_policy, fiir_world, resolve
from semnav.resolver import EscalationSignal, ResolveTrace

graph, pois = fiir_world()
policy = default_policy()

CASES = [
    ("go to node 7", (0.0, 0.0, 0.0)),
    ("mergi la nodul 12", (0.0, 0.0, 0.0)),
    ("go to lab_cb204", (0.0, 0.0, 0.0)),
    ("go to lab_chair", (0.0, 0.0, 0.0)),
    ("the mechanical engineering lab", (0.0, 0.0, 0.0)),
    ("where is the chair", (0.0, 0.0, 0.0)),
    ("Take me to the closest plant", (23.0, 0.0, 0.0)),
    ("du-mă la cea mai apropiată plantă", (23.0, 0.0, 0.0)),
    ("Take me somewhere I can sit and relax", (0.0, 0.0, 0.0)),
]

for instruction, pose in CASES:
    trace = ResolveTrace()
    result = resolve(instruction, graph, pois, pose, None, policy, trace)
    print(f"\n{instruction!r} from pose {pose[:2]}")
    if isinstance(result, EscalationSignal):
        print(f"  every step declined -> escalate to the VLM")
        for line in result.reason.split("; "):
            print(f"    {line}")
    else:
        node = graph.node(result.node_id)
        print(
            f"  step {result.step} -> node {result.node_id} ({node.name}) "
            f"in {result.resolve_time_us:.0f} us [{result.method}]"
        )
