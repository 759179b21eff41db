"""Show the slow path end to end: prompt construction, a scripted oracle
response, JSON extraction from messy model output, and action validation.
"""
import json

from semnav import default_policy, fiir_world
from semnav.executive import ProposedAction, build_affordance_manifest, validate_action
from semnav.experiment import build_oracle
from semnav.vlm import build_decision_prompt, parse_decision_response, query_backend

graph, pois = fiir_world()
policy = default_policy()
oracle = build_oracle()

instruction = "Take me somewhere I can sit and relax"
prompt = build_decision_prompt(instruction, (0.0, 0.0, 0.0), graph, pois)
print("--- decision prompt (first 30 lines) ---")
print("\n".join(prompt.text.splitlines()[:30]))

raw, latency_ms = query_backend(oracle, prompt)
print(f"\n--- raw backend response ({latency_ms:.0f} ms stamped) ---")
print(raw)

decision = parse_decision_response(raw)
print(f"\nparsed: node_id={decision.node_id} reason={decision.reason!r}")

# parsing survives think-blocks, fences and prose wrappers
messy = f"<think>hmm</think>Sure!\n```json\n{json.dumps({'node_id': 9, 'reason': 'chair'})}\n```"
print(f"messy output parses to node {parse_decision_response(messy).node_id}")

# the executive validates whatever the model proposed before acting on it
manifest = build_affordance_manifest(graph, pois, policy)
node = graph.node(decision.node_id)
action = ProposedAction("NavigateToPose", decision.node_id, goal_distance=5.0)
verdict = validate_action(action, manifest, policy)
print(f"validation: allowed={verdict.allowed} (target {node.name})")

bogus = ProposedAction("NavigateToPose", 999, goal_distance=5.0)
print(f"hallucinated node 999: {validate_action(bogus, manifest, policy)}")
