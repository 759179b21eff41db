"""Replay a bundled mission script and inspect the audit log it produces.

Every decision becomes exactly one JSONL line with the full schema; startup
and shutdown events bracket the session and carry the digest hash.
"""
import json
import tempfile
from pathlib import Path

from semnav import default_policy, fiir_world
from semnav.executive import is_event, read_audit_file
from semnav.experiment import build_oracle, bundled_script
from semnav.simulation import run_session

graph, pois = fiir_world()
policy = default_policy()

workdir = Path(tempfile.mkdtemp(prefix="semnav_demo_"))
audit_path = workdir / "audit.jsonl"
result = run_session(
    bundled_script("seed_xplorer_c"), graph, pois, policy, build_oracle(), audit_path,
    monitor_csv=workdir / "monitor.csv",
)

records = read_audit_file(audit_path)
events = [r for r in records if is_event(r)]
decisions = [r for r in records if not is_event(r)]
print(f"audit: {audit_path}")
print(f"{len(events)} events, {len(decisions)} decisions")
for e in events:
    print(f"  event {e['event']} digest={e['memory_digest_hash']}")

print("\nfirst decision record:")
print(json.dumps(decisions[0], indent=2, sort_keys=True))

print("\nper-decision summary:")
for d in decisions[:8]:
    print(
        f"  {d['instruction'][:46]:<46} -> node {d['node_id']:>2} "
        f"[{d['resolution_method']}] {d['nav_outcome']}"
    )
print(f"  ... and {len(decisions) - 8} more")
