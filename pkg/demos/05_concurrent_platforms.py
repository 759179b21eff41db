"""Two platforms run missions in parallel against one shared backend and one
shared digest; their audit files stay platform-pure and match a sequential
rerun decision for decision.
"""
import tempfile
from pathlib import Path

from semnav import default_policy, fiir_world
from semnav.executive import FrozenClock
from semnav.experiment import build_oracle, bundled_script, run_experiment
from semnav.simulation import ConcurrentJob, compare_runs, run_concurrent, run_session

graph, pois = fiir_world()
policy = default_policy()
artifacts = run_experiment(tempfile.mkdtemp(prefix="semnav_demo_"), clock=FrozenClock())
digest = artifacts.digest_after_a

workdir = Path(tempfile.mkdtemp(prefix="semnav_demo_c_"))
oracle = build_oracle()
jobs = [
    ConcurrentJob(bundled_script("session_c_xplorer_b"), workdir / "b.jsonl", digest=digest),
    ConcurrentJob(bundled_script("session_c_xplorer_c"), workdir / "c.jsonl", digest=digest),
]
concurrent = run_concurrent(jobs, graph, pois, policy, oracle, clock=FrozenClock())

for pid, result in sorted(concurrent.items()):
    print(f"{pid}:")
    for e in result.entries:
        print(f"  {e.instruction!r} -> node {e.node_id} [{e.resolution_method}] {e.nav_outcome}")

print("\nintegrity: concurrent vs sequential rerun")
for pid in sorted(concurrent):
    script = bundled_script(f"session_c_{pid.replace('-', '_')}")
    sequential = run_session(
        script, graph, pois, policy, build_oracle(), workdir / f"{pid}_seq.jsonl",
        digest=digest, clock=FrozenClock(),
    )
    report = compare_runs(
        [e.to_dict() for e in concurrent[pid].entries],
        [e.to_dict() for e in sequential.entries],
    )
    print(f"  {pid}: matched={report.matched}")
