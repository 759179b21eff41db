"""The learning loop and cross-robot transfer, on the full three-session
protocol: escalations on platform C become a digest promotion that platform B
then resolves deterministically at Step 0.
"""
import tempfile

from semnav.executive import FrozenClock
from semnav.experiment import run_experiment
from semnav.resolver import METHOD_M3, METHOD_VLM

artifacts = run_experiment(tempfile.mkdtemp(prefix="semnav_demo_"), clock=FrozenClock())

print("digest after the seed session:")
for p in artifacts.digest_initial.promotions:
    print(f"  {p.key!r:<50} -> node {p.node_id} (frequency {p.frequency})")

new = "Take me somewhere I can sit and relax"
a_runs = [e for e in artifacts.session_a.entries if e.instruction == new]
print(f"\nsession A, platform C, {len(a_runs)} runs of {new!r}:")
for e in a_runs:
    print(f"  [{e.resolution_method}] node {e.node_id} vlm {e.timing['vlm_ms']:.0f} ms")
assert all(e.resolution_method == METHOD_VLM for e in a_runs)

print("\nafter the memory refresh the digest gained:")
before = {p.key for p in artifacts.digest_initial.promotions}
for p in artifacts.digest_after_a.promotions:
    if p.key not in before:
        print(f"  {p.key!r} -> node {p.node_id} (frequency {p.frequency})")
print(f"digest size: {len(artifacts.digest_after_a.serialize())} chars, "
      f"md5 {artifacts.digest_after_a.md5()}")

b_runs = [e for e in artifacts.session_b.entries if e.instruction == new]
print(f"\nsession B, platform B (digest transferred), {len(b_runs)} runs:")
for e in b_runs:
    print(
        f"  [{e.resolution_method}] step {e.extra['step']} node {e.node_id} "
        f"resolve {e.timing['resolve_ms']:.3f} ms"
    )
assert all(e.resolution_method == METHOD_M3 for e in b_runs)
print("\nplatform B never touched the VLM for an instruction platform C learned.")
