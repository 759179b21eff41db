"""Post-hoc analytics over the full protocol: session report, exact binomial
interval, rank-sum latency comparison, effect size and method independence.
"""
import tempfile

from semnav.analytics import (
    build_session_report,
    clopper_pearson_interval,
    cohens_d,
    contingency_by_method,
    fishers_exact_2x2,
    mann_whitney,
)
from semnav.executive import FrozenClock
from semnav.experiment import run_experiment
from semnav.resolver import METHOD_VLM

artifacts = run_experiment(tempfile.mkdtemp(prefix="semnav_demo_"), clock=FrozenClock())
decisions = [
    e.to_dict()
    for result in (
        artifacts.session_a, artifacts.session_b, *artifacts.session_c.values()
    )
    for e in result.entries
]

report = build_session_report(decisions)
print(f"decisions: {report.total_decisions} "
      f"(+{report.return_commands_excluded} return commands excluded)")
print(f"methods:   {report.method_counts}")
print(f"platforms: {report.per_platform_decisions}")

# session B: 33/33 fast-path semantic accuracy
lo, hi = clopper_pearson_interval(33, 33)
print(f"\n33/33 correct -> exact 95% interval [{lo:.3f}, {hi:.3f}]")

# latency gap: the 7 escalations of session A vs a 33-sample fast-path profile
vlm_ms = [
    r["timing"]["vlm_ms"]
    for r in decisions
    if r["resolution_method"] == METHOD_VLM and r["extra"].get("scenario") == "S3new"
]
fast_ms = [0.065] + [0.056] * 16 + [0.074] * 16
mw = mann_whitney(vlm_ms, fast_ms, alternative="greater", tie_correction=False)
print(f"\nVLM {sum(vlm_ms)/len(vlm_ms):.0f} ms vs fast path {sum(fast_ms)/len(fast_ms):.3f} ms")
print(f"Mann-Whitney U = {mw.u_statistic:.0f}, z = {mw.z:.2f}, one-sided p = {mw.p_value:.3g}")
print(f"Cohen's d = {cohens_d(vlm_ms, fast_ms):.2f}")

# misses are independent of the resolution method (session B)
session_b = [
    e.to_dict()
    for e in artifacts.session_b.entries
    if not e.extra.get("return_command")
]
table = contingency_by_method(session_b)
print(f"\nsession B outcome-by-method table: {table}")
print(f"Fisher exact p = {fishers_exact_2x2(table):.3f} (no association)")
