"""Post-hoc analytics over audit logs: interval estimates, two-sample
tests, effect sizes and per-session summary reports.

Statistics that have cheap closed forms (binomial interval boundaries,
hypergeometric 2x2 enumeration) are computed directly; the normal machinery
comes from scipy.
"""
from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence

from scipy.stats import beta, norm

from .resolver import METHOD_DETERMINISTIC, METHOD_M3, METHOD_VLM
from .simulation import OUTCOME_COMPLETE


def clopper_pearson_interval(
    successes: int, trials: int, alpha: float = 0.05
) -> tuple[float, float]:
    """Exact binomial confidence interval.

    Boundary cases use the closed forms (x=0: lower 0; x=n: upper 1 and
    lower (alpha/2)^(1/n)) instead of beta quantiles at degenerate shapes.
    """
    if not 0 <= successes <= trials or trials <= 0:
        raise ValueError("need 0 <= successes <= trials, trials > 0")
    if successes == 0:
        lower = 0.0
    elif successes == trials:
        lower = (alpha / 2.0) ** (1.0 / trials)
    else:
        lower = float(beta.ppf(alpha / 2.0, successes, trials - successes + 1))
    if successes == trials:
        upper = 1.0
    elif successes == 0:
        upper = 1.0 - (alpha / 2.0) ** (1.0 / trials)
    else:
        upper = float(beta.ppf(1.0 - alpha / 2.0, successes + 1, trials - successes))
    return lower, upper


@dataclass(frozen=True)
class MannWhitneyResult:
    u_statistic: float  # U for the first sample
    z: float
    p_value: float
    method: str  # normal_approx | exact_permutation


def _midranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j + 2) / 2.0  # average of 1-based positions i+1 .. j+1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def mann_whitney(
    sample1: Sequence[float],
    sample2: Sequence[float],
    alternative: str = "two-sided",
    exact: bool = False,
    tie_correction: bool = True,
) -> MannWhitneyResult:
    """Mann-Whitney U test; ``alternative`` is "two-sided" or "greater"
    (first sample stochastically larger).

    Default is the normal approximation with midranks, tie correction and a
    0.5 continuity correction; ``exact=True`` enumerates the permutation
    distribution (only feasible for small samples). ``tie_correction=False``
    uses the plain variance n1*n2*(n+1)/12, matching analyses that treat the
    samples as tie-free.
    """
    if alternative not in ("two-sided", "greater"):
        raise ValueError(f"unsupported alternative {alternative!r}")
    n1, n2 = len(sample1), len(sample2)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    pooled = list(sample1) + list(sample2)
    ranks = _midranks(pooled)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0
    mu = n1 * n2 / 2.0

    if exact:
        total = math.comb(n1 + n2, n1)
        hits = 0
        for combo in combinations(range(n1 + n2), n1):
            r = sum(ranks[i] for i in combo)
            u = r - n1 * (n1 + 1) / 2.0
            if alternative == "greater":
                extreme = u >= u1 - 1e-12
            else:
                extreme = abs(u - mu) >= abs(u1 - mu) - 1e-12
            if extreme:
                hits += 1
        return MannWhitneyResult(u1, float("nan"), hits / total, "exact_permutation")

    counts: dict[float, int] = {}
    for v in pooled:
        counts[v] = counts.get(v, 0) + 1
    n = n1 + n2
    tie_term = sum(t**3 - t for t in counts.values()) if tie_correction else 0
    sigma_sq = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if sigma_sq <= 0:
        return MannWhitneyResult(u1, 0.0, 1.0, "normal_approx")
    if alternative == "greater":
        z = (u1 - mu - 0.5) / math.sqrt(sigma_sq)
        p = float(norm.sf(z))
    else:
        z = (abs(u1 - mu) - 0.5) / math.sqrt(sigma_sq)
        p = 2.0 * float(norm.sf(z))
    return MannWhitneyResult(u1, z, min(1.0, p), "normal_approx")


def cohens_d(sample1: Sequence[float], sample2: Sequence[float]) -> Optional[float]:
    """Pooled-variance Cohen's d (sample variances, n-1 denominators).

    Returns None when the pooled variance is zero, which the caller should
    report rather than hide.
    """
    n1, n2 = len(sample1), len(sample2)
    if n1 < 2 or n2 < 2:
        raise ValueError("need at least two observations per sample")
    v1 = statistics.variance(sample1)
    v2 = statistics.variance(sample2)
    pooled = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
    if pooled == 0:
        return None
    return (statistics.fmean(sample1) - statistics.fmean(sample2)) / math.sqrt(pooled)


def fishers_exact_2x2(table: Sequence[Sequence[int]]) -> float:
    """Two-sided Fisher exact p-value by hypergeometric enumeration.

    Sums the probabilities of every table with the same margins whose
    probability does not exceed the observed table's. Degenerate margins
    (an empty row or column) give p = 1.0.
    """
    (a, b), (c, d) = table
    if min(a, b, c, d) < 0:
        raise ValueError("table entries must be non-negative")
    row1, row2 = a + b, c + d
    col1, col2 = a + c, b + d
    n = row1 + row2
    if row1 == 0 or row2 == 0 or col1 == 0 or col2 == 0:
        return 1.0

    denom = math.comb(n, col1)

    def prob(x: int) -> float:
        return math.comb(row1, x) * math.comb(row2, col1 - x) / denom

    observed = prob(a)
    lo = max(0, col1 - row2)
    hi = min(col1, row1)
    total = sum(prob(x) for x in range(lo, hi + 1) if prob(x) <= observed * (1 + 1e-9))
    return min(1.0, total)


def contingency_by_method(records: Sequence[dict]) -> list[list[int]]:
    """[[m3 success, m3 miss], [other L3a success, other L3a miss]]."""
    m3 = [r for r in records if r["resolution_method"] == METHOD_M3]
    det = [r for r in records if r["resolution_method"] == METHOD_DETERMINISTIC]

    def split(rows: list[dict]) -> list[int]:
        ok = sum(1 for r in rows if r["nav_outcome"] == OUTCOME_COMPLETE)
        return [ok, len(rows) - ok]

    return [split(m3), split(det)]


# ---------------------------------------------------------------------------
# session reports


@dataclass(frozen=True)
class LatencySummary:
    n: int
    mean: float
    sd_population: float
    sd_sample: Optional[float]  # None when n < 2

    @staticmethod
    def of(values: Sequence[float]) -> Optional["LatencySummary"]:
        values = list(values)
        if not values:
            return None
        return LatencySummary(
            n=len(values),
            mean=round(statistics.fmean(values), 3),
            sd_population=round(statistics.pstdev(values), 3),
            sd_sample=round(statistics.stdev(values), 3) if len(values) > 1 else None,
        )


@dataclass
class ScenarioStats:
    scenario: str
    decisions: int
    method_counts: dict
    nav_success: int
    nav_success_rate: float
    confirmed: int
    vlm_latency: Optional[LatencySummary]


@dataclass
class SessionReport:
    platform_ids: list[str]
    total_decisions: int
    return_commands_excluded: int
    method_counts: dict
    nav_success: int
    nav_success_rate: float
    success_interval_95: tuple[float, float]
    scenarios: list[ScenarioStats]
    vlm_latency: Optional[LatencySummary]
    resolve_ms_by_method: dict
    per_platform_decisions: dict = field(default_factory=dict)


def build_session_report(records: Sequence[dict]) -> SessionReport:
    """Summarize decision records; return commands are excluded throughout."""
    decisions = [r for r in records if "event" not in r]
    returns = [r for r in decisions if r["extra"].get("return_command")]
    included = [r for r in decisions if not r["extra"].get("return_command")]

    method_counts = {}
    for r in included:
        method_counts[r["resolution_method"]] = method_counts.get(r["resolution_method"], 0) + 1

    success = sum(1 for r in included if r["nav_outcome"] == OUTCOME_COMPLETE)
    interval = clopper_pearson_interval(success, len(included)) if included else (0.0, 1.0)

    scenarios = []
    for name in sorted({r["extra"].get("scenario", "") for r in included}):
        rows = [r for r in included if r["extra"].get("scenario", "") == name]
        mc = {}
        for r in rows:
            mc[r["resolution_method"]] = mc.get(r["resolution_method"], 0) + 1
        ok = sum(1 for r in rows if r["nav_outcome"] == OUTCOME_COMPLETE)
        scenarios.append(
            ScenarioStats(
                scenario=name or "(unlabeled)",
                decisions=len(rows),
                method_counts=mc,
                nav_success=ok,
                nav_success_rate=round(ok / len(rows), 4),
                confirmed=sum(1 for r in rows if r["confirmation"].get("confirmed")),
                vlm_latency=LatencySummary.of(
                    [r["timing"]["vlm_ms"] for r in rows if r["resolution_method"] == METHOD_VLM]
                ),
            )
        )

    resolve_by_method = {}
    for method in (METHOD_M3, METHOD_DETERMINISTIC, METHOD_VLM):
        summary = LatencySummary.of(
            [r["timing"]["resolve_ms"] for r in included if r["resolution_method"] == method]
        )
        if summary is not None:
            resolve_by_method[method] = summary

    per_platform = {}
    for r in included:
        per_platform[r["platform_id"]] = per_platform.get(r["platform_id"], 0) + 1

    return SessionReport(
        platform_ids=sorted({r["platform_id"] for r in decisions}),
        total_decisions=len(included),
        return_commands_excluded=len(returns),
        method_counts=method_counts,
        nav_success=success,
        nav_success_rate=round(success / len(included), 4) if included else 0.0,
        success_interval_95=(round(interval[0], 4), round(interval[1], 4)),
        scenarios=scenarios,
        vlm_latency=LatencySummary.of(
            [r["timing"]["vlm_ms"] for r in included if r["resolution_method"] == METHOD_VLM]
        ),
        resolve_ms_by_method=resolve_by_method,
        per_platform_decisions=per_platform,
    )


def write_report_csv(report: SessionReport, path: str | Path) -> None:
    """One row per scenario plus a TOTAL row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "scenario",
                "decisions",
                "nav_success",
                "nav_success_rate",
                "confirmed",
                "vlm_n",
                "vlm_mean_ms",
                "vlm_sd_population_ms",
                "vlm_sd_sample_ms",
            ]
        )
        for s in report.scenarios:
            lat = s.vlm_latency
            writer.writerow(
                [
                    s.scenario,
                    s.decisions,
                    s.nav_success,
                    s.nav_success_rate,
                    s.confirmed,
                    lat.n if lat else 0,
                    lat.mean if lat else "",
                    lat.sd_population if lat else "",
                    (lat.sd_sample if lat.sd_sample is not None else "") if lat else "",
                ]
            )
        lat = report.vlm_latency
        writer.writerow(
            [
                "TOTAL",
                report.total_decisions,
                report.nav_success,
                report.nav_success_rate,
                sum(s.confirmed for s in report.scenarios),
                lat.n if lat else 0,
                lat.mean if lat else "",
                lat.sd_population if lat else "",
                (lat.sd_sample if lat.sd_sample is not None else "") if lat else "",
            ]
        )
