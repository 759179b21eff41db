"""Bundled world fixtures and the full three-session replay.

Ties the other modules together: seed phase -> initial digest -> learning
session -> memory refresh -> transfer session -> concurrent session. Every
step is deterministic, so the replay doubles as the acceptance harness.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .executive import Clock
from .memory import Digest, RefreshReport, load_digest, refresh_workflow
from .simulation import (
    ConcurrentJob,
    ScenarioScript,
    SessionResult,
    load_script,
    run_concurrent,
    run_session,
)
from .vlm import OracleRule, ScriptedOracle
from .world import NavGraph, Policy, StaticPoi, load_policy, load_world

PLATFORMS = ("xplorer-b", "xplorer-c")


def _data_path(name: str) -> Path:
    return Path(str(resources.files("semnav.data").joinpath(name)))


def fiir_world() -> tuple[NavGraph, list[StaticPoi]]:
    """The bundled 24-node / 60-edge corridor graph with its 18 static POIs."""
    return load_world(_data_path("fiir_graph.geojson"), _data_path("fiir_pois.geojson"))


def default_policy() -> Policy:
    return load_policy(_data_path("policy.yaml"))


def bundled_script(name: str) -> ScenarioScript:
    return load_script(_data_path(f"scenarios/{name}.yaml"))


def build_oracle(path: Optional[str | Path] = None, real_time: bool = False) -> ScriptedOracle:
    """Load the scripted oracle rules and per-node confirmation scenes."""
    doc = yaml.safe_load(Path(path or _data_path("scenarios/oracle.yaml")).read_text(encoding="utf-8"))
    rules = [
        OracleRule(
            instruction=r["instruction"],
            responses=[(int(n), str(reason), float(ms)) for n, reason, ms in r["responses"]],
        )
        for r in doc["rules"]
    ]
    scenes = {int(k): str(v) for k, v in doc.get("scenes", {}).items()}
    return ScriptedOracle(rules, scenes, seed=int(doc.get("seed", 0)), real_time=real_time)


@dataclass
class ExperimentArtifacts:
    logs_dir: Path
    memory_dir: Path
    digest_initial: Digest
    digest_after_a: Digest
    seed_result: SessionResult
    session_a: SessionResult
    session_b: SessionResult
    session_c: dict[str, SessionResult]
    refresh_initial: RefreshReport
    refresh_after_a: RefreshReport

    @property
    def audit_files(self) -> list[Path]:
        return sorted(self.logs_dir.glob("*.jsonl"))


def run_experiment(workdir: str | Path, clock: Optional[Clock] = None) -> ExperimentArtifacts:
    """Replay the complete protocol into ``workdir`` and return all artifacts.

    The digest evolves exactly twice: once after the seed phase (5 promoted
    preferences) and once after the learning session (6); the second digest
    is shared read-only by both platforms afterwards.
    """
    workdir = Path(workdir)
    logs = workdir / "logs"
    memory = workdir / "memory"
    logs.mkdir(parents=True, exist_ok=True)
    memory.mkdir(parents=True, exist_ok=True)

    graph, pois = fiir_world()
    policy = default_policy()

    # seed phase: no digest yet, every instruction escalates
    seed_result = run_session(
        bundled_script("seed_xplorer_c"),
        graph,
        pois,
        policy,
        build_oracle(),
        logs / "seed_xplorer_c.jsonl",
        digest=None,
        clock=clock,
        version="4.7.4",
    )
    refresh_initial = refresh_workflow(logs, memory, pois, PLATFORMS, policy)
    digest_initial = load_digest(memory / "digest.json")
    assert digest_initial is not None

    # session A: learning cycle on xplorer-c with the 5-preference digest
    session_a = run_session(
        bundled_script("session_a"),
        graph,
        pois,
        policy,
        build_oracle(),
        logs / "session_a_xplorer_c.jsonl",
        digest=digest_initial,
        clock=clock,
        version="4.8",
    )
    refresh_after_a = refresh_workflow(logs, memory, pois, PLATFORMS, policy)
    digest_after_a = load_digest(memory / "digest.json")
    assert digest_after_a is not None

    # session B: transfer to xplorer-b, digest frozen from here on
    session_b = run_session(
        bundled_script("session_b"),
        graph,
        pois,
        policy,
        build_oracle(),
        logs / "session_b_xplorer_b.jsonl",
        digest=digest_after_a,
        clock=clock,
        version="4.8",
    )

    # session C: both platforms concurrently, one shared backend + digest
    shared_backend = build_oracle()
    session_c = run_concurrent(
        [
            ConcurrentJob(
                bundled_script("session_c_xplorer_b"),
                logs / "session_c_xplorer_b.jsonl",
                digest=digest_after_a,
            ),
            ConcurrentJob(
                bundled_script("session_c_xplorer_c"),
                logs / "session_c_xplorer_c.jsonl",
                digest=digest_after_a,
            ),
        ],
        graph,
        pois,
        policy,
        shared_backend,
        clock=clock,
    )

    return ExperimentArtifacts(
        logs_dir=logs,
        memory_dir=memory,
        digest_initial=digest_initial,
        digest_after_a=digest_after_a,
        seed_result=seed_result,
        session_a=session_a,
        session_b=session_b,
        session_c=session_c,
        refresh_initial=refresh_initial,
        refresh_after_a=refresh_after_a,
    )
