"""Command-line entry point.

Exit codes: 2 usage error (argument parsing), 3 input error (bad paths or
malformed data), 4 runtime failure. Every subcommand supports
``--format json-lines`` for machine-readable output.
"""
from __future__ import annotations

import json
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path

import click

from . import analytics, bridge, experiment, memory, simulation, vlm
from .executive import read_audit_file
from .resolver import EscalationSignal, ResolveTrace, resolve
from .world import WorldError, load_policy, load_world

EXIT_INPUT = 3
EXIT_RUNTIME = 4

PLATFORM_ID_ENV = "XPLORER_PLATFORM_ID"


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def _emit(ctx: click.Context, payload: dict, text: str) -> None:
    if ctx.obj["format"] == "json-lines":
        click.echo(json.dumps(payload, sort_keys=True, default=_plain))
    else:
        click.echo(text)


def _plain(value):
    if is_dataclass(value) and not isinstance(value, type):
        return asdict(value)
    if isinstance(value, (set, frozenset, tuple)):
        return sorted(value) if isinstance(value, (set, frozenset)) else list(value)
    return str(value)


def _load_world(ctx: click.Context):
    cfg = ctx.obj
    try:
        if cfg["graph"] or cfg["pois"]:
            if not (cfg["graph"] and cfg["pois"]):
                raise InputError("--graph and --pois must be given together")
            return load_world(cfg["graph"], cfg["pois"])
        return experiment.fiir_world()
    except WorldError as exc:
        raise InputError(str(exc)) from exc


def _load_policy(ctx: click.Context):
    try:
        return load_policy(ctx.obj["policy"]) if ctx.obj["policy"] else experiment.default_policy()
    except (WorldError, OSError) as exc:
        raise InputError(str(exc)) from exc


def _load_digest(ctx: click.Context):
    path = ctx.obj["digest"]
    return memory.load_digest(path) if path else None


def _backend(ctx: click.Context):
    cfg = ctx.obj
    if cfg["backend"] == "http":
        return vlm.HttpChatBackend(endpoint=cfg["endpoint"] or vlm.DEFAULT_CHAT_URL, model=cfg["model"])
    return experiment.build_oracle()


def _script(name_or_path: str) -> simulation.ScenarioScript:
    path = Path(name_or_path)
    try:
        if path.exists():
            return simulation.load_script(path)
        return experiment.bundled_script(name_or_path)
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"cannot load script {name_or_path!r}: {exc}") from exc


def _check_exists(label: str, value) -> None:
    if value and not Path(value).exists():
        raise InputError(f"{label} path does not exist: {value}")


@click.group()
@click.option("--graph", type=str, default=None, help="Navigation graph GeoJSON (default: bundled).")
@click.option("--pois", type=str, default=None, help="Static POI GeoJSON (default: bundled).")
@click.option("--policy", type=str, default=None, help="Policy YAML (default: bundled).")
@click.option("--digest", type=str, default=None, help="Compiled memory digest JSON.")
@click.option(
    "--platform-id", envvar=PLATFORM_ID_ENV, default="xplorer-c", show_default=True,
    help=f"Platform attribution tag (env: {PLATFORM_ID_ENV}).",
)
@click.option("--backend", type=click.Choice(["oracle", "http"]), default="oracle", show_default=True)
@click.option("--endpoint", default=None, help="Chat endpoint for --backend http.")
@click.option("--model", default=vlm.DEFAULT_MODEL, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=str, default="out", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]), default="text", show_default=True)
@click.pass_context
def main(ctx, graph, pois, policy, digest, platform_id, backend, endpoint, model, seed, out_dir, fmt):
    """Semantic navigation stack: resolver, sessions, memory, analytics."""
    for label, value in (("--graph", graph), ("--pois", pois), ("--policy", policy), ("--digest", digest)):
        _check_exists(label, value)
    ctx.obj = {
        "graph": graph,
        "pois": pois,
        "policy": policy,
        "digest": digest,
        "platform_id": platform_id,
        "backend": backend,
        "endpoint": endpoint,
        "model": model,
        "seed": seed,
        "out_dir": out_dir,
        "format": fmt,
    }


@main.command("resolve")
@click.argument("instruction")
@click.option("--pose", nargs=3, type=float, default=(0.0, 0.0, 0.0), show_default=True)
@click.pass_context
def cmd_resolve(ctx, instruction, pose):
    """Run the fast-path cascade on one instruction and print the outcome."""
    graph, pois = _load_world(ctx)
    policy = _load_policy(ctx)
    trace = ResolveTrace()
    result = resolve(instruction, graph, pois, pose, _load_digest(ctx), policy, trace)
    if isinstance(result, EscalationSignal):
        _emit(
            ctx,
            {"escalated": True, "reason": result.reason, "steps_evaluated": trace.steps_evaluated},
            f"escalation after steps {trace.steps_evaluated}:\n  " + result.reason.replace("; ", "\n  "),
        )
    else:
        _emit(
            ctx,
            {
                "escalated": False,
                "node_id": result.node_id,
                "step": result.step,
                "method": result.method,
            },
            f"node {result.node_id} / step {result.step} ({result.method})",
        )


def _summarize(ctx, result: simulation.SessionResult) -> None:
    for e in result.entries:
        _emit(
            ctx,
            e.to_dict(),
            f"{e.platform_id} | {e.instruction!r} -> node {e.node_id} "
            f"[{e.resolution_method}] {e.nav_outcome} confirmed={e.confirmation['confirmed']}",
        )


@main.command("run-session")
@click.argument("script")
@click.pass_context
def cmd_run_session(ctx, script):
    """Replay a mission script (bundled name or YAML path) and audit it."""
    graph, pois = _load_world(ctx)
    policy = _load_policy(ctx)
    sc = _script(script)
    out = Path(ctx.obj["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    result = simulation.run_session(
        sc, graph, pois, policy, _backend(ctx), out / f"session_{sc.platform_id}.jsonl",
        digest=_load_digest(ctx),
        monitor_csv=out / f"monitor_{sc.platform_id}.csv",
    )
    _summarize(ctx, result)


@main.command("run-concurrent")
@click.argument("script_a")
@click.argument("script_b")
@click.pass_context
def cmd_run_concurrent(ctx, script_a, script_b):
    """Run two mission scripts in parallel against one shared backend."""
    graph, pois = _load_world(ctx)
    policy = _load_policy(ctx)
    a, b = _script(script_a), _script(script_b)
    if a.platform_id == b.platform_id:
        raise InputError("concurrent scripts must target distinct platform ids")
    out = Path(ctx.obj["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    digest = _load_digest(ctx)
    results = simulation.run_concurrent(
        [
            simulation.ConcurrentJob(a, out / f"session_{a.platform_id}.jsonl", digest=digest),
            simulation.ConcurrentJob(b, out / f"session_{b.platform_id}.jsonl", digest=digest),
        ],
        graph, pois, policy, _backend(ctx),
    )
    for result in results.values():
        _summarize(ctx, result)


@main.command("serve-bridge")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8711, show_default=True)
@click.option("--pose", nargs=3, type=float, default=(0.0, 0.0, 0.0), show_default=True)
@click.pass_context
def cmd_serve_bridge(ctx, host, port, pose):
    """Serve the context bridge (pose/graph/objects/camera) over HTTP."""
    graph, pois = _load_world(ctx)
    app = bridge.create_app(graph, pois, pose=pose)
    bridge.serve(app, host=host, port=port)


@main.command("extract-memory")
@click.argument("logs_dir")
@click.option("--platforms", default=",".join(experiment.PLATFORMS), show_default=True)
@click.pass_context
def cmd_extract_memory(ctx, logs_dir, platforms):
    """Rebuild M1-M5 memory files from a directory of audit logs."""
    _check_exists("logs", logs_dir)
    _, pois = _load_world(ctx)
    policy = _load_policy(ctx)
    files = sorted(Path(logs_dir).glob("*.jsonl"))
    if not files:
        raise InputError(f"no .jsonl audit files under {logs_dir}")
    platform_list = [p for p in platforms.split(",") if p]
    try:
        store = memory.extract_memory(files, pois, platform_list, policy)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = Path(ctx.obj["out_dir"])
    written = memory.write_memory_files(store, out, platform_list)
    for path in written:
        _emit(ctx, {"written": str(path)}, f"wrote {path}")


@main.command("refresh-memory")
@click.argument("logs_dir")
@click.argument("memory_dir")
@click.option("--platforms", default=",".join(experiment.PLATFORMS), show_default=True)
@click.pass_context
def cmd_refresh_memory(ctx, logs_dir, memory_dir, platforms):
    """Validate logs, re-extract memory, diff and hash the digest."""
    _check_exists("logs", logs_dir)
    _, pois = _load_world(ctx)
    policy = _load_policy(ctx)
    try:
        report = memory.refresh_workflow(
            logs_dir, memory_dir, pois, [p for p in platforms.split(",") if p], policy
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(ctx, asdict(report), report.render())


@main.command("compile-digest")
@click.argument("logs_dir")
@click.option("--out", "out_path", default=None, help="Digest path (default <out-dir>/digest.json).")
@click.option("--platforms", default=",".join(experiment.PLATFORMS), show_default=True)
@click.pass_context
def cmd_compile_digest(ctx, logs_dir, out_path, platforms):
    """Extract memory from logs and write the compiled digest."""
    _check_exists("logs", logs_dir)
    _, pois = _load_world(ctx)
    policy = _load_policy(ctx)
    files = sorted(Path(logs_dir).glob("*.jsonl"))
    if not files:
        raise InputError(f"no .jsonl audit files under {logs_dir}")
    try:
        store = memory.extract_memory(files, pois, [p for p in platforms.split(",") if p], policy)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    digest = memory.compile_digest(store, policy)
    path = Path(out_path) if out_path else Path(ctx.obj["out_dir"]) / "digest.json"
    md5 = memory.write_digest(digest, path)
    _emit(
        ctx,
        {"path": str(path), "md5": md5, "chars": len(digest.serialize()),
         "promotions": [p.key for p in digest.promotions]},
        f"digest {path} md5 {md5} ({len(digest.serialize())} chars, "
        f"{len(digest.promotions)} promotions)",
    )


@main.command("report")
@click.argument("logs", nargs=-1, required=True)
@click.option("--csv", "csv_path", default=None, help="Also write the scenario table as CSV.")
@click.pass_context
def cmd_report(ctx, logs, csv_path):
    """Summarize one or more audit files (return commands excluded)."""
    records = []
    for path in logs:
        _check_exists("log", path)
        try:
            records.extend(read_audit_file(path))
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    report = analytics.build_session_report(records)
    if csv_path:
        analytics.write_report_csv(report, csv_path)
    text = [
        f"platforms: {', '.join(report.platform_ids)}",
        f"decisions: {report.total_decisions} "
        f"(+{report.return_commands_excluded} return commands excluded)",
        f"methods: {report.method_counts}",
        f"nav success: {report.nav_success}/{report.total_decisions} "
        f"CI95 {report.success_interval_95}",
    ]
    for s in report.scenarios:
        lat = f", vlm {s.vlm_latency.mean} ms" if s.vlm_latency else ""
        text.append(
            f"  {s.scenario}: n={s.decisions} success {s.nav_success}/{s.decisions}"
            f" confirmed {s.confirmed}{lat}"
        )
    _emit(ctx, asdict(report), "\n".join(text))


def _parse_floats(raw: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v]
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {raw!r}") from exc


@main.command("stats")
@click.argument("test", type=click.Choice(["clopper-pearson", "mann-whitney", "cohens-d", "fisher"]))
@click.argument("args", nargs=-1)
@click.option(
    "--alternative", type=click.Choice(["two-sided", "greater"]), default="two-sided",
    show_default=True, help="Sidedness for mann-whitney.",
)
@click.pass_context
def cmd_stats(ctx, test, args, alternative):
    """Run one statistical test. Samples are comma-separated number lists."""
    try:
        if test == "clopper-pearson":
            successes, trials = int(args[0]), int(args[1])
            lo, hi = analytics.clopper_pearson_interval(successes, trials)
            _emit(ctx, {"lower": lo, "upper": hi}, f"[{lo:.3f}, {hi:.3f}]")
        elif test == "mann-whitney":
            r = analytics.mann_whitney(
                _parse_floats(args[0]), _parse_floats(args[1]), alternative=alternative
            )
            _emit(
                ctx,
                {"u": r.u_statistic, "z": r.z, "p": r.p_value, "method": r.method},
                f"U = {r.u_statistic:.0f}, p = {r.p_value:.3g} ({r.method})",
            )
        elif test == "cohens-d":
            d = analytics.cohens_d(_parse_floats(args[0]), _parse_floats(args[1]))
            _emit(ctx, {"d": d}, "d undefined (zero pooled variance)" if d is None else f"d = {d:.2f}")
        else:
            a, b, c, d_ = (int(v) for v in args[:4])
            p = analytics.fishers_exact_2x2([[a, b], [c, d_]])
            _emit(ctx, {"p": p}, f"p = {p:.3f}")
    except (IndexError, ValueError) as exc:
        raise InputError(f"bad arguments for {test}: {exc}") from exc


@main.command("repl")
@click.pass_context
def cmd_repl(ctx):
    """Interactive loop: type instructions, watch the full pipeline decide."""
    graph, pois = _load_world(ctx)
    policy = _load_policy(ctx)
    digest = _load_digest(ctx)
    backend = _backend(ctx)
    model = simulation.NavOutcomeModel(ctx.obj["seed"])
    out = Path(ctx.obj["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    pose = (0.0, 0.0, 0.0)
    click.echo("instruction> (empty line to quit)")
    while True:
        try:
            line = input("instruction> ").strip()
        except EOFError:
            break
        if not line:
            break
        script = simulation.ScenarioScript(
            platform_id=ctx.obj["platform_id"],
            missions=(simulation.Mission(instruction=line, pose=pose, scenario="repl"),),
            seed=ctx.obj["seed"],
        )
        result = simulation.run_session(
            script, graph, pois, policy, backend, out / "repl.jsonl",
            digest=digest, outcome_model=model,
        )
        entry = result.entries[0]
        click.echo(
            f"  -> node {entry.node_id} [{entry.resolution_method}] "
            f"{entry.nav_outcome}, confirmed={entry.confirmation['confirmed']} "
            f"({entry.confirmation['confirmation_method']})"
        )
        if entry.node_id is not None and graph.has_node(entry.node_id):
            node = graph.node(entry.node_id)
            pose = (node.x, node.y, 0.0)  # next instruction starts where we landed


def entrypoint() -> None:
    try:
        main(standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(2)
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except Exception as exc:  # noqa: BLE001 - last-resort runtime mapping
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)


if __name__ == "__main__":
    entrypoint()
