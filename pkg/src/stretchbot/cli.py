"""Command-line interface: interactive sessions, scenario replay, the HTTP
service, and metrics tables from exported event logs."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import events as ev
from .config import load_config, parse_latency_spec
from .knowledge import FixtureFallbackClient, load_default_knowledge_graph, load_knowledge_graph
from .reasoner import (
    HttpReasonerClient,
    MockReasonerClient,
    ReasonerError,
    request_decision,
)
from .routine import default_routine_script, load_routine_script
from .scenario import load_scenario, replay_scenario, shipped_scenario_paths
from .service import ServiceDefaults
from .session import SessionEngine, WallClock


def _load_inputs(kg_path: Optional[str], config_path: Optional[str], latency: Optional[str]):
    config = load_config(config_path)
    if latency:
        from dataclasses import replace

        config = replace(config, latency=parse_latency_spec(latency))
    kg = load_knowledge_graph(Path(kg_path)) if kg_path else load_default_knowledge_graph()
    return config, kg


@click.group()
def main() -> None:
    """Adaptive stretching-coach simulator."""


@main.command()
@click.option("--kg", "kg_path", type=click.Path(exists=True), help="Knowledge-graph JSON file.")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Config JSON file.")
@click.option("--routine", "routine_path", type=click.Path(exists=True), help="Routine script JSON file.")
@click.option("--mock", "mock_path", type=click.Path(exists=True), help="Mock reasoner script (JSONL).")
@click.option("--endpoint", help="Chat-completions endpoint base URL.")
@click.option("--model", help="Model id for the remote endpoint.")
@click.option("--latency", help="Latency injection: off, fixed:N, LO-HI, or slow.")
def run(kg_path, config_path, routine_path, mock_path, endpoint, model, latency) -> None:
    """Interactive text session against a mock script or a remote reasoner.

    Inside the session: plain text is a user utterance; /objects A,B sets the
    detected objects; /emotion CH L=P[,L=P..] sets one channel; /segment NAME SECONDS
    fast-forwards a landmark segment; /state prints a snapshot; /quit exits.
    """
    config, kg = _load_inputs(kg_path, config_path, latency)
    script = load_routine_script(Path(routine_path)) if routine_path else default_routine_script()
    if mock_path:
        client = MockReasonerClient.from_file(mock_path)
    elif endpoint and model:
        client = HttpReasonerClient(endpoint, model)
    else:
        raise click.UsageError("provide --mock SCRIPT or --endpoint URL --model ID")

    engine = SessionEngine("interactive", config, kg, FixtureFallbackClient(), script, WallClock())

    def resolve(intent) -> None:
        raw, error = None, None
        try:
            reply = request_decision(intent.prompt.system_prompt, client, timeout=config.reasoner_timeout)
            raw = reply.raw_text
            latency_s = reply.latency
        except ReasonerError as exc:
            error, latency_s = f"{type(exc).__name__}: {exc}", 0.0
        next_intent = engine.on_reasoner_result(intent, raw_text=raw, error=error, latency=latency_s)
        _echo_spoken(engine)
        if next_intent is not None:
            resolve(next_intent)

    spoken_seen = 0

    def _echo_spoken(eng: SessionEngine) -> None:
        nonlocal spoken_seen
        for event in eng.log.events_since(spoken_seen):
            if event.kind == "spoke":
                click.secho(f"coach> {event.data['text']}", fg="cyan")
        spoken_seen = len(eng.log)

    click.echo("Session started; type /quit to exit.")
    while not engine.state.stopped:
        try:
            line = click.prompt("you", prompt_suffix="> ", default="", show_default=False)
        except (EOFError, KeyboardInterrupt):
            break
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            break
        if line == "/state":
            click.echo(json.dumps(engine.snapshot(), indent=2))
            continue
        if line.startswith("/objects"):
            names = [x.strip() for x in line[len("/objects"):].split(",") if x.strip()]
            tokens = []
            for name in names:
                info = config.resolve_object(name)
                if info is None:
                    click.secho(f"unknown object: {name}", fg="red")
                    break
                tokens.append(info.token)
            else:
                engine.on_objects(tokens)
                click.echo(f"objects set: {tokens}")
            continue
        if line.startswith("/emotion"):
            try:
                _, channel, *pairs = line.split()
                scores = dict(pair.split("=") for pair in " ".join(pairs).split(","))
                engine.on_emotion({channel: {k.strip(): float(v) for k, v in scores.items()}})
                click.echo(f"emotion set: {engine.fused.label if engine.fused else None}")
            except (ValueError, KeyError) as exc:
                click.secho(f"bad /emotion syntax: {exc}", fg="red")
            continue
        if line.startswith("/segment"):
            try:
                _, name, seconds = line.split()
                from .generators import generate_segment

                engine.on_segment(name, float(seconds))
                intent = None
                for frame in generate_segment(name, engine.clock.now(), float(seconds), config.pose.frame_period):
                    intent = engine.on_frame(frame) or intent
                _echo_spoken(engine)
                if intent is not None:
                    resolve(intent)
            except Exception as exc:
                click.secho(f"segment failed: {exc}", fg="red")
            continue
        intent = engine.on_utterance(line)
        if intent is not None:
            resolve(intent)
    click.echo("Session over.")


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), help="Write the event log (JSONL) here.")
@click.option("--kg", "kg_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
def replay(scenario_path, out_path, kg_path, config_path) -> None:
    """Deterministically replay a scenario file and print a summary."""
    config, kg = _load_inputs(kg_path, config_path, None)
    scenario = load_scenario(scenario_path)
    result = replay_scenario(scenario, config=config, kg=kg)
    if out_path:
        result.engine.log.write_jsonl(out_path)
        click.echo(f"event log written to {out_path}")
    snapshot = result.snapshot
    click.echo(f"scenario:  {scenario.name}")
    click.echo(f"events:    {len(result.events)}")
    click.echo(f"digest:    {result.digest}")
    click.echo(f"phase:     {snapshot['phase']}")
    click.echo(f"completed: {result.metrics.exercises_completed} exercise(s)")


@main.command()
def scenarios() -> None:
    """List the scenario files shipped with the package."""
    for name, path in shipped_scenario_paths().items():
        click.echo(f"{name}\t{path}")


@main.command()
@click.option("--port", default=8787, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--kg", "kg_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--routine", "routine_path", type=click.Path(exists=True))
@click.option("--mock", "mock_path", type=click.Path(exists=True), help="Mock reasoner script for every session.")
@click.option("--endpoint", help="Chat-completions endpoint base URL.")
@click.option("--model", help="Model id for the remote endpoint.")
@click.option("--latency", help="Latency injection: off, fixed:N, LO-HI, or slow.")
def serve(port, host, kg_path, config_path, routine_path, mock_path, endpoint, model, latency) -> None:
    """Run the session service (HTTP API + event stream)."""
    from .service import serve as run_service

    config, kg = _load_inputs(kg_path, config_path, latency)
    script = load_routine_script(Path(routine_path)) if routine_path else None
    defaults = ServiceDefaults(config=config, kg=kg, script=script, mock_script_path=mock_path)
    if endpoint and model:
        defaults.client_factory = lambda: HttpReasonerClient(endpoint, model)
    click.echo(f"serving on http://{host}:{port}")
    run_service(defaults, host=host, port=port)


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
def metrics(log_path) -> None:
    """Print a metrics table computed from an exported event log."""
    records = ev.read_jsonl(log_path)
    m = ev.metrics_from_events(records)
    rows = [
        ("events", len(records)),
        ("kg internal hits", m.kg_internal_hits),
        ("kg fallbacks", m.kg_fallbacks),
        ("decisions", m.decisions_total),
        ("decisions approved", m.decisions_approved),
        *((f"edits: {cls}", n) for cls, n in m.verifier_edits.items()),
        ("reasoner failures", m.reasoner_failures),
        ("corrective resets", m.corrective_resets),
        ("exercises completed", m.exercises_completed),
    ]
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        click.echo(f"{label.ljust(width)}  {value}")
    if m.decision_latencies:
        lat = m.decision_latencies
        click.echo(
            f"{'decision latency (s)'.ljust(width)}  "
            f"min={min(lat):.2f} mean={sum(lat) / len(lat):.2f} max={max(lat):.2f}"
        )


if __name__ == "__main__":
    main()
