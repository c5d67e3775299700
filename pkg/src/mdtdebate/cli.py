"""Headless runner and auditor.

Subcommands: ``run`` executes a scripted (or live) debate from files and
writes the .mdtlog plus reports; ``replay`` refolds a log, recomputing all
derived analytics against the recorded ones; ``export`` renders a report from
a log; ``serve`` starts the HTTP service.

Exit codes for ``run``: 0 clean, 2 invalid spec, 3 transport failure,
4 internal invariant violation.
"""

from __future__ import annotations

import hashlib
import sys
from pathlib import Path

import click

from . import report as report_mod
from . import wire
from .case import RuleBasedExtractor, extract_case_items
from .engine import DebateEngine
from .errors import (
    CorruptFile,
    DebateError,
    InvalidAgentReply,
    InvariantViolation,
    StorageFailure,
    TransportDown,
)
from .events import fixed_clock, load_session, replay_events
from .service import ServiceConfig, run_service
from .transport import ScriptedTransport

_SPEC_ERRORS = (
    "InvalidCase", "DuplicateAgent", "TooFewAgents", "InvalidConfig",
    "UnknownItem", "UnknownAgent", "InvalidCategory",
)


def _load_case(path: Path):
    if path.suffix == ".json":
        return wire.decode_case(wire.load_json(path))
    narrative = path.read_text(encoding="utf-8")
    case_id = f"case-{hashlib.sha256(narrative.encode('utf-8')).hexdigest()[:12]}"
    return extract_case_items(narrative, RuleBasedExtractor(), case_id=case_id)


def _load_agents(path: Path):
    return [wire.decode_agent(doc) for doc in wire.load_json(path)]


def _load_debate_config(path: Path | None):
    if path is None:
        return wire.decode_config({})
    return wire.decode_config(wire.load_json(path))


def _apply_directive(engine: DebateEngine, directive: dict) -> dict:
    kind = directive.get("kind", "")
    try:
        if kind == "intervention":
            rnd = engine.submit_intervention(
                selected_item_ids=directive.get("items", []),
                instruction=directive.get("instruction", ""),
                target_agent_ids=directive.get("targets", []),
            )
            detail = f"intervention after round {directive['after_round']} -> revision round {rnd.round_index}"
        elif kind == "reeval":
            rnd = engine.request_reeval(directive.get("conflict_id", ""))
            detail = f"reeval of {directive.get('conflict_id')} -> round {rnd.round_index}"
        elif kind == "control":
            status = engine.control(directive.get("action", ""), directive.get("agent_id"))
            detail = f"control {directive.get('action')} -> phase {status.phase}"
        else:
            return {"status": "rejected", "detail": f"unknown directive kind {kind!r}"}
    except (TransportDown, InvalidAgentReply, InvariantViolation):
        raise
    except DebateError as exc:
        return {"status": "rejected", "detail": f"{kind}: {exc.code}: {exc.message}"}
    return {"status": "applied", "detail": detail}


@click.group()
def main() -> None:
    """Multi-agent diagnostic debate runner and auditor."""


@main.command()
@click.option("--case", "case_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--agents", "agents_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--fixtures", "fixtures_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--directives", "directives_path", type=click.Path(exists=True, path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--session-id", "session_id", default=None, help="Defaults to a hash of the inputs.")
def run(case_path, agents_path, fixtures_dir, directives_path, config_path, out_dir, session_id):
    """Run a scripted debate: initial + debate rounds until convergence or
    budget, with directives applied as their rounds commit."""
    try:
        case = _load_case(case_path)
        agents = _load_agents(agents_path)
        config = _load_debate_config(config_path)
        directives = wire.load_json(directives_path) if directives_path else []
    except (CorruptFile, StorageFailure, OSError, KeyError, ValueError) as exc:
        click.echo(f"invalid run spec: {exc}", err=True)
        sys.exit(2)

    if session_id is None:
        basis = case.case_id + "".join(a.agent_id for a in agents) + wire.dumps(wire.encode_config(config))
        session_id = f"s-{hashlib.sha256(basis.encode('utf-8')).hexdigest()[:12]}"

    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "session.mdtlog"
    notes: list[dict] = []
    applied = [False] * len(directives)

    def process_ready() -> None:
        progressed = True
        while progressed:
            progressed = False
            for idx, directive in enumerate(directives):
                if applied[idx]:
                    continue
                if directive.get("after_round", -1) < len(engine.state.rounds):
                    applied[idx] = True
                    notes.append(_apply_directive(engine, directive))
                    progressed = True

    try:
        engine = DebateEngine.create_session(
            case, agents, config, ScriptedTransport(fixtures_dir),
            session_id=session_id, log_path=log_path, clock=fixed_clock(),
        )
        engine.run_round("initial")
        process_ready()
        while (
            engine.state.status.phase == "running"
            and engine.state.debate_rounds_used() < engine.state.config.max_debate_rounds
        ):
            engine.run_round("debate")
            process_ready()
        process_ready()
    except DebateError as exc:
        if exc.code in _SPEC_ERRORS:
            click.echo(f"invalid run spec: {exc.code}: {exc.message}", err=True)
            sys.exit(2)
        if exc.code in ("TransportDown", "InvalidAgentReply", "ExtractorUnavailable"):
            click.echo(f"transport failure: {exc.code}: {exc.message}", err=True)
            sys.exit(3)
        click.echo(f"invariant violation: {exc.code}: {exc.message}", err=True)
        sys.exit(4)

    for idx, directive in enumerate(directives):
        if not applied[idx]:
            notes.append(
                {
                    "status": "skipped",
                    "detail": f"{directive.get('kind')}: round {directive.get('after_round')} never committed",
                }
            )

    st = engine.state
    (out_dir / "report.md").write_text(report_mod.render_markdown(st, notes), encoding="utf-8")
    (out_dir / "report.json").write_text(
        wire.dumps(report_mod.export_json(st)) + "\n", encoding="utf-8"
    )
    engine.log.close()

    for rnd, summary in zip(st.rounds, st.summaries):
        support = ", ".join(f"{h}:{n}" for h, n in summary.support)
        click.echo(f"round {rnd.round_index} ({rnd.kind}): support {support}")
    consensus = st.consensus
    if consensus is not None and consensus.converged:
        click.echo(
            f"consensus: {st.registry.display_label(consensus.hypothesis_id)} "
            f"(share {consensus.support_share:.2f})"
        )
    else:
        click.echo("consensus: not reached")
    click.echo(f"log: {log_path}")


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(path_type=Path))
def replay(log_path):
    """Refold a log, recompute all derived analytics, and report divergences."""
    try:
        _header, events = load_session(log_path)
        _final, divergences = replay_events(events)
    except (CorruptFile, StorageFailure) as exc:
        click.echo(f"corrupt log: {exc.message}", err=True)
        sys.exit(2)
    click.echo(f"checked {len(events)} events; {len(divergences)} divergences")
    for d in divergences:
        click.echo(f"  seq {d.seq} [{d.kind}]: {d.message}")
    sys.exit(0 if not divergences else 1)


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["md", "json"]), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path))
def export(log_path, fmt, out_path):
    """Render a report from a log (markdown or the JSON wire schemas)."""
    try:
        _header, events = load_session(log_path)
        final, _divergences = replay_events(events)
    except (CorruptFile, StorageFailure) as exc:
        click.echo(f"corrupt log: {exc.message}", err=True)
        sys.exit(2)
    if fmt == "md":
        document = report_mod.render_markdown(final)
    else:
        document = wire.dumps(report_mod.export_json(final)) + "\n"
    if out_path:
        Path(out_path).write_text(document, encoding="utf-8")
    else:
        click.echo(document, nl=False)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
def serve(config_path):
    """Start the HTTP service."""
    config = ServiceConfig.load(config_path)
    config.validate()
    run_service(config)


if __name__ == "__main__":
    main()
