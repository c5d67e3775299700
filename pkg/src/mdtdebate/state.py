"""Session state as a left-fold of the event log.

``apply_event`` is the single state-transition function: the live engine and
every replay/time-travel path go through it, so a fold over the full log
always equals the live session state. Recorded analytics (conflict deltas,
round summaries, consensus) are verified against recomputation during the
fold; mismatches either raise (live path) or are collected as divergences
(replay path).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Protocol

from . import analytics, wire
from .case import CaseRecord, ItemEdit, apply_item_edit
from .errors import IllegalEvent, InvariantViolation, OutOfRange
from .model import (
    AgentProfile,
    Conflict,
    ConflictDelta,
    ConflictResolution,
    ConflictUpdate,
    ConsensusSummary,
    DebateConfig,
    HypothesisRegistry,
    Intervention,
    LifecycleEvent,
    Opinion,
    Round,
    RoundSummary,
    SessionStatus,
    Trigger,
)

SESSION_CREATED = "SessionCreated"
CASE_ITEM_EDITED = "CaseItemEdited"
ROUND_STARTED = "RoundStarted"
STATEMENT_ACCEPTED = "StatementAccepted"
STATEMENT_REJECTED = "StatementRejected"
ROUND_COMMITTED = "RoundCommitted"
CONFLICT_OPENED = "ConflictOpened"
CONFLICT_UPDATED = "ConflictUpdated"
CONFLICT_RESOLVED = "ConflictResolved"
INTERVENTION_SUBMITTED = "InterventionSubmitted"
REEVAL_REQUESTED = "ReEvalRequested"
AGENT_MUTED = "AgentMuted"
AGENT_UNMUTED = "AgentUnmuted"
SESSION_PAUSED = "SessionPaused"
SESSION_RESUMED = "SessionResumed"
SESSION_TERMINATED = "SessionTerminated"

EVENT_KINDS = frozenset(
    {
        SESSION_CREATED, CASE_ITEM_EDITED, ROUND_STARTED, STATEMENT_ACCEPTED,
        STATEMENT_REJECTED, ROUND_COMMITTED, CONFLICT_OPENED, CONFLICT_UPDATED,
        CONFLICT_RESOLVED, INTERVENTION_SUBMITTED, REEVAL_REQUESTED, AGENT_MUTED,
        AGENT_UNMUTED, SESSION_PAUSED, SESSION_RESUMED, SESSION_TERMINATED,
    }
)

_CONFLICT_KINDS = (CONFLICT_OPENED, CONFLICT_UPDATED, CONFLICT_RESOLVED)


class EventLike(Protocol):
    seq: int
    kind: str
    payload: dict


@dataclass(frozen=True)
class Divergence:
    """A recorded value that disagrees with recomputation."""

    seq: int
    kind: str
    message: str


@dataclass
class PendingRound:
    """Working area between RoundStarted and RoundCommitted."""

    round_index: int
    kind: str
    spoke: tuple[str, ...]
    trigger: Trigger | None
    registry: HypothesisRegistry
    statements: dict[str, Opinion] = field(default_factory=dict)
    conflict_events: list[tuple[int, str, dict]] = field(default_factory=list)  # (seq, kind, payload)

    def copy(self) -> "PendingRound":
        return PendingRound(
            round_index=self.round_index,
            kind=self.kind,
            spoke=self.spoke,
            trigger=self.trigger,
            registry=self.registry.copy(),
            statements=dict(self.statements),
            conflict_events=list(self.conflict_events),
        )


@dataclass(frozen=True)
class SessionState:
    """Immutable snapshot of one session at a sequence number."""

    session_id: str
    case: CaseRecord
    agents: tuple[AgentProfile, ...]
    config: DebateConfig
    rounds: tuple[Round, ...] = ()
    summaries: tuple[RoundSummary, ...] = ()
    consensus: ConsensusSummary | None = None
    conflicts: dict[str, Conflict] = field(default_factory=dict)
    registry: HypothesisRegistry = field(default_factory=HypothesisRegistry)
    status: SessionStatus = field(default_factory=SessionStatus)
    interventions: dict[str, Intervention] = field(default_factory=dict)
    seq: int = 0
    pending: PendingRound | None = None

    def agent(self, agent_id: str) -> AgentProfile | None:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        return None

    def agent_order(self) -> tuple[str, ...]:
        return tuple(a.agent_id for a in self.agents)

    def unmuted_agents(self) -> tuple[str, ...]:
        muted = self.status.muted_agents
        return tuple(a.agent_id for a in self.agents if a.agent_id not in muted)

    def latest_opinion(self, agent_id: str, upto: int | None = None) -> Opinion | None:
        rounds = self.rounds if upto is None else self.rounds[:upto]
        for rnd in reversed(rounds):
            op = rnd.opinion_of(agent_id)
            if op is not None:
                return op
        return None

    def debate_rounds_used(self) -> int:
        return sum(1 for r in self.rounds if r.kind in ("initial", "debate"))

    def cited_item_ids_ever(self) -> frozenset[str]:
        ids: set[str] = set()
        for rnd in self.rounds:
            for op in rnd.opinions:
                ids.update(op.cited_item_ids())
        return frozenset(ids)


OnDivergence = Callable[[Divergence], None]


def _raise_divergence(d: Divergence) -> None:
    raise InvariantViolation(f"seq {d.seq} [{d.kind}]: {d.message}")


def _expected_changed_from(state: SessionState, op: Opinion) -> str | None:
    prior = state.latest_opinion(op.agent_id)
    if prior is not None and prior.hypothesis_id != op.hypothesis_id:
        return prior.hypothesis_id
    return None


_CARRY_EXEMPT = ("round_index", "carried_forward", "invalid_output")


def _verify_carry(prior: Opinion, op: Opinion) -> str | None:
    for f in dataclasses.fields(Opinion):
        if f.name in _CARRY_EXEMPT:
            continue
        if getattr(prior, f.name) != getattr(op, f.name):
            return f"carried opinion differs from prior in field {f.name!r}"
    if op.invalid_output != prior.invalid_output and not op.invalid_output:
        return "carried opinion cleared invalid_output"
    return None


def apply_event(
    state: SessionState | None,
    ev: EventLike,
    on_divergence: OnDivergence = _raise_divergence,
) -> SessionState:
    """Fold one event into the state.

    Raises IllegalEvent for sequences no engine can produce (commit without a
    started round, events after termination, ...). Verification failures of
    recorded derived data go through ``on_divergence``.
    """
    if ev.kind not in EVENT_KINDS:
        raise IllegalEvent(f"unknown event kind {ev.kind!r}")

    if state is None:
        if ev.kind != SESSION_CREATED:
            raise IllegalEvent(f"first event must be SessionCreated, got {ev.kind}")
        p = ev.payload
        case = wire.decode_case(p["case"])
        return SessionState(
            session_id=p["session_id"],
            case=case,
            agents=tuple(wire.decode_agent(a) for a in p["agents"]),
            config=wire.decode_config(p["config"]),
            seq=ev.seq,
        )

    if ev.kind == SESSION_CREATED:
        raise IllegalEvent("session already created")
    if state.status.phase == "terminated":
        raise IllegalEvent(f"no events after SessionTerminated, got {ev.kind}")

    handler = _HANDLERS[ev.kind]
    new_state = handler(state, ev, on_divergence)
    return replace(new_state, seq=ev.seq)


def _require_pending(state: SessionState, ev: EventLike) -> PendingRound:
    if state.pending is None:
        raise IllegalEvent(f"{ev.kind} outside a started round")
    return state.pending


def _no_pending(state: SessionState, ev: EventLike) -> None:
    if state.pending is not None:
        raise IllegalEvent(f"{ev.kind} while a round is in flight")


def _apply_case_edited(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    _no_pending(state, ev)
    p = ev.payload
    edit = ItemEdit(
        kind=p["edit"]["kind"],
        target=p["edit"].get("target"),
        category=p["edit"].get("category"),
        label=p["edit"].get("label"),
        value=p["edit"].get("value"),
        source_span=tuple(p["edit"]["span"]) if p["edit"].get("span") else None,
    )
    case = apply_item_edit(state.case, edit)
    if case.revision != p["resulting_revision"]:
        on_div(Divergence(ev.seq, ev.kind, f"revision {case.revision} != recorded {p['resulting_revision']}"))
    if edit.kind == "add" and case.items[-1].item_id != p.get("allocated_id"):
        on_div(Divergence(ev.seq, ev.kind, f"allocated {case.items[-1].item_id} != recorded {p.get('allocated_id')}"))
    return replace(state, case=case)


def _apply_round_started(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    _no_pending(state, ev)
    p = ev.payload
    if p["round_index"] != len(state.rounds):
        raise IllegalEvent(f"round index {p['round_index']} != next index {len(state.rounds)}")
    if p["kind"] not in ("initial", "debate", "revision", "reeval"):
        raise IllegalEvent(f"bad round kind {p['kind']!r}")
    pending = PendingRound(
        round_index=p["round_index"],
        kind=p["kind"],
        spoke=tuple(p["spoke"]),
        trigger=wire.decode_trigger(p.get("trigger")),
        registry=state.registry.copy(),
    )
    return replace(state, pending=pending)


def _apply_statement_rejected(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    pending = _require_pending(state, ev)
    if ev.payload["agent_id"] not in pending.spoke:
        raise IllegalEvent(f"rejected statement from unsolicited agent {ev.payload['agent_id']!r}")
    return state


def _apply_statement_accepted(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    pending = _require_pending(state, ev).copy()
    p = ev.payload
    op = wire.decode_opinion(p["opinion"])
    if op.agent_id in pending.statements:
        raise IllegalEvent(f"agent {op.agent_id!r} already has a statement this round")
    if state.agent(op.agent_id) is None:
        raise IllegalEvent(f"statement from unknown agent {op.agent_id!r}")
    if op.round_index != pending.round_index:
        raise IllegalEvent("opinion round_index does not match the in-flight round")

    prior = state.latest_opinion(op.agent_id)
    if op.carried_forward:
        if prior is None:
            raise IllegalEvent(f"agent {op.agent_id!r} has no prior opinion to carry forward")
        problem = _verify_carry(prior, op)
        if problem is not None:
            on_div(Divergence(ev.seq, ev.kind, problem))
    else:
        expected = _expected_changed_from(state, op)
        if op.changed_from != expected:
            on_div(
                Divergence(
                    ev.seq, ev.kind,
                    f"changed_from {op.changed_from!r} != recomputed {expected!r} for {op.agent_id}",
                )
            )
    rec = pending.registry.resolve(op.hypothesis_label_raw, state.config.alias_map())
    if rec.hypothesis_id != op.hypothesis_id:
        on_div(
            Divergence(
                ev.seq, ev.kind,
                f"hypothesis_id {op.hypothesis_id!r} != registry {rec.hypothesis_id!r}",
            )
        )
    pending.statements[op.agent_id] = op
    return replace(state, pending=pending)


def _apply_conflict_event(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    pending = _require_pending(state, ev).copy()
    pending.conflict_events.append((ev.seq, ev.kind, ev.payload))
    return replace(state, pending=pending)


def _decode_recorded_delta(events: list[tuple[int, str, dict]]) -> ConflictDelta:
    opened, updated, resolved = [], [], []
    for _seq, kind, payload in events:
        if kind == CONFLICT_OPENED:
            r = payload["round_index"]
            c = payload["conflict"]
            opened.append(
                wire.decode_conflict(
                    c,
                    agent_rounds=((a, r) for a in sorted(c["involved_agents"])),
                    item_rounds=((i, r) for i in sorted(c["contested_item_ids"])),
                )
            )
        elif kind == CONFLICT_UPDATED:
            updated.append(
                ConflictUpdate(
                    conflict_id=payload["conflict_id"],
                    added_agents=tuple(payload["added_agents"]),
                    added_items=tuple(payload["added_items"]),
                    lifecycle=tuple(wire.decode_lifecycle_event(e) for e in payload["lifecycle"]),
                )
            )
        else:
            resolved.append(
                ConflictResolution(
                    conflict_id=payload["conflict_id"],
                    lifecycle=tuple(wire.decode_lifecycle_event(e) for e in payload["lifecycle"]),
                )
            )
    return ConflictDelta(opened=tuple(opened), updated=tuple(updated), resolved=tuple(resolved))


def _apply_round_committed(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    pending = _require_pending(state, ev)
    p = ev.payload
    if p["round_index"] != pending.round_index:
        raise IllegalEvent("commit round_index does not match the in-flight round")

    order = state.agent_order()
    opinions = tuple(pending.statements[a] for a in order if a in pending.statements)
    rnd = Round(
        round_index=pending.round_index,
        kind=pending.kind,
        spoke=pending.spoke,
        opinions=opinions,
        trigger=pending.trigger,
    )
    rounds = state.rounds + (rnd,)

    # recorded conflict delta vs recomputation
    expected_payloads = analytics.delta_to_event_payloads(
        analytics.detect_conflicts(state.conflicts, rnd), rnd.round_index
    )
    recorded = pending.conflict_events
    for (seq, kind, payload), (exp_kind, exp_payload) in zip(recorded, expected_payloads):
        if kind != exp_kind or payload != exp_payload:
            on_div(Divergence(seq, kind, "recorded conflict event differs from recomputation"))
    if len(recorded) != len(expected_payloads):
        on_div(
            Divergence(
                ev.seq, ev.kind,
                f"{len(recorded)} recorded conflict events, recomputation yields {len(expected_payloads)}",
            )
        )

    conflicts = analytics.apply_delta(
        state.conflicts, _decode_recorded_delta(recorded), rnd.round_index
    )

    summary = analytics.compute_round_summary(rounds, conflicts, rnd.round_index)
    if wire.encode_round_summary(summary) != p["summary"]:
        on_div(Divergence(ev.seq, ev.kind, "recorded summary differs from recomputation"))
        summary = wire.decode_round_summary(p["summary"])

    consensus = analytics.convergence_at(rounds, state.config, rnd.round_index)
    if wire.encode_consensus(consensus) != p["consensus"]:
        on_div(Divergence(ev.seq, ev.kind, "recorded consensus differs from recomputation"))
        consensus = wire.decode_consensus(p["consensus"])
    if p.get("converged") != consensus.converged:
        on_div(Divergence(ev.seq, ev.kind, "recorded converged flag differs from consensus"))

    phase = state.status.phase
    if phase in ("running", "converged"):
        phase = (
            "converged"
            if consensus.converged and state.config.convergence_stops_debate
            else "running"
        )
    return replace(
        state,
        rounds=rounds,
        summaries=state.summaries + (summary,),
        consensus=consensus,
        conflicts=conflicts,
        registry=pending.registry,
        status=replace(state.status, phase=phase),
        pending=None,
    )


def _apply_intervention_submitted(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    _no_pending(state, ev)
    iv = wire.decode_intervention(ev.payload["intervention"])
    if iv.intervention_id in state.interventions:
        raise IllegalEvent(f"intervention id {iv.intervention_id!r} reused")
    interventions = dict(state.interventions)
    interventions[iv.intervention_id] = iv
    return replace(state, interventions=interventions)


def _apply_reeval_requested(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    _no_pending(state, ev)
    conflict = state.conflicts.get(ev.payload["conflict_id"])
    if conflict is None:
        raise IllegalEvent(f"re-eval for unknown conflict {ev.payload['conflict_id']!r}")
    if conflict.status != "Active":
        raise IllegalEvent(f"re-eval for resolved conflict {conflict.conflict_id}")
    marked = replace(
        conflict,
        lifecycle=conflict.lifecycle
        + (LifecycleEvent("ReEvalRequested", len(state.rounds), "re-evaluation requested"),),
    )
    conflicts = dict(state.conflicts)
    conflicts[conflict.conflict_id] = marked
    return replace(state, conflicts=conflicts)


def _apply_agent_muted(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    agent_id = ev.payload["agent_id"]
    if state.agent(agent_id) is None:
        raise IllegalEvent(f"mute for unknown agent {agent_id!r}")
    if agent_id in state.status.muted_agents:
        raise IllegalEvent(f"agent {agent_id!r} already muted")
    return replace(
        state, status=replace(state.status, muted_agents=state.status.muted_agents | {agent_id})
    )


def _apply_agent_unmuted(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    agent_id = ev.payload["agent_id"]
    if agent_id not in state.status.muted_agents:
        raise IllegalEvent(f"agent {agent_id!r} is not muted")
    return replace(
        state, status=replace(state.status, muted_agents=state.status.muted_agents - {agent_id})
    )


def _apply_paused(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    if state.status.phase != "running":
        raise IllegalEvent(f"pause in phase {state.status.phase}")
    return replace(state, status=replace(state.status, phase="paused"))


def _apply_resumed(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    if state.status.phase != "paused":
        raise IllegalEvent(f"resume in phase {state.status.phase}")
    phase = (
        "converged"
        if state.consensus is not None
        and state.consensus.converged
        and state.config.convergence_stops_debate
        else "running"
    )
    return replace(state, status=replace(state.status, phase=phase))


def _apply_terminated(state: SessionState, ev: EventLike, on_div: OnDivergence) -> SessionState:
    recorded = ev.payload.get("final_consensus")
    if recorded != wire.encode_consensus(state.consensus):
        on_div(Divergence(ev.seq, ev.kind, "recorded final consensus differs from state"))
    return replace(state, status=replace(state.status, phase="terminated"), pending=None)


_HANDLERS = {
    CASE_ITEM_EDITED: _apply_case_edited,
    ROUND_STARTED: _apply_round_started,
    STATEMENT_ACCEPTED: _apply_statement_accepted,
    STATEMENT_REJECTED: _apply_statement_rejected,
    ROUND_COMMITTED: _apply_round_committed,
    CONFLICT_OPENED: _apply_conflict_event,
    CONFLICT_UPDATED: _apply_conflict_event,
    CONFLICT_RESOLVED: _apply_conflict_event,
    INTERVENTION_SUBMITTED: _apply_intervention_submitted,
    REEVAL_REQUESTED: _apply_reeval_requested,
    AGENT_MUTED: _apply_agent_muted,
    AGENT_UNMUTED: _apply_agent_unmuted,
    SESSION_PAUSED: _apply_paused,
    SESSION_RESUMED: _apply_resumed,
    SESSION_TERMINATED: _apply_terminated,
}


def fold_events(
    events: Iterable[EventLike],
    upto_seq: int | None = None,
    on_divergence: OnDivergence = _raise_divergence,
) -> SessionState:
    """Left-fold a (prefix of a) log into a snapshot.

    ``upto_seq`` pins the fold to a sequence number; out-of-range values
    raise OutOfRange. The fold over a full log equals the live state.
    """
    state: SessionState | None = None
    for ev in events:
        if upto_seq is not None and ev.seq > upto_seq:
            break
        state = apply_event(state, ev, on_divergence)
    if state is None or (upto_seq is not None and (upto_seq < 1 or state.seq < upto_seq)):
        raise OutOfRange(f"no events up to seq {upto_seq}")
    return state


def round_boundary_seq(events: list[EventLike], round_index: int) -> int:
    """Sequence number of the RoundCommitted event for ``round_index``."""
    for ev in events:
        if ev.kind == ROUND_COMMITTED and ev.payload["round_index"] == round_index:
            return ev.seq
    raise OutOfRange(f"no committed round {round_index}")
