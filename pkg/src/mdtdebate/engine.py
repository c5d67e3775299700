"""Debate orchestration: rounds, repairs, interventions, re-evals, controls.

The engine is a thin single-writer layer over the event log: every operation
validates against the current snapshot, builds one batch of events, and
appends it atomically. Faults mid-round (transport failures, unrepairable
output with nothing to carry forward) abort before anything is written, so a
session only ever contains whole rounds.
"""

from __future__ import annotations

import dataclasses
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from . import analytics, state as state_mod, wire
from .case import CaseRecord, ItemEdit, apply_item_edit, validate_case
from .errors import (
    ConflictAlreadyResolved,
    DuplicateAgent,
    EmptyTargets,
    IllegalTransition,
    InvalidAgentReply,
    InvalidCase,
    InvalidIntervention,
    ItemInUse,
    NoRounds,
    RoundBudgetExhausted,
    TooFewAgents,
    TransportDown,
    UnknownAgent,
    UnknownConflict,
    UnknownItem,
    WrongPhase,
)
from .events import Clock, EventLog
from .model import (
    AgentProfile,
    ConsensusSummary,
    DebateConfig,
    Intervention,
    Opinion,
    Round,
    SessionStatus,
    Trigger,
)
from .state import SessionState
from .transport import ContextBundle, OpinionDigest, Transport
from .wire import ParsedReply, Reason

_RAW_EXCERPT_LIMIT = 500


@dataclass(frozen=True)
class ValidationFailure:
    """Validation outcome carrying repair-prompt-ready reasons."""

    agent_id: str
    reasons: tuple[Reason, ...]


@dataclass
class _Solicited:
    """Per-agent outcome of the transport + repair loop."""

    agent_id: str
    parsed: ParsedReply | None  # None = abstained after exhausting repairs
    attempts: int
    rejections: list[tuple[int, tuple[Reason, ...], str]]  # (attempt, reasons, raw excerpt)


class DebateEngine:
    """One live debate session over an event log."""

    def __init__(self, log: EventLog, transport: Transport, parallel_agents: bool = True):
        self.log = log
        self.transport = transport
        self.parallel_agents = parallel_agents
        self._lock = threading.RLock()
        # live snapshots captured at each round commit, keyed by boundary seq
        self.commit_snapshots: dict[int, SessionState] = {}

    # -- construction -------------------------------------------------------

    @classmethod
    def create_session(
        cls,
        case: CaseRecord,
        agents: list[AgentProfile],
        config: DebateConfig,
        transport: Transport,
        session_id: str | None = None,
        log_path=None,
        clock: Clock = time.time,
        parallel_agents: bool = True,
    ) -> "DebateEngine":
        report = validate_case(case)
        if not report.ok:
            raise InvalidCase("; ".join(f"{v.code}: {v.message}" for v in report.violations))
        if len(agents) < 2:
            raise TooFewAgents(f"a debate needs >= 2 agents, got {len(agents)}")
        ids = [a.agent_id for a in agents]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateAgent(f"duplicate agent ids: {', '.join(dupes)}")
        config.validate()
        colored = [replace(a, color_index=n) for n, a in enumerate(agents)]
        session_id = session_id or f"s-{uuid.uuid4().hex[:12]}"
        log = EventLog(session_id, path=log_path, clock=clock)
        log.append(
            state_mod.SESSION_CREATED,
            {
                "session_id": session_id,
                "case": wire.encode_case(case),
                "agents": [wire.encode_agent(a) for a in colored],
                "config": wire.encode_config(config),
            },
        )
        return cls(log, transport, parallel_agents=parallel_agents)

    @property
    def state(self) -> SessionState:
        return self.log.state

    # -- statement validation -------------------------------------------------

    def validate_statement(self, raw: str, agent_id: str) -> Opinion | ValidationFailure:
        """Validate one raw reply against the current session (read-only).

        On success the returned Opinion carries the engine-computed
        ``changed_from`` and the hypothesis id the registry holds (or would
        assign); nothing is registered until a round commits.
        """
        st = self.state
        parsed = wire.parse_agent_reply(raw, st.case.item_ids())
        if isinstance(parsed, list):
            return ValidationFailure(agent_id=agent_id, reasons=tuple(parsed))
        registry = st.registry.copy()
        rec = registry.resolve(parsed.hypothesis_label, st.config.alias_map())
        return self._build_opinion(st, agent_id, len(st.rounds), parsed, rec.hypothesis_id)

    @staticmethod
    def _build_opinion(
        st: SessionState, agent_id: str, round_index: int, parsed: ParsedReply, hypothesis_id: str
    ) -> Opinion:
        prior = st.latest_opinion(agent_id)
        changed_from = (
            prior.hypothesis_id
            if prior is not None and prior.hypothesis_id != hypothesis_id
            else None
        )
        return Opinion(
            agent_id=agent_id,
            round_index=round_index,
            hypothesis_id=hypothesis_id,
            hypothesis_label_raw=parsed.hypothesis_label,
            reasoning_steps=parsed.steps,
            summary=parsed.summary,
            evidence=parsed.evidence,
            changed_from=changed_from,
            carried_forward=False,
            invalid_output=False,
        )

    def canonicalize_hypothesis(self, label: str) -> str:
        """Canonical id for a label: the registered one, or the id a first
        sighting would be assigned (read-only; registration happens only
        through accepted statements)."""
        return self.state.registry.copy().resolve(label, self.state.config.alias_map()).hypothesis_id

    # -- rounds ---------------------------------------------------------------

    def run_round(self, kind: str) -> Round:
        with self._lock:
            st = self.state
            if kind not in ("initial", "debate"):
                raise ValueError(f"run_round only runs initial/debate rounds, got {kind!r}")
            if st.status.phase != "running":
                raise WrongPhase(f"cannot start a {kind} round in phase {st.status.phase}")
            if kind == "initial" and st.rounds:
                raise WrongPhase("initial round already committed")
            if kind == "debate":
                if not st.rounds:
                    raise WrongPhase("debate round before the initial round")
                if st.debate_rounds_used() >= st.config.max_debate_rounds:
                    raise RoundBudgetExhausted(
                        f"max_debate_rounds={st.config.max_debate_rounds} already used"
                    )
            speakers = st.unmuted_agents()
            if not speakers:
                raise EmptyTargets("every agent is muted")
            return self._execute_round(st, kind, speakers, trigger=None, prelude=[])

    def submit_intervention(
        self, selected_item_ids: list[str], instruction: str, target_agent_ids: list[str]
    ) -> Round:
        with self._lock:
            st = self.state
            if st.status.phase not in ("running", "converged"):
                raise WrongPhase(f"cannot intervene in phase {st.status.phase}")
            if not selected_item_ids:
                raise InvalidIntervention("an intervention must select at least one item")
            for item_id in selected_item_ids:
                if item_id not in st.case.item_ids():
                    raise UnknownItem(f"no case item {item_id!r}")
            if not instruction.strip():
                raise InvalidIntervention("intervention instruction is empty")
            if not target_agent_ids:
                raise EmptyTargets("an intervention must target at least one agent")
            for agent_id in target_agent_ids:
                if st.agent(agent_id) is None:
                    raise UnknownAgent(f"no agent {agent_id!r}")
            targets = tuple(
                a for a in st.agent_order()
                if a in target_agent_ids and a not in st.status.muted_agents
            )
            if not targets:
                raise EmptyTargets("all intervention targets are muted")
            intervention = Intervention(
                intervention_id=f"iv{len(st.interventions) + 1}",
                selected_item_ids=tuple(selected_item_ids),
                instruction=instruction,
                target_agent_ids=targets,
            )
            prelude = [
                (state_mod.INTERVENTION_SUBMITTED, {"intervention": wire.encode_intervention(intervention)})
            ]
            return self._execute_round(
                st,
                "revision",
                targets,
                trigger=Trigger("intervention", intervention.intervention_id),
                prelude=prelude,
                intervention=(intervention.selected_item_ids, intervention.instruction),
            )

    def request_reeval(self, conflict_id: str) -> Round:
        with self._lock:
            st = self.state
            conflict = st.conflicts.get(conflict_id)
            if conflict is None:
                raise UnknownConflict(f"no conflict {conflict_id!r}")
            if conflict.status != "Active":
                raise ConflictAlreadyResolved(f"conflict {conflict_id} is already resolved")
            if st.status.phase not in ("running", "converged"):
                raise WrongPhase(f"cannot request re-eval in phase {st.status.phase}")
            targets = tuple(
                a for a in st.agent_order()
                if a in conflict.involved_agents and a not in st.status.muted_agents
            )
            if not targets:
                raise EmptyTargets("every involved agent is muted")
            ha, hb = conflict.hypothesis_pair
            conflict_ctx = {
                "conflict_id": conflict_id,
                "hypothesis_a": st.registry.display_label(ha),
                "hypothesis_b": st.registry.display_label(hb),
                "contested_item_ids": sorted(conflict.contested_item_ids),
            }
            prelude = [(state_mod.REEVAL_REQUESTED, {"conflict_id": conflict_id, "round_index": len(st.rounds)})]
            return self._execute_round(
                st,
                "reeval",
                targets,
                trigger=Trigger("reeval", conflict_id),
                prelude=prelude,
                conflict_ctx=conflict_ctx,
            )

    def _execute_round(
        self,
        st: SessionState,
        kind: str,
        speakers: tuple[str, ...],
        trigger: Trigger | None,
        prelude: list[tuple[str, dict]],
        intervention: tuple[tuple[str, ...], str] | None = None,
        conflict_ctx: dict | None = None,
    ) -> Round:
        round_index = len(st.rounds)
        digests = self._digests(st) if kind != "initial" else ()

        def bundle_for(agent_id: str, attempt: int, reasons: tuple[Reason, ...]) -> ContextBundle:
            return ContextBundle(
                kind=kind,
                round_index=round_index,
                attempt=attempt,
                case=st.case,
                role_prompt=st.agent(agent_id).role_prompt,
                prior_opinions=digests,
                intervention=intervention if kind == "revision" else None,
                conflict=conflict_ctx if kind == "reeval" else None,
                repair_reasons=reasons,
                trigger=trigger,
            )

        def solicit(agent_id: str) -> _Solicited:
            profile = st.agent(agent_id)
            reasons: tuple[Reason, ...] = ()
            rejections: list[tuple[int, tuple[Reason, ...], str]] = []
            for attempt in range(st.config.max_repairs + 1):
                try:
                    raw = self.transport(profile, bundle_for(agent_id, attempt, reasons))
                except TransportDown:
                    raise
                except Exception as exc:  # any transport fault aborts the round
                    raise TransportDown(f"transport failed for {agent_id}: {exc}") from exc
                parsed = wire.parse_agent_reply(raw, st.case.item_ids())
                if isinstance(parsed, ParsedReply):
                    return _Solicited(agent_id, parsed, attempt + 1, rejections)
                reasons = tuple(parsed)
                rejections.append((attempt, reasons, raw[:_RAW_EXCERPT_LIMIT]))
            return _Solicited(agent_id, None, st.config.max_repairs + 1, rejections)

        if self.parallel_agents and len(speakers) > 1:
            with ThreadPoolExecutor(max_workers=len(speakers)) as pool:
                results = list(pool.map(solicit, speakers))
            outcomes = dict(zip(speakers, results))
        else:
            outcomes = {a: solicit(a) for a in speakers}

        # assemble opinions in session agent order; hypotheses register in that
        # order so color assignment does not depend on reply timing
        registry = st.registry.copy()
        aliases = st.config.alias_map()
        agent_events: list[tuple[str, dict]] = []
        carried_set = set(st.unmuted_agents()) - set(speakers)
        for agent_id in st.agent_order():
            if agent_id in outcomes:
                sol = outcomes[agent_id]
                for attempt, reasons, raw in sol.rejections:
                    agent_events.append(
                        (
                            state_mod.STATEMENT_REJECTED,
                            {
                                "round_index": round_index,
                                "agent_id": agent_id,
                                "attempt": attempt,
                                "reasons": [{"code": r.code, "message": r.message} for r in reasons],
                                "raw": raw,
                            },
                        )
                    )
                if sol.parsed is not None:
                    rec = registry.resolve(sol.parsed.hypothesis_label, aliases)
                    opinion = self._build_opinion(st, agent_id, round_index, sol.parsed, rec.hypothesis_id)
                else:
                    prior = st.latest_opinion(agent_id)
                    if prior is None:
                        raise InvalidAgentReply(
                            f"agent {agent_id} produced no valid statement in "
                            f"{sol.attempts} attempts and has no prior opinion to carry forward"
                        )
                    opinion = replace(prior, round_index=round_index, carried_forward=True, invalid_output=True)
                agent_events.append(
                    (
                        state_mod.STATEMENT_ACCEPTED,
                        {
                            "round_index": round_index,
                            "agent_id": agent_id,
                            "attempts": sol.attempts,
                            "opinion": wire.encode_opinion(opinion),
                        },
                    )
                )
            elif agent_id in carried_set:
                prior = st.latest_opinion(agent_id)
                if prior is None:
                    continue  # unmuted agent that never spoke: joins at the next full round
                opinion = replace(prior, round_index=round_index, carried_forward=True)
                agent_events.append(
                    (
                        state_mod.STATEMENT_ACCEPTED,
                        {
                            "round_index": round_index,
                            "agent_id": agent_id,
                            "attempts": 0,
                            "opinion": wire.encode_opinion(opinion),
                        },
                    )
                )

        opinions = tuple(
            wire.decode_opinion(p["opinion"]) for k, p in agent_events if k == state_mod.STATEMENT_ACCEPTED
        )
        rnd = Round(round_index=round_index, kind=kind, spoke=speakers, opinions=opinions, trigger=trigger)
        delta = analytics.detect_conflicts(st.conflicts, rnd)
        conflict_events = analytics.delta_to_event_payloads(delta, round_index)
        staged_conflicts = analytics.apply_delta(st.conflicts, delta, round_index)
        staged_rounds = st.rounds + (rnd,)
        summary = analytics.compute_round_summary(staged_rounds, staged_conflicts, round_index)
        consensus = analytics.convergence_at(staged_rounds, st.config, round_index)

        batch = (
            prelude
            + [
                (
                    state_mod.ROUND_STARTED,
                    {
                        "round_index": round_index,
                        "kind": kind,
                        "spoke": list(speakers),
                        "trigger": wire.encode_trigger(trigger),
                    },
                )
            ]
            + agent_events
            + conflict_events
            + [
                (
                    state_mod.ROUND_COMMITTED,
                    {
                        "round_index": round_index,
                        "kind": kind,
                        "summary": wire.encode_round_summary(summary),
                        "consensus": wire.encode_consensus(consensus),
                        "converged": consensus.converged,
                    },
                )
            ]
        )
        seqs = self.log.append_batch(batch)
        self.commit_snapshots[seqs[-1]] = self.state
        return self.state.rounds[-1]

    @staticmethod
    def _digests(st: SessionState) -> tuple[OpinionDigest, ...]:
        out = []
        for rnd in st.rounds:
            for op in rnd.opinions:
                agent = st.agent(op.agent_id)
                out.append(
                    OpinionDigest(
                        agent_id=op.agent_id,
                        specialty=agent.specialty if agent else "",
                        round_index=op.round_index,
                        hypothesis_label=st.registry.display_label(op.hypothesis_id),
                        summary=op.summary,
                        cited_item_ids=tuple(sorted(op.cited_item_ids())),
                    )
                )
        return tuple(out)

    # -- convergence ----------------------------------------------------------

    def check_convergence(self) -> ConsensusSummary:
        st = self.state
        if not st.rounds:
            raise NoRounds("no committed rounds")
        return analytics.convergence_at(st.rounds, st.config, len(st.rounds) - 1)

    # -- session controls -------------------------------------------------------

    def control(self, action: str, agent_id: str | None = None) -> SessionStatus:
        with self._lock:
            st = self.state
            phase = st.status.phase
            if action == "pause":
                if phase != "running":
                    raise IllegalTransition(f"pause is only valid while running (phase {phase})")
                self.log.append(state_mod.SESSION_PAUSED, {})
            elif action == "resume":
                if phase != "paused":
                    raise IllegalTransition(f"resume is only valid while paused (phase {phase})")
                self.log.append(state_mod.SESSION_RESUMED, {})
            elif action == "terminate":
                if phase == "terminated":
                    raise IllegalTransition("session already terminated")
                self.log.append(
                    state_mod.SESSION_TERMINATED,
                    {"final_consensus": wire.encode_consensus(st.consensus)},
                )
            elif action in ("mute", "unmute"):
                if phase == "terminated":
                    raise IllegalTransition("session already terminated")
                if agent_id is None or st.agent(agent_id) is None:
                    raise UnknownAgent(f"no agent {agent_id!r}")
                muted = agent_id in st.status.muted_agents
                if action == "mute" and muted:
                    raise IllegalTransition(f"agent {agent_id} is already muted")
                if action == "unmute" and not muted:
                    raise IllegalTransition(f"agent {agent_id} is not muted")
                self.log.append(
                    state_mod.AGENT_MUTED if action == "mute" else state_mod.AGENT_UNMUTED,
                    {"agent_id": agent_id},
                )
            else:
                raise ValueError(f"unknown control action {action!r}")
            return self.state.status

    # -- case edits ----------------------------------------------------------------

    def apply_case_edit(self, edit: ItemEdit) -> CaseRecord:
        """Intervention-scoped case edit between rounds; removal is refused
        for items any committed opinion has cited, so provenance never dangles."""
        with self._lock:
            st = self.state
            if st.status.phase == "terminated":
                raise WrongPhase("session is terminated")
            if edit.kind == "remove" and edit.target in st.cited_item_ids_ever():
                raise ItemInUse(f"item {edit.target} is cited by committed opinions")
            staged = dataclasses.asdict(edit)
            span = staged.pop("source_span")
            edited = {k: v for k, v in staged.items() if v is not None}
            if span is not None:
                edited["span"] = list(span)
            new_case = apply_item_edit(st.case, edit)
            payload = {
                "edit": edited,
                "resulting_revision": new_case.revision,
                "allocated_id": new_case.items[-1].item_id if edit.kind == "add" else None,
            }
            self.log.append(state_mod.CASE_ITEM_EDITED, payload)
            return self.state.case
