"""Derivations over committed rounds: conflicts, badges, summaries, flow, consensus.

Everything here is a pure function of committed history; identical inputs give
identical outputs, byte-for-byte after wire encoding. The conflict detection
predicate: two agents are in conflict at a round when they hold different
hypotheses and the case items they cite intersect.
"""

from __future__ import annotations

from collections import Counter
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from . import wire
from .errors import NoRounds, TooFewRounds, UnknownConflict, UnknownItem, UnknownRound
from .model import (
    ComparisonRow,
    Conflict,
    ConflictDelta,
    ConflictResolution,
    ConflictUpdate,
    ConsensusSummary,
    DebateConfig,
    EvidenceComparison,
    FlowEdge,
    LifecycleEvent,
    Opinion,
    OpinionChange,
    ProvenanceBadge,
    Round,
    RoundSummary,
    SideEntry,
)

FLAG_NONE = "none"
FLAG_CONFLICT = "conflict"
FLAG_RESOLVED = "resolved"


def _fresh_changes(rnd: Round, agents: Iterable[str]) -> list[tuple[str, str, str]]:
    """(agent, from, to) for the given agents' fresh opinion changes in this round."""
    out = []
    for agent_id in sorted(agents):
        op = rnd.opinion_of(agent_id)
        if op is not None and not op.carried_forward and op.changed_from is not None:
            out.append((agent_id, op.changed_from, op.hypothesis_id))
    return out


def detect_conflicts(store: Mapping[str, Conflict], rnd: Round) -> ConflictDelta:
    """Evaluate the detection predicate at ``rnd`` against the current store.

    For every hypothesis pair satisfied by some agent pair with intersecting
    citations: open a conflict (superseding the pair's last resolved one, if
    any), or merge new agents/items and stance changes into the active one.
    Active conflicts whose pair no longer satisfies the predicate resolve at
    this round.
    """
    r = rnd.round_index
    ops = {op.agent_id: op for op in rnd.opinions}
    cited = {a: op.cited_item_ids() for a, op in ops.items()}

    pair_items: dict[tuple[str, str], set[str]] = {}
    pair_agents: dict[tuple[str, str], set[str]] = {}
    for a, b in combinations(sorted(ops), 2):
        ha, hb = ops[a].hypothesis_id, ops[b].hypothesis_id
        if ha == hb:
            continue
        shared = cited[a] & cited[b]
        if not shared:
            continue
        pair = (ha, hb) if ha < hb else (hb, ha)
        pair_items.setdefault(pair, set()).update(shared)
        pair_agents.setdefault(pair, set()).update((a, b))

    active_by_pair = {c.hypothesis_pair: c for c in store.values() if c.status == "Active"}
    resolved_latest: dict[tuple[str, str], str] = {}
    for c in store.values():
        if c.status == "Resolved":
            resolved_latest[c.hypothesis_pair] = c.conflict_id

    opened: list[Conflict] = []
    updated: list[ConflictUpdate] = []
    next_ordinal = len(store) + 1

    for pair in sorted(pair_items):
        items = pair_items[pair]
        agents = pair_agents[pair]
        existing = active_by_pair.get(pair)
        if existing is None:
            conflict_id = f"c{next_ordinal}"
            next_ordinal += 1
            detail = f"agents {','.join(sorted(agents))}; items {','.join(sorted(items))}"
            opened.append(
                Conflict(
                    conflict_id=conflict_id,
                    hypothesis_pair=pair,
                    involved_agents=frozenset(agents),
                    contested_item_ids=frozenset(items),
                    status="Active",
                    lifecycle=(LifecycleEvent("Opened", r, detail),),
                    supersedes=resolved_latest.get(pair),
                    agent_rounds=tuple((a, r) for a in sorted(agents)),
                    item_rounds=tuple((i, r) for i in sorted(items)),
                )
            )
        else:
            added_agents = tuple(sorted(agents - existing.involved_agents))
            added_items = tuple(sorted(items - existing.contested_item_ids))
            lifecycle = [LifecycleEvent("AgentJoined", r, a) for a in added_agents]
            lifecycle += [
                LifecycleEvent("StanceChanged", r, f"{a}: {src}->{dst}")
                for a, src, dst in _fresh_changes(rnd, existing.involved_agents)
            ]
            if added_agents or added_items or lifecycle:
                updated.append(
                    ConflictUpdate(
                        conflict_id=existing.conflict_id,
                        added_agents=added_agents,
                        added_items=added_items,
                        lifecycle=tuple(lifecycle),
                    )
                )

    resolved: list[ConflictResolution] = []
    for conflict_id in sorted(active_by_pair[p].conflict_id for p in active_by_pair if p not in pair_items):
        existing = store[conflict_id]
        lifecycle = [
            LifecycleEvent("StanceChanged", r, f"{a}: {src}->{dst}")
            for a, src, dst in _fresh_changes(rnd, existing.involved_agents)
        ]
        lifecycle.append(LifecycleEvent("Resolved", r, "no divergence detected"))
        resolved.append(ConflictResolution(conflict_id=conflict_id, lifecycle=tuple(lifecycle)))

    updated.sort(key=lambda u: u.conflict_id)
    return ConflictDelta(opened=tuple(opened), updated=tuple(updated), resolved=tuple(resolved))


def apply_delta(store: Mapping[str, Conflict], delta: ConflictDelta, round_index: int) -> dict[str, Conflict]:
    """New conflict store with the delta applied (copy-on-write)."""
    out = dict(store)
    for c in delta.opened:
        out[c.conflict_id] = c
    for u in delta.updated:
        c = out[u.conflict_id]
        out[u.conflict_id] = Conflict(
            conflict_id=c.conflict_id,
            hypothesis_pair=c.hypothesis_pair,
            involved_agents=c.involved_agents | set(u.added_agents),
            contested_item_ids=c.contested_item_ids | set(u.added_items),
            status=c.status,
            lifecycle=c.lifecycle + u.lifecycle,
            supersedes=c.supersedes,
            agent_rounds=c.agent_rounds + tuple((a, round_index) for a in u.added_agents),
            item_rounds=c.item_rounds + tuple((i, round_index) for i in u.added_items),
        )
    for res in delta.resolved:
        c = out[res.conflict_id]
        out[res.conflict_id] = Conflict(
            conflict_id=c.conflict_id,
            hypothesis_pair=c.hypothesis_pair,
            involved_agents=c.involved_agents,
            contested_item_ids=c.contested_item_ids,
            status="Resolved",
            lifecycle=c.lifecycle + res.lifecycle,
            supersedes=c.supersedes,
            agent_rounds=c.agent_rounds,
            item_rounds=c.item_rounds,
        )
    return out


def delta_to_event_payloads(delta: ConflictDelta, round_index: int) -> list[tuple[str, dict]]:
    """The conflict events a round commit records for this delta, in order."""
    out: list[tuple[str, dict]] = []
    for c in delta.opened:
        out.append(("ConflictOpened", {"round_index": round_index, "conflict": wire.encode_conflict(c)}))
    for u in delta.updated:
        out.append(
            (
                "ConflictUpdated",
                {
                    "round_index": round_index,
                    "conflict_id": u.conflict_id,
                    "added_agents": list(u.added_agents),
                    "added_items": list(u.added_items),
                    "lifecycle": [wire.encode_lifecycle_event(ev) for ev in u.lifecycle],
                },
            )
        )
    for res in delta.resolved:
        out.append(
            (
                "ConflictResolved",
                {
                    "round_index": round_index,
                    "conflict_id": res.conflict_id,
                    "lifecycle": [wire.encode_lifecycle_event(ev) for ev in res.lifecycle],
                },
            )
        )
    return out


# -- summaries, flow, consensus ------------------------------------------------

def compute_round_summary(
    rounds: Sequence[Round], conflicts: Mapping[str, Conflict], round_index: int
) -> RoundSummary:
    """Support distribution plus this round's conflict and opinion-change deltas.

    Support counts every agent with an opinion in the round (carried-forward
    opinions count); opinion changes list fresh statements only, so a change
    is reported once, in the round it happened.
    """
    if not 0 <= round_index < len(rounds):
        raise UnknownRound(f"no committed round {round_index}")
    rnd = rounds[round_index]
    support = Counter(op.hypothesis_id for op in rnd.opinions)
    changes = _fresh_changes(rnd, (op.agent_id for op in rnd.opinions))
    return RoundSummary(
        round_index=round_index,
        support=tuple(sorted(support.items())),
        new_conflicts=sum(1 for c in conflicts.values() if c.opened_round == round_index),
        resolved_conflicts=sum(1 for c in conflicts.values() if c.resolved_round == round_index),
        opinion_changes=tuple(OpinionChange(a, src, dst) for a, src, dst in changes),
    )


def compute_hypothesis_flow(rounds: Sequence[Round]) -> tuple[FlowEdge, ...]:
    """Per-agent hypothesis transitions between consecutive rounds, aggregated."""
    if len(rounds) < 2:
        raise TooFewRounds("hypothesis flow needs at least 2 committed rounds")
    weights: Counter[tuple[int, str, str]] = Counter()
    for prev, nxt in zip(rounds, rounds[1:]):
        nxt_ops = {op.agent_id: op for op in nxt.opinions}
        for op in prev.opinions:
            after = nxt_ops.get(op.agent_id)
            if after is not None:
                weights[(prev.round_index, op.hypothesis_id, after.hypothesis_id)] += 1
    return tuple(
        FlowEdge(r, src, r + 1, dst, weights[(r, src, dst)])
        for r, src, dst in sorted(weights)
    )


def convergence_at(
    rounds: Sequence[Round], config: DebateConfig, round_index: int
) -> ConsensusSummary:
    """Modal-hypothesis share against the consensus threshold at one round."""
    if not rounds:
        raise NoRounds("no committed rounds")
    if not 0 <= round_index < len(rounds):
        raise UnknownRound(f"no committed round {round_index}")
    rnd = rounds[round_index]
    support = Counter(op.hypothesis_id for op in rnd.opinions)
    total = sum(support.values())
    if total == 0:
        return ConsensusSummary(False, None, 0.0, frozenset(), round_index)
    modal, count = max(support.items(), key=lambda kv: (kv[1], kv[0]))
    share = count / total
    converged = share >= config.consensus_threshold
    dissenting = (
        frozenset(op.agent_id for op in rnd.opinions if op.hypothesis_id != modal)
        if converged
        else frozenset()
    )
    return ConsensusSummary(
        converged=converged,
        hypothesis_id=modal if converged else None,
        support_share=share,
        dissenting_agents=dissenting,
        as_of_round=round_index,
    )


# -- provenance -----------------------------------------------------------------

def _latest_citing_opinion(rounds: Sequence[Round], agent_id: str, item_id: str, upto: int) -> Opinion | None:
    for rnd in reversed(rounds[: upto + 1]):
        op = rnd.opinion_of(agent_id)
        if op is not None and item_id in op.cited_item_ids():
            return op
    return None


def item_badges(
    rounds: Sequence[Round], agent_order: Sequence[str], item_id: str, round_index: int
) -> tuple[ProvenanceBadge, ...]:
    """Latest badge per agent for one item, ordered by agent color (session order)."""
    badges = []
    for agent_id in agent_order:
        op = _latest_citing_opinion(rounds, agent_id, item_id, round_index)
        if op is not None:
            badges.append(
                ProvenanceBadge(
                    item_id=item_id,
                    agent_id=agent_id,
                    hypothesis_id=op.hypothesis_id,
                    round_index=op.round_index,
                    evidence_ids=op.evidence_ids_for_item(item_id),
                )
            )
    return tuple(badges)


def item_flag(conflicts: Mapping[str, Conflict], item_id: str, round_index: int) -> str:
    """Conflict if any active conflict contests the item at the round; Resolved
    if it was ever contested and every contesting conflict has resolved; else None."""
    ever = False
    for c in conflicts.values():
        if c.opened_round > round_index or item_id not in c.contested_at(round_index):
            continue
        if c.active_at(round_index):
            return FLAG_CONFLICT
        ever = True
    return FLAG_RESOLVED if ever else FLAG_NONE


def item_badge_state(
    case_item_ids: frozenset[str],
    rounds: Sequence[Round],
    conflicts: Mapping[str, Conflict],
    agent_order: Sequence[str],
    item_id: str,
    round_index: int,
) -> tuple[tuple[ProvenanceBadge, ...], str]:
    if item_id not in case_item_ids:
        raise UnknownItem(f"no case item {item_id!r}")
    if not 0 <= round_index < len(rounds):
        raise UnknownRound(f"no committed round {round_index}")
    return (
        item_badges(rounds, agent_order, item_id, round_index),
        item_flag(conflicts, item_id, round_index),
    )


def build_provenance_index(
    item_ids: Sequence[str],
    rounds: Sequence[Round],
    agent_order: Sequence[str],
    round_index: int,
) -> dict[str, tuple[ProvenanceBadge, ...]]:
    """Complete badge index over all items; never-cited items map to ()."""
    if not 0 <= round_index < len(rounds):
        raise UnknownRound(f"no committed round {round_index}")
    return {item_id: item_badges(rounds, agent_order, item_id, round_index) for item_id in item_ids}


# -- evidence comparison ----------------------------------------------------------

def compare_evidence(
    rounds: Sequence[Round], conflicts: Mapping[str, Conflict], conflict_id: str
) -> EvidenceComparison:
    """Per contested item, how each side's agents applied evidence while the
    disagreement stood. Sides share a reading when citation texts coincide."""
    conflict = conflicts.get(conflict_id)
    if conflict is None:
        raise UnknownConflict(f"no conflict {conflict_id!r}")
    resolved = conflict.resolved_round
    cutoff = (resolved - 1) if resolved is not None else len(rounds) - 1
    side_a_hyp, side_b_hyp = conflict.hypothesis_pair

    rows = []
    for item_id in sorted(conflict.contested_item_ids):
        sides: dict[str, list[SideEntry]] = {side_a_hyp: [], side_b_hyp: []}
        for agent_id in sorted(conflict.involved_agents):
            op = _latest_citing_opinion(rounds, agent_id, item_id, cutoff)
            if op is None or op.hypothesis_id not in sides:
                continue
            evidence = tuple(
                (ev.evidence_id, ev.citation, ev.snippet)
                for ev in op.evidence
                if item_id in ev.applies_to_item_ids
            )
            sides[op.hypothesis_id].append(SideEntry(agent_id=agent_id, evidence=evidence))
        citations_a = {c for e in sides[side_a_hyp] for _, c, _ in e.evidence}
        citations_b = {c for e in sides[side_b_hyp] for _, c, _ in e.evidence}
        kind = (
            "SameEvidenceDifferentReading"
            if citations_a & citations_b
            else "DifferentEvidence"
        )
        rows.append(
            ComparisonRow(
                item_id=item_id,
                side_a=tuple(sides[side_a_hyp]),
                side_b=tuple(sides[side_b_hyp]),
                divergence_kind=kind,
            )
        )
    return EvidenceComparison(conflict_id=conflict_id, rows=tuple(rows))
