"""Human-readable (markdown) and machine-readable (JSON) debate reports.

The JSON export reuses the analytics wire schemas verbatim; the markdown
rendering covers the same ground: case items, per-round support and changes,
the opinion-change strip, conflict lifecycles, per-round item flags, flow
edges, and the consensus summary. Both are deterministic for a given log.
"""

from __future__ import annotations

from . import analytics, views, wire
from .errors import TooFewRounds
from .state import SessionState

_FLAG_DISPLAY = {
    analytics.FLAG_NONE: "None",
    analytics.FLAG_CONFLICT: "Conflict",
    analytics.FLAG_RESOLVED: "Resolved",
}


def export_json(st: SessionState) -> dict:
    try:
        flow = views.flow_doc(st)["edges"]
    except TooFewRounds:
        flow = []
    return {
        "v": 1,
        "session_id": st.session_id,
        "case": wire.encode_case(st.case),
        "agents": [wire.encode_agent(a) for a in st.agents],
        "hypotheses": wire.encode_registry(st.registry),
        "status": wire.encode_status(st.status),
        "rounds": [wire.encode_round(r) for r in st.rounds],
        "summaries": [wire.encode_round_summary(s) for s in st.summaries],
        "conflicts": views.conflicts_doc(st),
        "provenance": views.provenance_doc(st),
        "item_flags_by_round": {
            it.item_id: [
                analytics.item_flag(st.conflicts, it.item_id, r) for r in range(len(st.rounds))
            ]
            for it in st.case.items
        },
        "flow": flow,
        "consensus": wire.encode_consensus(st.consensus),
    }


def _label(st: SessionState, hypothesis_id: str | None) -> str:
    if hypothesis_id is None:
        return "-"
    return f"{st.registry.display_label(hypothesis_id)} [{hypothesis_id}]"


def render_markdown(st: SessionState, notes: list[dict] | None = None) -> str:
    lines: list[str] = []
    out = lines.append

    out(f"# Debate report — session {st.session_id}")
    out("")
    out(f"Phase: {st.status.phase}; rounds: {len(st.rounds)}; agents: {len(st.agents)}")
    muted = sorted(st.status.muted_agents)
    if muted:
        out(f"Muted agents: {', '.join(muted)}")
    out("")

    out("## Case")
    out("")
    out("| id | category | label | value |")
    out("|---|---|---|---|")
    for it in st.case.items:
        out(f"| {it.item_id} | {it.category} | {it.label} | {it.value} |")
    out("")

    out("## Agents")
    out("")
    out("| id | specialty | color |")
    out("|---|---|---|")
    for a in st.agents:
        out(f"| {a.agent_id} | {a.specialty} | {a.color_index} |")
    out("")

    if st.registry.records:
        out("## Hypotheses")
        out("")
        out("| id | label | color |")
        out("|---|---|---|")
        for r in st.registry.records:
            out(f"| {r.hypothesis_id} | {r.display_label} | {r.color_index} |")
        out("")

    out("## Rounds")
    out("")
    for rnd, summary in zip(st.rounds, st.summaries):
        trigger = f" (trigger: {rnd.trigger.kind} {rnd.trigger.ref_id})" if rnd.trigger else ""
        out(f"### Round {rnd.round_index} — {rnd.kind}{trigger}")
        out("")
        out(f"Spoke: {', '.join(rnd.spoke)}")
        support = ", ".join(f"{_label(st, h)}: {n}" for h, n in summary.support)
        out(f"Support: {support}")
        out(f"New conflicts: {summary.new_conflicts}; resolved conflicts: {summary.resolved_conflicts}")
        if summary.opinion_changes:
            changes = "; ".join(
                f"{c.agent_id}: {_label(st, c.from_hypothesis)} -> {_label(st, c.to_hypothesis)}"
                for c in summary.opinion_changes
            )
            out(f"Opinion changes: {changes}")
        out("")
        out("| agent | hypothesis | items cited | evidence | carried | invalid |")
        out("|---|---|---|---|---|---|")
        for op in rnd.opinions:
            cited = ",".join(sorted(op.cited_item_ids())) or "-"
            out(
                f"| {op.agent_id} | {_label(st, op.hypothesis_id)} | {cited} "
                f"| {len(op.evidence)} | {'yes' if op.carried_forward else 'no'} "
                f"| {'yes' if op.invalid_output else 'no'} |"
            )
        out("")

    if len(st.rounds) >= 2:
        out("## Opinion-change strip")
        out("")
        for prev, summary in zip(st.rounds, st.summaries[1:]):
            if summary.opinion_changes:
                changes = "; ".join(
                    f"{c.agent_id}: {_label(st, c.from_hypothesis)} -> {_label(st, c.to_hypothesis)}"
                    for c in summary.opinion_changes
                )
            else:
                changes = "no changes"
            out(f"- rounds {prev.round_index} -> {summary.round_index}: {changes}")
        out("")

    out("## Conflicts")
    out("")
    if not st.conflicts:
        out("No conflicts detected.")
        out("")
    for conflict_id in sorted(st.conflicts):
        c = st.conflicts[conflict_id]
        ha, hb = c.hypothesis_pair
        out(f"### {c.conflict_id} — {_label(st, ha)} vs {_label(st, hb)} ({c.status})")
        out("")
        out(f"Agents: {', '.join(sorted(c.involved_agents))}; items: {', '.join(sorted(c.contested_item_ids))}")
        if c.supersedes:
            out(f"Supersedes: {c.supersedes}")
        out("")
        out("| lifecycle | round | detail |")
        out("|---|---|---|")
        for ev in c.lifecycle:
            out(f"| {ev.kind} | {ev.round_index} | {ev.detail} |")
        out("")
        comparison = analytics.compare_evidence(st.rounds, st.conflicts, conflict_id)
        out("| item | side A | side B | divergence |")
        out("|---|---|---|---|")
        for row in comparison.rows:
            side_a = "; ".join(
                f"{e.agent_id}: {', '.join(c for _, c, _ in e.evidence) or 'no evidence'}"
                for e in row.side_a
            ) or "-"
            side_b = "; ".join(
                f"{e.agent_id}: {', '.join(c for _, c, _ in e.evidence) or 'no evidence'}"
                for e in row.side_b
            ) or "-"
            out(f"| {row.item_id} | {side_a} | {side_b} | {row.divergence_kind} |")
        out("")

    if st.rounds:
        out("## Item flags by round")
        out("")
        header = " | ".join(f"r{r}" for r in range(len(st.rounds)))
        out(f"| item | {header} |")
        out("|---|" + "---|" * len(st.rounds))
        for it in st.case.items:
            flags = " | ".join(
                _FLAG_DISPLAY[analytics.item_flag(st.conflicts, it.item_id, r)]
                for r in range(len(st.rounds))
            )
            out(f"| {it.item_id} | {flags} |")
        out("")

    if len(st.rounds) >= 2:
        out("## Hypothesis flow")
        out("")
        out("| rounds | from | to | agents |")
        out("|---|---|---|---|")
        for e in analytics.compute_hypothesis_flow(st.rounds):
            out(
                f"| {e.from_round} -> {e.to_round} | {_label(st, e.from_hypothesis)} "
                f"| {_label(st, e.to_hypothesis)} | {e.weight} |"
            )
        out("")

    out("## Consensus")
    out("")
    consensus = st.consensus
    if consensus is None:
        out("No rounds committed.")
    elif consensus.converged:
        dissent = ", ".join(sorted(consensus.dissenting_agents)) or "none"
        out(
            f"Converged on {_label(st, consensus.hypothesis_id)} at round "
            f"{consensus.as_of_round} (share {consensus.support_share:.2f}; dissenting: {dissent})."
        )
    else:
        out(
            f"Not converged as of round {consensus.as_of_round} "
            f"(modal share {consensus.support_share:.2f})."
        )
    out("")

    if notes:
        out("## Run notes")
        out("")
        for note in notes:
            out(f"- {note['status']}: {note['detail']}")
        out("")

    return "\n".join(lines)
