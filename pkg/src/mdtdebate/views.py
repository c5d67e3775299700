"""View documents served over the API and reused by the CLI exporters.

Each builder is a pure function of a session snapshot (typically pinned to a
sequence number for time travel); arrays are sorted deterministically: badges
by agent color, everything else tie-broken by lexicographic id.
"""

from __future__ import annotations

from . import analytics, wire
from .errors import UnknownRound
from .state import SessionState


def state_doc(st: SessionState) -> dict:
    return {
        "v": 1,
        "session_id": st.session_id,
        "seq": st.seq,
        "case": wire.encode_case(st.case),
        "agents": [wire.encode_agent(a) for a in st.agents],
        "config": wire.encode_config(st.config),
        "status": wire.encode_status(st.status),
        "rounds": [wire.encode_round(r) for r in st.rounds],
        "summaries": [wire.encode_round_summary(s) for s in st.summaries],
        "hypotheses": wire.encode_registry(st.registry),
        "consensus": wire.encode_consensus(st.consensus),
    }


def round_doc(st: SessionState, round_index: int) -> dict:
    if not 0 <= round_index < len(st.rounds):
        raise UnknownRound(f"no committed round {round_index}")
    return {
        "round": wire.encode_round(st.rounds[round_index]),
        "summary": wire.encode_round_summary(st.summaries[round_index]),
    }


def conflicts_doc(st: SessionState) -> dict:
    def docs(status: str) -> list[dict]:
        selected = sorted(
            (c for c in st.conflicts.values() if c.status == status),
            key=lambda c: c.conflict_id,
        )
        out = []
        for c in selected:
            doc = wire.encode_conflict(c)
            doc["comparison"] = wire.encode_comparison(
                analytics.compare_evidence(st.rounds, st.conflicts, c.conflict_id)
            )
            out.append(doc)
        return out

    return {"active": docs("Active"), "resolved": docs("Resolved")}


def provenance_doc(st: SessionState) -> dict:
    if not st.rounds:
        return {"items": [{"id": it.item_id, "flag": analytics.FLAG_NONE, "badges": []} for it in st.case.items]}
    latest = len(st.rounds) - 1
    index = analytics.build_provenance_index(
        [it.item_id for it in st.case.items], st.rounds, st.agent_order(), latest
    )
    return {
        "items": [
            {
                "id": it.item_id,
                "flag": analytics.item_flag(st.conflicts, it.item_id, latest),
                "badges": [wire.encode_badge(b) for b in index[it.item_id]],
            }
            for it in st.case.items
        ]
    }


def flow_doc(st: SessionState) -> dict:
    edges = analytics.compute_hypothesis_flow(st.rounds)
    return {"edges": [wire.encode_flow_edge(e) for e in edges]}


def consensus_doc(st: SessionState) -> dict:
    summary = analytics.convergence_at(st.rounds, st.config, len(st.rounds) - 1) if st.rounds else None
    return {"consensus": wire.encode_consensus(summary)}


VIEW_BUILDERS = {
    "state": state_doc,
    "conflicts": conflicts_doc,
    "provenance": provenance_doc,
    "flow": flow_doc,
    "consensus": consensus_doc,
}
