"""JSON wire encodings: case schema, agent replies, analytics documents.

One canonical encoder (`dumps`) is used for log lines, view documents, and
golden files so identical states are byte-identical on the wire. Decoders are
strict about shape but tolerant of extra keys (agent replies especially).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from . import model
from .case import CASE_SCHEMA_VERSION, CaseItem, CaseRecord
from .errors import CorruptFile


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, compact separators, raw unicode."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# -- case ---------------------------------------------------------------------

def encode_case(case: CaseRecord) -> dict:
    return {
        "v": CASE_SCHEMA_VERSION,
        "case_id": case.case_id,
        "narrative": case.narrative,
        "revision": case.revision,
        "items": [
            {
                "id": it.item_id,
                "category": it.category,
                "label": it.label,
                "value": it.value,
                "span": list(it.source_span) if it.source_span else None,
            }
            for it in case.items
        ],
    }


def decode_case(doc: dict) -> CaseRecord:
    items = tuple(
        CaseItem(
            item_id=i["id"],
            category=i["category"],
            label=i["label"],
            value=i.get("value", ""),
            source_span=tuple(i["span"]) if i.get("span") else None,
        )
        for i in doc["items"]
    )
    ordinals = [int(it.item_id[1:]) for it in items if it.item_id[1:].isdigit()]
    return CaseRecord(
        case_id=doc["case_id"],
        narrative=doc.get("narrative", ""),
        items=items,
        revision=doc.get("revision", 0),
        next_ordinal=doc.get("next_ordinal", max(ordinals, default=0) + 1),
    )


# -- agents / config ------------------------------------------------------------

def encode_agent(agent: model.AgentProfile) -> dict:
    return {
        "agent_id": agent.agent_id,
        "specialty": agent.specialty,
        "role_prompt": agent.role_prompt,
        "color_index": agent.color_index,
    }


def decode_agent(doc: dict) -> model.AgentProfile:
    return model.AgentProfile(
        agent_id=doc["agent_id"],
        specialty=doc.get("specialty", ""),
        role_prompt=doc.get("role_prompt", ""),
        color_index=doc.get("color_index", 0),
    )


def encode_config(config: model.DebateConfig) -> dict:
    return {
        "max_debate_rounds": config.max_debate_rounds,
        "convergence_stops_debate": config.convergence_stops_debate,
        "max_repairs": config.max_repairs,
        "consensus_threshold": config.consensus_threshold,
        "hypothesis_aliases": {k: v for k, v in config.hypothesis_aliases},
    }


def decode_config(doc: dict) -> model.DebateConfig:
    return model.DebateConfig(
        max_debate_rounds=doc.get("max_debate_rounds", 3),
        convergence_stops_debate=doc.get("convergence_stops_debate", True),
        max_repairs=doc.get("max_repairs", 2),
        consensus_threshold=doc.get("consensus_threshold", 1.0),
        hypothesis_aliases=tuple(sorted(doc.get("hypothesis_aliases", {}).items())),
    )


# -- opinions -------------------------------------------------------------------

def encode_opinion(op: model.Opinion) -> dict:
    return {
        "agent_id": op.agent_id,
        "round_index": op.round_index,
        "hypothesis_id": op.hypothesis_id,
        "hypothesis_label_raw": op.hypothesis_label_raw,
        "reasoning_steps": [
            {
                "text": s.text,
                "cited_item_ids": list(s.cited_item_ids),
                "cited_evidence_ids": list(s.cited_evidence_ids),
            }
            for s in op.reasoning_steps
        ],
        "summary": op.summary,
        "evidence": [
            {
                "evidence_id": ev.evidence_id,
                "source_type": ev.source_type,
                "citation": ev.citation,
                "snippet": ev.snippet,
                "applies_to_item_ids": list(ev.applies_to_item_ids),
            }
            for ev in op.evidence
        ],
        "changed_from": op.changed_from,
        "carried_forward": op.carried_forward,
        "invalid_output": op.invalid_output,
    }


def decode_opinion(doc: dict) -> model.Opinion:
    return model.Opinion(
        agent_id=doc["agent_id"],
        round_index=doc["round_index"],
        hypothesis_id=doc["hypothesis_id"],
        hypothesis_label_raw=doc["hypothesis_label_raw"],
        reasoning_steps=tuple(
            model.ReasoningStep(
                text=s["text"],
                cited_item_ids=tuple(s.get("cited_item_ids", ())),
                cited_evidence_ids=tuple(s.get("cited_evidence_ids", ())),
            )
            for s in doc.get("reasoning_steps", ())
        ),
        summary=doc.get("summary", ""),
        evidence=tuple(
            model.EvidenceRef(
                evidence_id=e["evidence_id"],
                source_type=e["source_type"],
                citation=e.get("citation", ""),
                snippet=e.get("snippet", ""),
                applies_to_item_ids=tuple(e.get("applies_to_item_ids", ())),
            )
            for e in doc.get("evidence", ())
        ),
        changed_from=doc.get("changed_from"),
        carried_forward=doc.get("carried_forward", False),
        invalid_output=doc.get("invalid_output", False),
    )


# -- rounds ----------------------------------------------------------------------

def encode_trigger(trigger: model.Trigger | None) -> dict | None:
    if trigger is None:
        return None
    return {"kind": trigger.kind, "id": trigger.ref_id}


def decode_trigger(doc: dict | None) -> model.Trigger | None:
    if doc is None:
        return None
    return model.Trigger(kind=doc["kind"], ref_id=doc["id"])


def encode_round(rnd: model.Round) -> dict:
    return {
        "round_index": rnd.round_index,
        "kind": rnd.kind,
        "spoke": list(rnd.spoke),
        "trigger": encode_trigger(rnd.trigger),
        "opinions": [encode_opinion(op) for op in rnd.opinions],
    }


def decode_round(doc: dict) -> model.Round:
    return model.Round(
        round_index=doc["round_index"],
        kind=doc["kind"],
        spoke=tuple(doc["spoke"]),
        opinions=tuple(decode_opinion(o) for o in doc["opinions"]),
        trigger=decode_trigger(doc.get("trigger")),
    )


# -- analytics ---------------------------------------------------------------------

def encode_lifecycle_event(ev: model.LifecycleEvent) -> dict:
    return {"kind": ev.kind, "round_index": ev.round_index, "detail": ev.detail}


def decode_lifecycle_event(doc: dict) -> model.LifecycleEvent:
    return model.LifecycleEvent(kind=doc["kind"], round_index=doc["round_index"], detail=doc.get("detail", ""))


def encode_conflict(c: model.Conflict) -> dict:
    return {
        "conflict_id": c.conflict_id,
        "hypothesis_pair": list(c.hypothesis_pair),
        "involved_agents": sorted(c.involved_agents),
        "contested_item_ids": sorted(c.contested_item_ids),
        "status": c.status,
        "lifecycle": [encode_lifecycle_event(ev) for ev in c.lifecycle],
        "supersedes": c.supersedes,
    }


def decode_conflict(doc: dict, agent_rounds=(), item_rounds=()) -> model.Conflict:
    return model.Conflict(
        conflict_id=doc["conflict_id"],
        hypothesis_pair=tuple(doc["hypothesis_pair"]),
        involved_agents=frozenset(doc["involved_agents"]),
        contested_item_ids=frozenset(doc["contested_item_ids"]),
        status=doc["status"],
        lifecycle=tuple(decode_lifecycle_event(e) for e in doc["lifecycle"]),
        supersedes=doc.get("supersedes"),
        agent_rounds=tuple(agent_rounds),
        item_rounds=tuple(item_rounds),
    )


def encode_round_summary(s: model.RoundSummary) -> dict:
    return {
        "round_index": s.round_index,
        "support": {h: n for h, n in s.support},
        "new_conflicts": s.new_conflicts,
        "resolved_conflicts": s.resolved_conflicts,
        "opinion_changes": [
            {"agent_id": oc.agent_id, "from": oc.from_hypothesis, "to": oc.to_hypothesis}
            for oc in s.opinion_changes
        ],
    }


def decode_round_summary(doc: dict) -> model.RoundSummary:
    return model.RoundSummary(
        round_index=doc["round_index"],
        support=tuple(sorted(doc["support"].items())),
        new_conflicts=doc["new_conflicts"],
        resolved_conflicts=doc["resolved_conflicts"],
        opinion_changes=tuple(
            model.OpinionChange(oc["agent_id"], oc["from"], oc["to"])
            for oc in doc["opinion_changes"]
        ),
    )


def encode_consensus(c: model.ConsensusSummary | None) -> dict | None:
    if c is None:
        return None
    return {
        "converged": c.converged,
        "hypothesis_id": c.hypothesis_id,
        "support_share": c.support_share,
        "dissenting_agents": sorted(c.dissenting_agents),
        "as_of_round": c.as_of_round,
    }


def decode_consensus(doc: dict | None) -> model.ConsensusSummary | None:
    if doc is None:
        return None
    return model.ConsensusSummary(
        converged=doc["converged"],
        hypothesis_id=doc.get("hypothesis_id"),
        support_share=doc["support_share"],
        dissenting_agents=frozenset(doc.get("dissenting_agents", ())),
        as_of_round=doc["as_of_round"],
    )


def encode_flow_edge(e: model.FlowEdge) -> dict:
    return {
        "from": {"round_index": e.from_round, "hypothesis_id": e.from_hypothesis},
        "to": {"round_index": e.to_round, "hypothesis_id": e.to_hypothesis},
        "weight": e.weight,
    }


def encode_badge(b: model.ProvenanceBadge) -> dict:
    return {
        "item_id": b.item_id,
        "agent_id": b.agent_id,
        "hypothesis_id": b.hypothesis_id,
        "round_index": b.round_index,
        "evidence_ids": list(b.evidence_ids),
    }


def encode_comparison(c: model.EvidenceComparison) -> dict:
    def side(entries: tuple[model.SideEntry, ...]) -> list[dict]:
        return [
            {
                "agent_id": e.agent_id,
                "evidence": [
                    {"evidence_id": i, "citation": cit, "snippet": sn}
                    for i, cit, sn in e.evidence
                ],
            }
            for e in entries
        ]

    return {
        "conflict_id": c.conflict_id,
        "rows": [
            {
                "item_id": r.item_id,
                "side_a": side(r.side_a),
                "side_b": side(r.side_b),
                "divergence_kind": r.divergence_kind,
            }
            for r in c.rows
        ],
    }


def encode_intervention(iv: model.Intervention) -> dict:
    return {
        "intervention_id": iv.intervention_id,
        "selected_item_ids": list(iv.selected_item_ids),
        "instruction": iv.instruction,
        "target_agent_ids": list(iv.target_agent_ids),
    }


def decode_intervention(doc: dict) -> model.Intervention:
    return model.Intervention(
        intervention_id=doc["intervention_id"],
        selected_item_ids=tuple(doc["selected_item_ids"]),
        instruction=doc["instruction"],
        target_agent_ids=tuple(doc["target_agent_ids"]),
    )


def encode_registry(reg: model.HypothesisRegistry) -> list[dict]:
    return [
        {
            "hypothesis_id": r.hypothesis_id,
            "canonical_key": r.canonical_key,
            "display_label": r.display_label,
            "color_index": r.color_index,
        }
        for r in reg.records
    ]


def decode_registry(docs: list[dict]) -> model.HypothesisRegistry:
    return model.HypothesisRegistry(
        tuple(
            model.HypothesisRecord(
                hypothesis_id=d["hypothesis_id"],
                canonical_key=d["canonical_key"],
                display_label=d["display_label"],
                color_index=d["color_index"],
            )
            for d in docs
        )
    )


def encode_status(status: model.SessionStatus) -> dict:
    return {"phase": status.phase, "muted_agents": sorted(status.muted_agents)}


def decode_status(doc: dict) -> model.SessionStatus:
    return model.SessionStatus(phase=doc["phase"], muted_agents=frozenset(doc["muted_agents"]))


# -- agent replies -------------------------------------------------------------------

@dataclass(frozen=True)
class Reason:
    """Machine-readable validation failure reason, suitable for a repair prompt."""

    code: str
    message: str


@dataclass(frozen=True)
class ParsedReply:
    """Structurally valid agent reply, before canonicalization."""

    hypothesis_label: str
    steps: tuple[model.ReasoningStep, ...]
    summary: str
    evidence: tuple[model.EvidenceRef, ...]


_REPLY_TYPE_MAP = {"guideline": "Guideline", "literature": "Literature"}


def _extract_json_object(raw: str) -> dict | None:
    text = raw.strip()
    if text.startswith("```"):
        text = text.strip("`")
        if text.startswith("json"):
            text = text[4:]
        text = text.strip()
    try:
        value = json.loads(text)
        return value if isinstance(value, dict) else None
    except json.JSONDecodeError:
        pass
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end <= start:
        return None
    try:
        value = json.loads(text[start : end + 1])
        return value if isinstance(value, dict) else None
    except json.JSONDecodeError:
        return None


def parse_agent_reply(raw: str, case_item_ids: frozenset[str]) -> ParsedReply | list[Reason]:
    """Parse and structurally validate one raw agent reply.

    Returns a :class:`ParsedReply` or the list of failure reasons. Checks:
    single JSON object, non-empty hypothesis, every cited item id exists in
    the case, every cited evidence id is declared, declared evidence ids are
    unique and apply only to known items. Extra keys (including any
    self-reported opinion change) are discarded.
    """
    doc = _extract_json_object(raw)
    if doc is None:
        return [Reason("SchemaMismatch", "reply is not a single JSON object")]

    reasons: list[Reason] = []
    hypothesis = doc.get("hypothesis")
    if not isinstance(hypothesis, str) or not hypothesis.strip():
        reasons.append(Reason("EmptyHypothesis", "field 'hypothesis' must be a non-empty string"))
        hypothesis = ""

    evidence: list[model.EvidenceRef] = []
    declared: set[str] = set()
    raw_evidence = doc.get("evidence", [])
    if not isinstance(raw_evidence, list):
        reasons.append(Reason("SchemaMismatch", "field 'evidence' must be a list"))
        raw_evidence = []
    for n, ev in enumerate(raw_evidence):
        if not isinstance(ev, dict) or not isinstance(ev.get("id"), str):
            reasons.append(Reason("SchemaMismatch", f"evidence[{n}] must be an object with a string 'id'"))
            continue
        ev_id = ev["id"]
        if ev_id in declared:
            reasons.append(Reason("SchemaMismatch", f"evidence id {ev_id!r} declared twice"))
            continue
        declared.add(ev_id)
        source = _REPLY_TYPE_MAP.get(str(ev.get("type", "")).lower())
        if source is None:
            reasons.append(Reason("SchemaMismatch", f"evidence[{n}].type must be 'guideline' or 'literature'"))
            continue
        applies = ev.get("items", [])
        if not isinstance(applies, list):
            reasons.append(Reason("SchemaMismatch", f"evidence[{n}].items must be a list"))
            applies = []
        for item_id in applies:
            if item_id not in case_item_ids:
                reasons.append(Reason("UnknownItemReference", f"evidence {ev_id!r} cites unknown item {item_id!r}"))
        evidence.append(
            model.EvidenceRef(
                evidence_id=ev_id,
                source_type=source,
                citation=str(ev.get("citation", "")),
                snippet=str(ev.get("snippet", "")),
                applies_to_item_ids=tuple(sorted(str(i) for i in applies)),
            )
        )

    steps: list[model.ReasoningStep] = []
    raw_steps = doc.get("steps", [])
    if not isinstance(raw_steps, list):
        reasons.append(Reason("SchemaMismatch", "field 'steps' must be a list"))
        raw_steps = []
    for n, step in enumerate(raw_steps):
        if not isinstance(step, dict) or not isinstance(step.get("text"), str):
            reasons.append(Reason("SchemaMismatch", f"steps[{n}] must be an object with a string 'text'"))
            continue
        items = step.get("items", [])
        ev_ids = step.get("evidence", [])
        if not isinstance(items, list) or not isinstance(ev_ids, list):
            reasons.append(Reason("SchemaMismatch", f"steps[{n}].items and .evidence must be lists"))
            continue
        for item_id in items:
            if item_id not in case_item_ids:
                reasons.append(Reason("UnknownItemReference", f"steps[{n}] cites unknown item {item_id!r}"))
        for ev_id in ev_ids:
            if ev_id not in declared:
                reasons.append(Reason("UnknownEvidenceReference", f"steps[{n}] cites undeclared evidence {ev_id!r}"))
        steps.append(
            model.ReasoningStep(
                text=step["text"],
                cited_item_ids=tuple(sorted(str(i) for i in items)),
                cited_evidence_ids=tuple(sorted(str(e) for e in ev_ids)),
            )
        )

    if reasons:
        return reasons
    return ParsedReply(
        hypothesis_label=hypothesis,
        steps=tuple(steps),
        summary=str(doc.get("summary", "")),
        evidence=tuple(evidence),
    )


def load_json(path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"cannot read JSON from {path}: {exc}") from exc
