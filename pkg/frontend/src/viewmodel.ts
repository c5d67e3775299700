// Denormalizes the service documents into exactly what the three panels
// render. Pure assembly: joins by id and counts list lengths, but all
// analytical facts (flags, support, conflicts, consensus) come from the
// documents untouched.

import { agentColor, hypothesisColor } from "./palette.js";
import type { HighlightSet } from "./selection.js";
import type {
  ConflictDoc,
  ConsensusDoc,
  FlowEdgeDoc,
  LifecycleEventDoc,
  OpinionChangeDoc,
  ViewDocs,
} from "./types.js";

export interface HypothesisTag {
  hypothesisId: string;
  label: string;
  color: string;
}

export interface BadgeVM {
  agentId: string;
  specialty: string;
  color: string;
  hypothesis: HypothesisTag;
  roundIndex: number;
  evidenceIds: string[];
}

export interface CaseRowVM {
  id: string;
  category: string;
  label: string;
  value: string;
  flag: "none" | "conflict" | "resolved";
  badges: BadgeVM[];
  highlighted: boolean;
}

export interface SupportSegmentVM {
  hypothesis: HypothesisTag;
  count: number;
}

export interface TimelineCardVM {
  roundIndex: number;
  kind: string;
  support: SupportSegmentVM[];
  total: number;
  newConflicts: number;
  resolvedConflicts: number;
  opinionChanges: OpinionChangeDoc[];
  hasInvalid: boolean;
  pinned: boolean;
}

export interface OpinionCardVM {
  agentId: string;
  specialty: string;
  agentColor: string;
  hypothesis: HypothesisTag;
  itemsCited: number;
  evidenceCited: number;
  changedFrom: HypothesisTag | null;
  carried: boolean;
  invalid: boolean;
  summary: string;
  steps: { text: string; items: string[]; evidence: string[] }[];
  highlighted: boolean;
}

export interface ConflictCardVM {
  conflictId: string;
  status: "Active" | "Resolved";
  pair: [HypothesisTag, HypothesisTag];
  involvedAgents: string[];
  contestedItems: string[];
  lifecycle: LifecycleEventDoc[];
  supersedes: string | null;
  comparisonRows: ConflictDoc["comparison"]["rows"];
  highlighted: boolean;
}

export interface ViewModel {
  sessionId: string;
  seq: number;
  phase: string;
  pinnedRound: number | null;
  mutedAgents: string[];
  legend: HypothesisTag[];
  caseRows: CaseRowVM[];
  timeline: TimelineCardVM[];
  /** Opinion cards of the focused round (the latest unless pinned). */
  focusedRound: { roundIndex: number; kind: string; cards: OpinionCardVM[] } | null;
  conflicts: { active: ConflictCardVM[]; resolved: ConflictCardVM[] };
  consensus: ConsensusDoc | null;
  flowEdges: FlowEdgeDoc[] | null;
}

export function buildViewModel(
  docs: ViewDocs,
  highlights: HighlightSet,
  pinnedRound: number | null,
): ViewModel {
  const state = docs.state;
  const tagOf = new Map<string, HypothesisTag>(
    state.hypotheses.map((h) => [
      h.hypothesis_id,
      {
        hypothesisId: h.hypothesis_id,
        label: h.display_label,
        color: hypothesisColor(h.color_index),
      },
    ]),
  );
  const agentOf = new Map(state.agents.map((a) => [a.agent_id, a]));
  const tag = (id: string): HypothesisTag =>
    tagOf.get(id) ?? { hypothesisId: id, label: id, color: "#666" };

  const flagOf = new Map(docs.provenance.items.map((row) => [row.id, row]));
  const caseRows: CaseRowVM[] = state.case.items.map((item) => {
    const prov = flagOf.get(item.id);
    return {
      id: item.id,
      category: item.category,
      label: item.label,
      value: item.value,
      flag: prov?.flag ?? "none",
      badges: (prov?.badges ?? []).map((b) => ({
        agentId: b.agent_id,
        specialty: agentOf.get(b.agent_id)?.specialty ?? "",
        color: agentColor(agentOf.get(b.agent_id)?.color_index ?? 0),
        hypothesis: tag(b.hypothesis_id),
        roundIndex: b.round_index,
        evidenceIds: b.evidence_ids,
      })),
      highlighted: highlights.itemIds.has(item.id),
    };
  });

  const timeline: TimelineCardVM[] = state.summaries.map((summary) => {
    const round = state.rounds[summary.round_index]!;
    const support = Object.entries(summary.support)
      .sort(([a], [b]) => (a < b ? -1 : 1))
      .map(([hyp, count]) => ({ hypothesis: tag(hyp), count }));
    return {
      roundIndex: summary.round_index,
      kind: round.kind,
      support,
      total: support.reduce((n, s) => n + s.count, 0),
      newConflicts: summary.new_conflicts,
      resolvedConflicts: summary.resolved_conflicts,
      opinionChanges: summary.opinion_changes,
      hasInvalid: round.opinions.some((op) => op.invalid_output),
      pinned: pinnedRound === summary.round_index,
    };
  });

  const focusIndex = pinnedRound ?? state.rounds.length - 1;
  const focusRound = state.rounds[focusIndex];
  const focusedRound = focusRound
    ? {
        roundIndex: focusRound.round_index,
        kind: focusRound.kind,
        cards: focusRound.opinions.map((op) => ({
          agentId: op.agent_id,
          specialty: agentOf.get(op.agent_id)?.specialty ?? "",
          agentColor: agentColor(agentOf.get(op.agent_id)?.color_index ?? 0),
          hypothesis: tag(op.hypothesis_id),
          itemsCited: new Set(
            op.reasoning_steps.flatMap((s) => s.cited_item_ids).concat(
              op.evidence.flatMap((e) => e.applies_to_item_ids),
            ),
          ).size,
          evidenceCited: op.evidence.length,
          changedFrom: op.changed_from ? tag(op.changed_from) : null,
          carried: op.carried_forward,
          invalid: op.invalid_output,
          summary: op.summary,
          steps: op.reasoning_steps.map((s) => ({
            text: s.text,
            items: s.cited_item_ids,
            evidence: s.cited_evidence_ids,
          })),
          highlighted: highlights.agentIds.has(op.agent_id),
        })),
      }
    : null;

  const conflictCard = (c: ConflictDoc): ConflictCardVM => ({
    conflictId: c.conflict_id,
    status: c.status,
    pair: [tag(c.hypothesis_pair[0]), tag(c.hypothesis_pair[1])],
    involvedAgents: c.involved_agents,
    contestedItems: c.contested_item_ids,
    lifecycle: c.lifecycle,
    supersedes: c.supersedes,
    comparisonRows: c.comparison.rows,
    highlighted: highlights.conflictIds.has(c.conflict_id),
  });

  return {
    sessionId: state.session_id,
    seq: docs.seq,
    phase: state.status.phase,
    pinnedRound,
    mutedAgents: state.status.muted_agents,
    legend: state.hypotheses.map((h) => tag(h.hypothesis_id)),
    caseRows,
    timeline,
    focusedRound,
    conflicts: {
      active: docs.conflicts.active.map(conflictCard),
      resolved: docs.conflicts.resolved.map(conflictCard),
    },
    consensus: docs.consensus,
    flowEdges: docs.flow?.edges ?? null,
  };
}
