// Cross-highlighting. Selecting an entity in any view highlights its related
// entities everywhere else; the computation reads only service documents and
// is purely presentational (no server calls, no mutation).

import type { ViewDocs } from "./types.js";

export type Selection =
  | { kind: "item"; itemId: string }
  | { kind: "conflict"; conflictId: string }
  | { kind: "agent"; agentId: string; roundIndex: number }
  | { kind: "hypothesis"; hypothesisId: string }
  | { kind: "round"; roundIndex: number }
  | null;

export interface HighlightSet {
  itemIds: Set<string>;
  agentIds: Set<string>;
  hypothesisIds: Set<string>;
  conflictIds: Set<string>;
  roundIndex: number | null;
}

export function emptyHighlights(): HighlightSet {
  return {
    itemIds: new Set(),
    agentIds: new Set(),
    hypothesisIds: new Set(),
    conflictIds: new Set(),
    roundIndex: null,
  };
}

/** True when the selected entity no longer exists in the pinned documents
 * (it can vanish after a reconnect); callers clear the selection then. */
export function selectionIsStale(selection: Selection, docs: ViewDocs): boolean {
  if (selection === null) return false;
  switch (selection.kind) {
    case "item":
      return !docs.state.case.items.some((it) => it.id === selection.itemId);
    case "conflict":
      return ![...docs.conflicts.active, ...docs.conflicts.resolved].some(
        (c) => c.conflict_id === selection.conflictId,
      );
    case "agent":
      return !docs.state.agents.some((a) => a.agent_id === selection.agentId);
    case "hypothesis":
      return !docs.state.hypotheses.some((h) => h.hypothesis_id === selection.hypothesisId);
    case "round":
      return selection.roundIndex >= docs.state.rounds.length;
  }
}

export function computeHighlights(selection: Selection, docs: ViewDocs): HighlightSet {
  const out = emptyHighlights();
  if (selection === null || selectionIsStale(selection, docs)) return out;

  switch (selection.kind) {
    case "conflict": {
      const conflict = [...docs.conflicts.active, ...docs.conflicts.resolved].find(
        (c) => c.conflict_id === selection.conflictId,
      )!;
      for (const itemId of conflict.contested_item_ids) out.itemIds.add(itemId);
      for (const agentId of conflict.involved_agents) out.agentIds.add(agentId);
      for (const hyp of conflict.hypothesis_pair) out.hypothesisIds.add(hyp);
      out.conflictIds.add(conflict.conflict_id);
      break;
    }
    case "item": {
      out.itemIds.add(selection.itemId);
      const row = docs.provenance.items.find((r) => r.id === selection.itemId);
      for (const badge of row?.badges ?? []) {
        out.agentIds.add(badge.agent_id);
        out.hypothesisIds.add(badge.hypothesis_id);
      }
      break;
    }
    case "agent": {
      out.agentIds.add(selection.agentId);
      const round = docs.state.rounds[selection.roundIndex];
      const opinion = round?.opinions.find((op) => op.agent_id === selection.agentId);
      if (opinion) {
        out.hypothesisIds.add(opinion.hypothesis_id);
        for (const step of opinion.reasoning_steps) {
          for (const itemId of step.cited_item_ids) out.itemIds.add(itemId);
        }
        for (const ev of opinion.evidence) {
          for (const itemId of ev.applies_to_item_ids) out.itemIds.add(itemId);
        }
      }
      break;
    }
    case "hypothesis": {
      out.hypothesisIds.add(selection.hypothesisId);
      const latest = docs.state.rounds[docs.state.rounds.length - 1];
      for (const op of latest?.opinions ?? []) {
        if (op.hypothesis_id === selection.hypothesisId) out.agentIds.add(op.agent_id);
      }
      break;
    }
    case "round":
      out.roundIndex = selection.roundIndex;
      break;
  }
  return out;
}
