// Server-authoritative rendering: everything the panels show must equal the
// service documents, with no client-side re-derivation.

import { describe, expect, it } from "vitest";

import { emptyHighlights } from "../src/selection.js";
import { buildViewModel } from "../src/viewmodel.js";
import { renderConflictPanel, renderWorkspace } from "../src/render.js";
import { boundarySeq, docsAt, SESSION } from "./helpers.js";

describe("server-authoritative view model", () => {
  const docs = docsAt(SESSION.final_seq);
  const vm = buildViewModel(docs, emptyHighlights(), null);

  it("support distributions equal the summaries documents", () => {
    for (const card of vm.timeline) {
      const doc = docs.state.summaries[card.roundIndex]!;
      const rendered = Object.fromEntries(card.support.map((s) => [s.hypothesis.hypothesisId, s.count]));
      expect(rendered).toEqual(doc.support);
      expect(card.newConflicts).toBe(doc.new_conflicts);
      expect(card.resolvedConflicts).toBe(doc.resolved_conflicts);
    }
  });

  it("badge flags equal the provenance document", () => {
    const flagsByItem = Object.fromEntries(docs.provenance.items.map((r) => [r.id, r.flag]));
    for (const row of vm.caseRows) {
      expect(row.flag).toBe(flagsByItem[row.id]);
      const docBadges = docs.provenance.items.find((r) => r.id === row.id)!.badges;
      expect(row.badges.map((b) => b.agentId)).toEqual(docBadges.map((b) => b.agent_id));
    }
  });

  it("conflict cards split active/resolved exactly as served", () => {
    expect(vm.conflicts.active.map((c) => c.conflictId)).toEqual(
      docs.conflicts.active.map((c) => c.conflict_id),
    );
    expect(vm.conflicts.resolved.map((c) => c.conflictId)).toEqual(
      docs.conflicts.resolved.map((c) => c.conflict_id),
    );
    const resolved = vm.conflicts.resolved[0]!;
    expect(resolved.lifecycle.map((ev) => ev.kind)).toEqual(["Opened", "StanceChanged", "Resolved"]);
  });

  it("consensus is passed through untouched", () => {
    expect(vm.consensus).toEqual(docs.consensus);
    const html = renderConflictPanel(vm);
    expect(html).toContain("Consensus: Whipple disease");
  });

  it("hypothesis colors come from server color indices (global legend)", () => {
    const byId = Object.fromEntries(
      docs.state.hypotheses.map((h) => [h.hypothesis_id, h.color_index]),
    );
    const h1 = vm.legend.find((t) => t.hypothesisId === "h1")!;
    const h2 = vm.legend.find((t) => t.hypothesisId === "h2")!;
    expect(byId["h1"]).not.toBe(byId["h2"]);
    expect(h1.color).not.toBe(h2.color);
    // the same tag color is used wherever the hypothesis appears
    const conflictTag = vm.conflicts.resolved[0]!.pair.find((t) => t.hypothesisId === "h1")!;
    expect(conflictTag.color).toBe(h1.color);
  });

  it("flow is present only when served and is collapsed by default", () => {
    expect(vm.flowEdges).toEqual(docs.flow!.edges);
    const html = renderWorkspace(vm);
    expect(html).toContain('<details class="flow">');
    expect(html).not.toContain('<details class="flow" open');
    const early = buildViewModel(docsAt(boundarySeq(0)), emptyHighlights(), null);
    expect(early.flowEdges).toBeNull();
  });

  it("carried and invalid markers mirror the opinion documents", () => {
    const revisionDocs = docsAt(boundarySeq(3));
    const revisionVm = buildViewModel(revisionDocs, emptyHighlights(), null);
    const cards = revisionVm.focusedRound!.cards;
    const carriedIds = cards.filter((c) => c.carried).map((c) => c.agentId);
    const docCarried = revisionDocs.state.rounds[3]!.opinions
      .filter((op) => op.carried_forward)
      .map((op) => op.agent_id);
    expect(carriedIds).toEqual(docCarried);
    const d3 = cards.find((c) => c.agentId === "d3")!;
    expect(d3.changedFrom?.hypothesisId).toBe("h2");
  });
});
