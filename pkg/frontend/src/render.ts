// HTML rendering of the three coordinated panels. Pure string templates over
// the ViewModel; interactivity is wired by event delegation on data-*
// attributes in main.ts, so these functions stay testable without a DOM.

import type {
  ConflictCardVM,
  HypothesisTag,
  OpinionCardVM,
  TimelineCardVM,
  ViewModel,
} from "./viewmodel.js";

function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function hypTag(tag: HypothesisTag, highlighted = false): string {
  const cls = highlighted ? "hyp-tag highlight" : "hyp-tag";
  return `<span class="${cls}" data-hypothesis="${esc(tag.hypothesisId)}" style="--hyp:${tag.color}">${esc(tag.label)}</span>`;
}

const FLAG_LABEL = { none: "", conflict: "Conflict", resolved: "Resolved" } as const;

export function renderCasePanel(vm: ViewModel): string {
  const rows = vm.caseRows
    .map((row) => {
      const badges = row.badges
        .map(
          (b) =>
            `<span class="badge" data-agent="${esc(b.agentId)}" title="${esc(b.specialty)} — ${esc(
              b.hypothesis.label,
            )} (round ${b.roundIndex})" style="--agent:${b.color};--hyp:${b.hypothesis.color}">${esc(
              b.agentId,
            )}</span>`,
        )
        .join("");
      const flag = row.flag === "none" ? "" : `<span class="flag flag-${row.flag}">${FLAG_LABEL[row.flag]}</span>`;
      const cls = row.highlighted ? "case-item highlight" : "case-item";
      return `<li class="${cls}" data-item="${esc(row.id)}">
        <span class="cat">${esc(row.category)}</span>
        <span class="label">${esc(row.label)}</span>
        <span class="value">${esc(row.value)}</span>
        ${flag}<span class="badges">${badges}</span>
      </li>`;
    })
    .join("\n");
  return `<ul class="case-items">${rows}</ul>`;
}

export function renderInterventionForm(vm: ViewModel): string {
  const items = vm.caseRows
    .map(
      (row) =>
        `<label><input type="checkbox" name="iv-item" value="${esc(row.id)}"> ${esc(row.label)}</label>`,
    )
    .join("");
  const targets = vm.focusedRound
    ? vm.focusedRound.cards
        .map(
          (card) =>
            `<label><input type="checkbox" name="iv-target" value="${esc(card.agentId)}"> ${esc(
              card.agentId,
            )} (${esc(card.specialty)})</label>`,
        )
        .join("")
    : "";
  return `<form id="intervention-form" class="intervention">
    <fieldset class="iv-items">${items}</fieldset>
    <textarea name="iv-instruction" placeholder="Clinical instruction…"></textarea>
    <fieldset class="iv-targets">${targets}</fieldset>
    <button type="submit">Send to selected agents</button>
    <div class="iv-error" role="alert"></div>
  </form>`;
}

function supportBar(card: TimelineCardVM): string {
  const segments = card.support
    .map((s) => {
      const pct = card.total ? (100 * s.count) / card.total : 0;
      return `<span class="seg" title="${esc(s.hypothesis.label)}: ${s.count}" style="width:${pct}%;background:${s.hypothesis.color}"></span>`;
    })
    .join("");
  return `<div class="support-bar">${segments}</div>`;
}

export function renderTimeline(vm: ViewModel): string {
  const cards = vm.timeline
    .map((card) => {
      const badges = [
        card.newConflicts ? `<span class="tl-badge conflict">+${card.newConflicts} conflict</span>` : "",
        card.resolvedConflicts ? `<span class="tl-badge resolved">${card.resolvedConflicts} resolved</span>` : "",
        card.opinionChanges.length ? `<span class="tl-badge change">${card.opinionChanges.length} changed</span>` : "",
        card.hasInvalid ? `<span class="tl-badge invalid">invalid output</span>` : "",
      ].join("");
      const cls = card.pinned ? "round-card pinned" : "round-card";
      return `<button class="${cls}" data-round="${card.roundIndex}">
        <span class="round-title">r${card.roundIndex} · ${esc(card.kind)}</span>
        ${supportBar(card)}${badges}
      </button>`;
    })
    .join("\n");
  return `<div class="timeline">${cards}</div>`;
}

function opinionCard(card: OpinionCardVM): string {
  const cls = ["opinion-card", card.highlighted ? "highlight" : "", card.carried ? "carried" : ""]
    .filter(Boolean)
    .join(" ");
  const marks = [
    card.changedFrom ? `<span class="mark changed">was ${esc(card.changedFrom.label)}</span>` : "",
    card.carried ? `<span class="mark carried">carried forward</span>` : "",
    card.invalid ? `<span class="mark invalid">invalid output</span>` : "",
  ].join("");
  return `<article class="${cls}" data-agent-card="${esc(card.agentId)}" style="--agent:${card.agentColor}">
    <header><span class="agent">${esc(card.agentId)}</span> <span class="spec">${esc(card.specialty)}</span></header>
    ${hypTag(card.hypothesis)}
    <span class="counts">${card.itemsCited} items · ${card.evidenceCited} evidence</span>
    ${marks}
    <details><summary>reasoning</summary>
      <p>${esc(card.summary)}</p>
      <ol>${card.steps
        .map((s) => `<li>${esc(s.text)} <span class="refs">[${s.items.map(esc).join(",")}]</span></li>`)
        .join("")}</ol>
    </details>
  </article>`;
}

export function renderDiscussion(vm: ViewModel): string {
  if (!vm.focusedRound) return `<p class="empty">No rounds committed yet.</p>`;
  const strip = vm.timeline[vm.focusedRound.roundIndex]?.opinionChanges ?? [];
  const changes = strip.length
    ? `<div class="change-strip">${strip
        .map((c) => `<span>${esc(c.agent_id)}: ${esc(c.from)} → ${esc(c.to)}</span>`)
        .join("")}</div>`
    : "";
  return `${renderTimeline(vm)}
  ${changes}
  <div class="opinions" data-round-view="${vm.focusedRound.roundIndex}">
    ${vm.focusedRound.cards.map(opinionCard).join("\n")}
  </div>`;
}

function conflictCard(card: ConflictCardVM): string {
  const cls = card.highlighted ? "conflict-card highlight" : "conflict-card";
  const lifecycle = card.lifecycle
    .map((ev) => `<li><span class="lc-kind">${esc(ev.kind)}</span> r${ev.round_index} ${esc(ev.detail)}</li>`)
    .join("");
  const comparison = card.comparisonRows
    .map(
      (row) => `<tr>
      <td>${esc(row.item_id)}</td>
      <td>${row.side_a.map((s) => `${esc(s.agent_id)}: ${s.evidence.map((e) => esc(e.citation)).join("; ") || "no evidence"}`).join("<br>")}</td>
      <td>${row.side_b.map((s) => `${esc(s.agent_id)}: ${s.evidence.map((e) => esc(e.citation)).join("; ") || "no evidence"}`).join("<br>")}</td>
      <td>${esc(row.divergence_kind)}</td>
    </tr>`,
    )
    .join("");
  const supersedes = card.supersedes
    ? `<span class="supersedes">supersedes ${esc(card.supersedes)}</span>`
    : "";
  return `<article class="${cls}" data-conflict="${esc(card.conflictId)}">
    <header>${hypTag(card.pair[0])} vs ${hypTag(card.pair[1])} ${supersedes}</header>
    <div class="meta">agents ${card.involvedAgents.map(esc).join(", ")} · items ${card.contestedItems.map(esc).join(", ")}</div>
    <div class="actions">
      <button data-action="locate" data-conflict-id="${esc(card.conflictId)}">Locate evidence</button>
      <button data-action="reeval" data-conflict-id="${esc(card.conflictId)}" ${card.status === "Resolved" ? "disabled" : ""}>Request re-eval</button>
      <button data-action="compare" data-conflict-id="${esc(card.conflictId)}">Evidence comparison</button>
    </div>
    <details class="resolution-path"><summary>resolution path</summary><ul>${lifecycle}</ul></details>
    <details class="comparison"><summary>evidence comparison</summary>
      <table><thead><tr><th>item</th><th>side A</th><th>side B</th><th>divergence</th></tr></thead>
      <tbody>${comparison}</tbody></table>
    </details>
  </article>`;
}

export function renderConflictPanel(vm: ViewModel): string {
  const consensus = vm.consensus
    ? vm.consensus.converged
      ? `<div class="consensus converged">Consensus: ${esc(
          vm.legend.find((t) => t.hypothesisId === vm.consensus!.hypothesis_id)?.label ??
            vm.consensus.hypothesis_id ?? "",
        )} (share ${vm.consensus.support_share.toFixed(2)})${
          vm.consensus.dissenting_agents.length
            ? `, dissenting: ${vm.consensus.dissenting_agents.map(esc).join(", ")}`
            : ""
        }</div>`
      : `<div class="consensus">No consensus yet (modal share ${vm.consensus.support_share.toFixed(2)})</div>`
    : `<div class="consensus">No rounds committed.</div>`;
  return `<section class="conflict-groups">
    <h3>Active (${vm.conflicts.active.length})</h3>
    ${vm.conflicts.active.map(conflictCard).join("\n") || '<p class="empty">none</p>'}
    <h3>Resolved (${vm.conflicts.resolved.length})</h3>
    ${vm.conflicts.resolved.map(conflictCard).join("\n") || '<p class="empty">none</p>'}
  </section>
  ${consensus}`;
}

export function renderFlow(vm: ViewModel): string {
  if (!vm.flowEdges) return "";
  const rows = vm.flowEdges
    .map(
      (e) =>
        `<li>r${e.from.round_index} ${esc(e.from.hypothesis_id)} → r${e.to.round_index} ${esc(
          e.to.hypothesis_id,
        )} · ${e.weight}</li>`,
    )
    .join("");
  return `<details class="flow"><summary>Hypothesis flow (optional)</summary><ul>${rows}</ul></details>`;
}

export function renderBanner(vm: ViewModel): string {
  if (vm.pinnedRound === null) return "";
  return `<div class="pin-banner">Viewing round ${vm.pinnedRound} as it was (seq ${vm.seq}).
    <button data-action="unpin">Return to current</button></div>`;
}

export function renderLegend(vm: ViewModel): string {
  return `<div class="legend">${vm.legend.map((t) => hypTag(t)).join("")}</div>`;
}

export function renderWorkspace(vm: ViewModel): string {
  return `${renderBanner(vm)}
<div class="workspace ${vm.pinnedRound !== null ? "pinned" : ""}" data-seq="${vm.seq}">
  <section class="panel report-view">
    <h2>Report &amp; Evidence</h2>
    ${renderCasePanel(vm)}
    ${renderInterventionForm(vm)}
  </section>
  <section class="panel discussion-view">
    <h2>Agent Discussion <span class="phase">${esc(vm.phase)}</span></h2>
    ${renderLegend(vm)}
    ${renderDiscussion(vm)}
    ${renderFlow(vm)}
  </section>
  <section class="panel conflict-view">
    <h2>Conflicts</h2>
    ${renderConflictPanel(vm)}
  </section>
</div>`;
}
