// Bootstrap: connect to a session (?session=<id>, server origin by default),
// stream frames, and re-render on changes. User actions are fire-and-confirm:
// the POST responds with the committed round's seq and the stream catches up.

import { ApiClient, ServiceError } from "./api.js";
import { computeHighlights, Selection, selectionIsStale } from "./selection.js";
import { resync, SessionStore } from "./store.js";
import { buildViewModel } from "./viewmodel.js";
import { renderWorkspace } from "./render.js";

const root = document.getElementById("app")!;
const params = new URLSearchParams(location.search);
const base = params.get("api") ?? "";
const sessionId = params.get("session");

const api = new ApiClient(base);
let store: SessionStore;
let selection: Selection = null;
let renderQueued = false;

function scheduleRender(): void {
  if (renderQueued) return;
  renderQueued = true;
  queueMicrotask(async () => {
    renderQueued = false;
    if (store.liveStale && !store.isPinned()) await store.refreshLive(api);
    const docs = store.current();
    if (!docs) return;
    if (selectionIsStale(selection, docs)) {
      selection = null;
      notify("Selection cleared: the entity is gone at this point in time.");
    }
    const vm = buildViewModel(docs, computeHighlights(selection, docs), store.pinned?.roundIndex ?? null);
    root.innerHTML = renderWorkspace(vm);
  });
}

function notify(message: string): void {
  const el = document.getElementById("notice")!;
  el.textContent = message;
  el.classList.add("visible");
  setTimeout(() => el.classList.remove("visible"), 4000);
}

async function handleAction(target: HTMLElement): Promise<void> {
  const action = target.dataset.action;
  if (action === "unpin") {
    store.unpin();
    scheduleRender();
    return;
  }
  const conflictId = target.dataset.conflictId;
  if (action === "locate" && conflictId) {
    selection = { kind: "conflict", conflictId };
    scheduleRender();
    return;
  }
  if (action === "reeval" && conflictId) {
    try {
      const result = await api.requestReeval(store.sessionId, conflictId);
      store.trackAction("reeval", result);
    } catch (err) {
      if (err instanceof ServiceError) notify(`Re-eval refused: ${err.error.code}`);
    }
    return;
  }
  if (action === "compare" && conflictId) {
    const card = root.querySelector(`[data-conflict="${conflictId}"] details.comparison`);
    if (card) (card as HTMLDetailsElement).open = true;
  }
}

async function handleClick(ev: Event): Promise<void> {
  const el = ev.target as HTMLElement;
  const actionEl = el.closest<HTMLElement>("[data-action]");
  if (actionEl) {
    await handleAction(actionEl);
    return;
  }
  const roundCard = el.closest<HTMLElement>("[data-round]");
  if (roundCard) {
    await store.pinRound(api, Number(roundCard.dataset.round));
    scheduleRender();
    return;
  }
  const conflictCard = el.closest<HTMLElement>("[data-conflict]");
  if (conflictCard && !el.closest("details")) {
    selection = { kind: "conflict", conflictId: conflictCard.dataset.conflict! };
    scheduleRender();
    return;
  }
  const item = el.closest<HTMLElement>("[data-item]");
  if (item) {
    const itemId = item.dataset.item!;
    selection =
      selection?.kind === "item" && selection.itemId === itemId ? null : { kind: "item", itemId };
    scheduleRender();
    return;
  }
  if (!el.closest("form")) {
    selection = null;
    scheduleRender();
  }
}

async function handleIntervention(ev: Event): Promise<void> {
  ev.preventDefault();
  const form = ev.target as HTMLFormElement;
  const items = [...form.querySelectorAll<HTMLInputElement>('input[name="iv-item"]:checked')].map(
    (i) => i.value,
  );
  const targets = [...form.querySelectorAll<HTMLInputElement>('input[name="iv-target"]:checked')].map(
    (i) => i.value,
  );
  const instruction = (form.querySelector('[name="iv-instruction"]') as HTMLTextAreaElement).value;
  const errorBox = form.querySelector(".iv-error") as HTMLElement;
  if (!items.length || !targets.length || !instruction.trim()) {
    errorBox.textContent = "Select items, targets, and write an instruction.";
    return;
  }
  try {
    const result = await api.submitIntervention(store.sessionId, { items, instruction, targets });
    store.trackAction("intervention", result);
    notify(`Revision round ${result.round_index} pending…`);
  } catch (err) {
    if (err instanceof ServiceError) errorBox.textContent = `${err.error.code}: ${err.error.message}`;
  }
}

async function start(): Promise<void> {
  if (!sessionId) {
    root.innerHTML = `<p class="empty">Open with ?session=&lt;id&gt; (and optionally ?api=&lt;base-url&gt;).</p>`;
    return;
  }
  store = new SessionStore(sessionId);
  await resync(store, api);
  scheduleRender();
  api.streamEvents(sessionId, store.seq, (frame) => {
    store.applyFrame(frame);
    scheduleRender();
  }, () => {
    // EventSource reconnects on its own; a manual resync fills any gap
    void resync(store, api).then(scheduleRender);
  });
  document.body.addEventListener("click", (ev) => void handleClick(ev));
  document.body.addEventListener("submit", (ev) => {
    if ((ev.target as HTMLElement).id === "intervention-form") void handleIntervention(ev);
  });
}

void start();
