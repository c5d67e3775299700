// Session store: an ordered frame queue, round-boundary index, time-travel
// pinning, and optimistic action markers. The store never derives analytics;
// it only decides *which* server documents to show (live vs pinned) and when
// the live ones are stale.

import type { EventFrame, ViewDocs } from "./types.js";

/** The read surface the store needs; ApiClient satisfies it structurally. */
export interface ViewSource {
  getViewDocs(sessionId: string, at?: number): Promise<ViewDocs>;
  fetchFrames(sessionId: string, fromSeq: number): Promise<EventFrame[]>;
}

export interface PendingAction {
  kind: "intervention" | "reeval";
  submittedSeq: number; // log seq returned by the POST
  roundIndex: number; // the round the action committed
  resolved: boolean;
}

export interface PinnedView {
  roundIndex: number;
  seq: number;
  docs: ViewDocs;
}

export class SessionStore {
  readonly sessionId: string;
  seq = 0;
  /** round_index -> RoundCommitted seq, built from the frame stream. */
  readonly boundaries = new Map<number, number>();
  live: ViewDocs | null = null;
  liveStale = true;
  pinned: PinnedView | null = null;
  readonly pending: PendingAction[] = [];
  private readonly frames: EventFrame[] = [];

  constructor(sessionId: string) {
    this.sessionId = sessionId;
  }

  /** Apply one stream frame in seq order; duplicates and replays are ignored,
   * so a reconnect that re-delivers overlapping frames is harmless. */
  applyFrame(frame: EventFrame): void {
    if (frame.seq <= this.seq) return;
    if (frame.seq !== this.seq + 1) {
      throw new Error(`frame gap: have seq ${this.seq}, got ${frame.seq}`);
    }
    this.frames.push(frame);
    this.seq = frame.seq;
    this.liveStale = true;
    if (frame.kind === "RoundCommitted") {
      const roundIndex = frame.payload.round_index as number;
      this.boundaries.set(roundIndex, frame.seq);
      for (const action of this.pending) {
        if (!action.resolved && frame.seq >= action.submittedSeq) action.resolved = true;
      }
    }
  }

  applyFrames(frames: Iterable<EventFrame>): void {
    for (const frame of frames) this.applyFrame(frame);
  }

  /** Refresh the live documents at the current seq (read-your-writes: the
   * fetch is pinned to the seq the store has observed, never "latest"). */
  async refreshLive(api: ViewSource): Promise<ViewDocs> {
    this.live = await api.getViewDocs(this.sessionId, this.seq);
    this.liveStale = false;
    return this.live;
  }

  /** Pin the workspace to a committed round. The pinned documents are
   * fetched at that round's boundary seq and frozen: later frames keep
   * accumulating but do not touch them. */
  async pinRound(api: ViewSource, roundIndex: number): Promise<PinnedView> {
    const seq = this.boundaries.get(roundIndex);
    if (seq === undefined) throw new Error(`round ${roundIndex} is not committed`);
    const docs = await api.getViewDocs(this.sessionId, seq);
    this.pinned = { roundIndex, seq, docs };
    return this.pinned;
  }

  unpin(): void {
    this.pinned = null;
  }

  /** The documents a render pass should show right now. */
  current(): ViewDocs | null {
    return this.pinned ? this.pinned.docs : this.live;
  }

  isPinned(): boolean {
    return this.pinned !== null;
  }

  trackAction(kind: PendingAction["kind"], result: { round_index: number; seq: number }): PendingAction {
    const action: PendingAction = {
      kind,
      submittedSeq: result.seq,
      roundIndex: result.round_index,
      resolved: this.seq >= result.seq,
    };
    this.pending.push(action);
    return action;
  }

  unresolvedActions(): PendingAction[] {
    return this.pending.filter((a) => !a.resolved);
  }
}

/** Full (re)sync: replay frames from the store's seq, then refresh views.
 * After a disconnect this yields the same state as a fresh full fetch. */
export async function resync(store: SessionStore, api: ViewSource): Promise<ViewDocs> {
  const frames = await api.fetchFrames(store.sessionId, store.seq);
  store.applyFrames(frames);
  return store.refreshLive(api);
}
