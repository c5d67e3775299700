// Fixture loading and a mock view source. The fixtures are literal service
// responses captured by tools/make_fixtures.py, so every assertion here is
// against documents the real API served.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { ViewSource } from "../src/store.js";
import type { ConsensusDoc, EventFrame, ViewDocs } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

function load<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as T;
}

export const FRAMES = load<EventFrame[]>("frames.json");
export const BOUNDARIES = load<Record<string, number>>("boundaries.json");
export const SESSION = load<{ session_id: string; final_seq: number }>("session.json");

interface RawViews {
  state: ViewDocs["state"];
  conflicts: ViewDocs["conflicts"];
  provenance: ViewDocs["provenance"];
  consensus: { consensus: ConsensusDoc | null };
  flow: ViewDocs["flow"];
}

const VIEWS_BY_SEQ = load<Record<string, RawViews>>("views_by_seq.json");

export function docsAt(seq: number): ViewDocs {
  const raw = VIEWS_BY_SEQ[String(seq)];
  if (!raw) throw new Error(`no fixture views at seq ${seq}`);
  // deep-copy so a test mutating its copy cannot leak into another test
  const cloned = JSON.parse(JSON.stringify(raw)) as RawViews;
  return {
    seq,
    state: cloned.state,
    conflicts: cloned.conflicts,
    provenance: cloned.provenance,
    consensus: cloned.consensus.consensus,
    flow: cloned.flow,
  };
}

export function boundarySeq(roundIndex: number): number {
  const seq = BOUNDARIES[String(roundIndex)];
  if (seq === undefined) throw new Error(`no boundary for round ${roundIndex}`);
  return seq;
}

/** Serves the captured documents; records which seqs were requested. */
export class FixtureApi implements ViewSource {
  readonly requestedSeqs: (number | undefined)[] = [];

  async getViewDocs(_sessionId: string, at?: number): Promise<ViewDocs> {
    this.requestedSeqs.push(at);
    if (at === undefined) return docsAt(SESSION.final_seq);
    return docsAt(at);
  }

  async fetchFrames(_sessionId: string, fromSeq: number): Promise<EventFrame[]> {
    return FRAMES.filter((f) => f.seq > fromSeq);
  }
}
