// Typed client for the /api/v1 service. All reads accept an optional seq pin
// so views can be fetched exactly as of a past event (time travel).

import type {
  ConflictsDoc,
  ConsensusViewDoc,
  EventFrame,
  FlowDoc,
  ProvenanceDoc,
  StateDoc,
  ViewDocs,
} from "./types.js";

export interface ApiError {
  status: number;
  code: string;
  message: string;
}

export class ServiceError extends Error {
  constructor(public readonly error: ApiError) {
    super(`${error.code}: ${error.message}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ServiceError({
        status: resp.status,
        code: body.code ?? "Unknown",
        message: body.message ?? "",
      });
    }
    return body as T;
  }

  createSession(body: unknown): Promise<{ session_id: string; stream_url: string; seq: number }> {
    return this.request("/api/v1/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getView<T>(sessionId: string, name: string, opts: { at?: number; i?: number } = {}): Promise<T> {
    const params = new URLSearchParams();
    if (opts.at !== undefined) params.set("at", String(opts.at));
    if (opts.i !== undefined) params.set("i", String(opts.i));
    const query = params.toString();
    return this.request(`/api/v1/sessions/${sessionId}/views/${name}${query ? `?${query}` : ""}`);
  }

  /** Every view document pinned to one seq (latest when omitted). */
  async getViewDocs(sessionId: string, at?: number): Promise<ViewDocs> {
    const state = await this.getView<StateDoc>(sessionId, "state", { at });
    const conflicts = await this.getView<ConflictsDoc>(sessionId, "conflicts", { at });
    const provenance = await this.getView<ProvenanceDoc>(sessionId, "provenance", { at });
    const consensus = await this.getView<ConsensusViewDoc>(sessionId, "consensus", { at });
    let flow: FlowDoc | null = null;
    if (state.rounds.length >= 2) {
      flow = await this.getView<FlowDoc>(sessionId, "flow", { at });
    }
    return {
      seq: at ?? state.seq,
      state,
      conflicts,
      provenance,
      consensus: consensus.consensus,
      flow,
    };
  }

  /** Replay frames [fromSeq+1 .. latest] over plain HTTP (no tailing). */
  async fetchFrames(sessionId: string, fromSeq: number): Promise<EventFrame[]> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/v1/sessions/${sessionId}/events?from=${fromSeq}&tail=0`,
    );
    if (!resp.ok) {
      const body = await resp.json();
      throw new ServiceError({ status: resp.status, code: body.code, message: body.message });
    }
    const text = await resp.text();
    const frames: EventFrame[] = [];
    for (const line of text.split("\n")) {
      if (line.startsWith("data: ")) frames.push(JSON.parse(line.slice(6)));
    }
    return frames;
  }

  /** Live tail via EventSource; returns a disposer. Resumable from any seq. */
  streamEvents(
    sessionId: string,
    fromSeq: number,
    onFrame: (frame: EventFrame) => void,
    onError?: (err: Event) => void,
  ): () => void {
    const source = new EventSource(
      `${this.baseUrl}/api/v1/sessions/${sessionId}/events?from=${fromSeq}`,
    );
    source.onmessage = (msg) => onFrame(JSON.parse(msg.data));
    if (onError) source.onerror = onError;
    return () => source.close();
  }

  submitIntervention(
    sessionId: string,
    body: { items: string[]; instruction: string; targets: string[] },
  ): Promise<{ round_index: number; seq: number }> {
    return this.request(`/api/v1/sessions/${sessionId}/interventions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  requestReeval(sessionId: string, conflictId: string): Promise<{ round_index: number; seq: number }> {
    return this.request(`/api/v1/sessions/${sessionId}/conflicts/${conflictId}/reeval`, {
      method: "POST",
    });
  }

  control(
    sessionId: string,
    action: string,
    agentId?: string,
  ): Promise<{ phase: string; muted_agents: string[]; seq: number }> {
    return this.request(`/api/v1/sessions/${sessionId}/control`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(agentId ? { action, agent_id: agentId } : { action }),
    });
  }
}
