// ApiClient plumbing against a stubbed fetch: URL shapes, error mapping,
// SSE replay parsing.

import { describe, expect, it } from "vitest";

import { ApiClient, ServiceError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("pins view requests to a seq", async () => {
    const urls: string[] = [];
    const client = new ApiClient("http://svc", async (url) => {
      urls.push(url);
      return jsonResponse({ ok: true });
    });
    await client.getView("s-1", "conflicts", { at: 14 });
    await client.getView("s-1", "round", { i: 2, at: 14 });
    expect(urls).toEqual([
      "http://svc/api/v1/sessions/s-1/views/conflicts?at=14",
      "http://svc/api/v1/sessions/s-1/views/round?at=14&i=2",
    ]);
  });

  it("maps error bodies onto ServiceError", async () => {
    const client = new ApiClient("", async () =>
      jsonResponse({ code: "ConflictAlreadyResolved", message: "conflict c1 is already resolved" }, 409),
    );
    try {
      await client.requestReeval("s-1", "c1");
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ServiceError);
      expect((err as ServiceError).error).toEqual({
        status: 409,
        code: "ConflictAlreadyResolved",
        message: "conflict c1 is already resolved",
      });
    }
  });

  it("parses SSE replay bodies into frames", async () => {
    const body = [
      "id: 1",
      'data: {"seq":1,"ts":0,"kind":"SessionCreated","v":1,"payload":{},"crc":0}',
      "",
      "id: 2",
      'data: {"seq":2,"ts":0,"kind":"RoundStarted","v":1,"payload":{"round_index":0},"crc":0}',
      "",
    ].join("\n");
    const client = new ApiClient("", async () => new Response(body, { status: 200 }));
    const frames = await client.fetchFrames("s-1", 0);
    expect(frames.map((f) => [f.seq, f.kind])).toEqual([
      [1, "SessionCreated"],
      [2, "RoundStarted"],
    ]);
  });

  it("posts interventions with the wire body", async () => {
    let captured: any = null;
    const client = new ApiClient("", async (_url, init) => {
      captured = JSON.parse(init!.body as string);
      return jsonResponse({ round_index: 3, seq: 28 });
    });
    const result = await client.submitIntervention("s-1", {
      items: ["i4"],
      instruction: "reweigh",
      targets: ["d3"],
    });
    expect(captured).toEqual({ items: ["i4"], instruction: "reweigh", targets: ["d3"] });
    expect(result).toEqual({ round_index: 3, seq: 28 });
  });
});
