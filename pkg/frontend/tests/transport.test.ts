import { describe, expect, it } from "vitest";

import { HttpTransport, TransportError } from "../src/transport.js";

const request = { sender: "web-test", message: "salam" };

function fakeResponse(body: unknown, status = 200): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  } as Response;
}

describe("HttpTransport", () => {
  it("posts to the webhook with an abort signal and returns the replies", async () => {
    const calls: Array<{ url: string; init: RequestInit }> = [];
    const replies = [{ recipient_id: "web-test", text: "Salam!", meta: {} }];
    const fetchFn = (async (url: string, init: RequestInit) => {
      calls.push({ url, init });
      return fakeResponse(replies);
    }) as unknown as typeof fetch;

    const transport = new HttpTransport("http://box:5005", 10_000, fetchFn);
    const result = await transport.send(request);

    expect(result).toEqual(replies);
    expect(calls[0].url).toBe("http://box:5005/webhooks/rest/webhook");
    expect(calls[0].init.method).toBe("POST");
    expect(JSON.parse(calls[0].init.body as string)).toEqual(request);
    expect(calls[0].init.signal).toBeInstanceOf(AbortSignal);
  });

  it("carries the HTTP status on non-OK responses", async () => {
    const fetchFn = (async () => fakeResponse({ error: "busy" }, 503)) as unknown as typeof fetch;
    const transport = new HttpTransport("http://box:5005", 10_000, fetchFn);

    const failure = await transport.send(request).catch((e) => e);
    expect(failure).toBeInstanceOf(TransportError);
    expect(failure.status).toBe(503);
    expect(failure.message).toContain("503");
  });

  it("rejects non-array response bodies", async () => {
    const fetchFn = (async () => fakeResponse({ not: "a list" })) as unknown as typeof fetch;
    const transport = new HttpTransport("http://box:5005", 10_000, fetchFn);

    await expect(transport.send(request)).rejects.toThrow("unexpected response shape");
  });

  it("wraps connection failures", async () => {
    const fetchFn = (async () => {
      throw new Error("ECONNREFUSED");
    }) as unknown as typeof fetch;
    const transport = new HttpTransport("http://box:5005", 10_000, fetchFn);

    const failure = await transport.send(request).catch((e) => e);
    expect(failure).toBeInstanceOf(TransportError);
    expect(failure.message).toContain("network failure");
    expect(failure.status).toBeUndefined();
  });

  it("reports a timeout when the abort fires first", async () => {
    const fetchFn = ((_url: string, init: RequestInit) =>
      new Promise((_resolve, reject) => {
        (init.signal as AbortSignal).addEventListener("abort", () =>
          reject(new Error("aborted")),
        );
      })) as unknown as typeof fetch;
    const transport = new HttpTransport("http://box:5005", 5, fetchFn);

    const failure = await transport.send(request).catch((e) => e);
    expect(failure).toBeInstanceOf(TransportError);
    expect(failure.message).toContain("no reply within");
  });
});
