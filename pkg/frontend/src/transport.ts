import type { ChatRequest, ChatResponse } from "./types.js";

export class TransportError extends Error {
  constructor(
    message: string,
    readonly status?: number,
  ) {
    super(message);
    this.name = "TransportError";
  }
}

export interface Transport {
  send(request: ChatRequest): Promise<ChatResponse[]>;
}

/** POSTs to the engine's synchronous webhook; no sockets, no retries. */
export class HttpTransport implements Transport {
  constructor(
    private readonly baseUrl: string,
    private readonly timeoutMs: number,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async send(request: ChatRequest): Promise<ChatResponse[]> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    try {
      let response: Response;
      try {
        response = await this.fetchFn(`${this.baseUrl}/webhooks/rest/webhook`, {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify(request),
          signal: controller.signal,
        });
      } catch (cause) {
        if (controller.signal.aborted) {
          throw new TransportError(`no reply within ${this.timeoutMs / 1000} s`);
        }
        throw new TransportError(`network failure: ${String(cause)}`);
      }
      if (!response.ok) {
        throw new TransportError(`server returned ${response.status}`, response.status);
      }
      const body: unknown = await response.json();
      if (!Array.isArray(body)) {
        throw new TransportError("unexpected response shape");
      }
      return body as ChatResponse[];
    } finally {
      clearTimeout(timer);
    }
  }
}
