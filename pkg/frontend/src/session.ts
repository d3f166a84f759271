import { TransportError, type Transport } from "./transport.js";
import type { ChatResponse, ClientConfig, TranscriptEntry } from "./types.js";

type Listener = () => void;

interface Job {
  text: string;
  done: () => void;
}

/**
 * Owns the transcript and the send queue for one browser session.
 *
 * Sends are serialized: at most one request is in flight, later sends
 * queue behind it, and replies land in request order. A failed send
 * becomes an error entry carrying the original text so it can be
 * retried; the transcript never shows a silent gap.
 */
export class ChatSession {
  readonly entries: TranscriptEntry[] = [];

  private queue: Job[] = [];
  private inFlight = false;
  private listeners: Listener[] = [];

  constructor(
    private readonly transport: Transport,
    private readonly config: ClientConfig,
  ) {}

  /** Whitespace-only input must not be sendable. */
  canSend(text: string): boolean {
    return text.trim().length > 0;
  }

  /** True while a request is in flight or queued; drives the input lock. */
  get busy(): boolean {
    return this.inFlight || this.queue.length > 0;
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  /**
   * Append the user entry immediately and queue the request. The
   * returned promise settles once this message's replies (or its error
   * entry) are in the transcript.
   */
  send(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed) {
      return Promise.resolve();
    }
    this.push({ author: "user", kind: "message", text: trimmed });
    return new Promise((resolve) => {
      this.queue.push({ text: trimmed, done: resolve });
      void this.pump();
    });
  }

  /** Resend the text behind a failed entry. */
  retry(entry: TranscriptEntry): Promise<void> {
    if (entry.kind !== "error" || !entry.retryOf) {
      return Promise.resolve();
    }
    return this.send(entry.retryOf);
  }

  private async pump(): Promise<void> {
    if (this.inFlight) {
      return;
    }
    const job = this.queue.shift();
    if (!job) {
      return;
    }
    this.inFlight = true;
    try {
      const replies = await this.transport.send({
        sender: this.config.senderId,
        message: job.text,
      });
      for (const reply of replies) {
        this.push(this.botEntry(reply));
      }
    } catch (failure) {
      this.push({
        author: "bot",
        kind: "error",
        text: this.describe(failure),
        retryOf: job.text,
      });
    } finally {
      this.inFlight = false;
      job.done();
      void this.pump();
    }
  }

  private botEntry(reply: ChatResponse): TranscriptEntry {
    return {
      author: "bot",
      kind: "message",
      text: reply.text,
      meta: {
        intent: reply.meta.intent,
        confidence: reply.meta.confidence,
        policy: reply.meta.policy,
        policyConfidence: reply.meta.policy_confidence,
        triple: reply.meta.triple,
      },
    };
  }

  private describe(failure: unknown): string {
    if (failure instanceof TransportError) {
      return `Message failed: ${failure.message}`;
    }
    return `Message failed: ${String(failure)}`;
  }

  private push(entry: TranscriptEntry): void {
    this.entries.push(entry);
    for (const listener of this.listeners) {
      listener();
    }
  }
}
