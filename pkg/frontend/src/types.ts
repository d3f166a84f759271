// Wire types mirror the engine's REST webhook; transcript types are ours.

export interface ChatRequest {
  sender: string;
  message: string;
}

export interface WireTriple {
  subject: string;
  predicate: string;
  object: string;
}

export interface WireMeta {
  intent: string;
  confidence: number;
  policy: string;
  policy_confidence: number;
  triple: WireTriple | null;
  fingerprint: string;
}

export interface ChatResponse {
  recipient_id: string;
  text: string;
  meta: WireMeta;
}

/** Every policy source the server emits. Keep in sync with the engine. */
export type PolicySource =
  | "memoization"
  | "fallback"
  | "ted"
  | "knowledge_graph"
  | "default_fallback";

export const POLICY_SOURCES: readonly PolicySource[] = [
  "memoization",
  "fallback",
  "ted",
  "knowledge_graph",
  "default_fallback",
];

export interface ReplyMeta {
  intent: string;
  confidence: number;
  policy: string;
  policyConfidence: number;
  triple: WireTriple | null;
}

/**
 * One transcript row. Entries are strictly ordered by arrival.
 * User entries never carry meta; error entries carry the text to
 * resend so the UI can offer a retry.
 */
export interface TranscriptEntry {
  author: "user" | "bot";
  kind: "message" | "error";
  text: string;
  meta?: ReplyMeta;
  retryOf?: string;
}

export interface ClientConfig {
  serverUrl: string;
  senderId: string;
  debugPanel: boolean;
  timeoutMs: number;
}
