import type { ClientConfig } from "./types.js";

export const DEFAULT_SERVER = "http://localhost:5005";
export const DEFAULT_TIMEOUT_MS = 10_000;

function randomSenderId(): string {
  const bytes = new Uint8Array(8);
  crypto.getRandomValues(bytes);
  const hex = Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
  return `web-${hex}`;
}

/**
 * Build the session config from the page's query string.
 * `?server=` overrides the server base URL; the sender id is generated
 * once here and stays stable for the session.
 */
export function resolveConfig(
  search: string,
  generateId: () => string = randomSenderId,
): ClientConfig {
  const params = new URLSearchParams(search);
  const raw = params.get("server")?.trim();
  const serverUrl = (raw || DEFAULT_SERVER).replace(/\/+$/, "");
  return {
    serverUrl,
    senderId: generateId(),
    debugPanel: params.get("debug") !== "off",
    timeoutMs: DEFAULT_TIMEOUT_MS,
  };
}
