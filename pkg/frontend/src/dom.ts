import { renderDebugPanel } from "./debugview.js";
import type { ChatSession } from "./session.js";
import type { ClientConfig, TranscriptEntry } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function entryRow(
  entry: TranscriptEntry,
  config: ClientConfig,
  session: ChatSession,
): HTMLElement {
  const row = el("div", `entry entry-${entry.author} entry-${entry.kind}`);
  const bubble = el("div", "bubble", entry.text);
  row.appendChild(bubble);
  if (entry.kind === "error" && entry.retryOf) {
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", () => {
      retry.disabled = true;
      void session.retry(entry);
    });
    bubble.appendChild(retry);
  }
  if (config.debugPanel) {
    const panel = renderDebugPanel(entry);
    if (panel) {
      row.insertAdjacentHTML("beforeend", panel);
    }
  }
  return row;
}

/** Wire the session to the page. Rebuilds the transcript on each change. */
export function mount(root: HTMLElement, session: ChatSession, config: ClientConfig): void {
  const transcript = root.querySelector(".transcript") as HTMLElement;
  const input = root.querySelector(".chat-input") as HTMLInputElement;
  const send = root.querySelector(".chat-send") as HTMLButtonElement;
  const serverField = root.querySelector(".server-url") as HTMLInputElement | null;

  const sync = () => {
    transcript.replaceChildren(
      ...session.entries.map((entry) => entryRow(entry, config, session)),
    );
    transcript.scrollTop = transcript.scrollHeight;
    const locked = session.busy;
    input.disabled = locked;
    send.disabled = locked || !session.canSend(input.value);
    if (!locked) input.focus();
  };

  const submit = () => {
    if (!session.canSend(input.value) || session.busy) return;
    const text = input.value;
    input.value = "";
    void session.send(text);
    sync();
  };

  session.onChange(sync);
  send.addEventListener("click", submit);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") submit();
  });
  input.addEventListener("input", () => {
    send.disabled = session.busy || !session.canSend(input.value);
  });

  if (serverField) {
    serverField.value = config.serverUrl;
    serverField.addEventListener("change", () => {
      const url = new URL(window.location.href);
      url.searchParams.set("server", serverField.value.trim());
      window.location.href = url.toString();
    });
  }

  sync();
}
