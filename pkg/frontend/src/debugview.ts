import type { PolicySource, TranscriptEntry } from "./types.js";

export interface Badge {
  label: string;
  tone: string;
}

// Exhaustive over PolicySource; the compiler flags a missing stage.
const BADGES: Record<PolicySource, Badge> = {
  memoization: { label: "memoization", tone: "memo" },
  fallback: { label: "fallback", tone: "warn" },
  ted: { label: "ted", tone: "ranker" },
  knowledge_graph: { label: "knowledge_graph", tone: "kg" },
  default_fallback: { label: "default_fallback", tone: "bad" },
};

const NEUTRAL_TONE = "neutral";

/** Unknown policy values get a neutral badge, never a render failure. */
export function badgeFor(policy: string): Badge {
  const known = (BADGES as Record<string, Badge>)[policy];
  return known ?? { label: policy || "unknown", tone: NEUTRAL_TONE };
}

export interface DebugViewModel {
  intent: string;
  /** Whole percent, 0 to 100; the bar width. */
  confidencePercent: number;
  badge: Badge;
  tripleText: string | null;
}

/** Null for entries without meta (user entries, error entries): panel hidden. */
export function debugView(entry: TranscriptEntry): DebugViewModel | null {
  const meta = entry.meta;
  if (!meta) {
    return null;
  }
  const clamped = Math.min(1, Math.max(0, meta.confidence));
  const triple =
    meta.policy === "knowledge_graph" && meta.triple
      ? `${meta.triple.subject} ${meta.triple.predicate} ${meta.triple.object}`
      : null;
  return {
    intent: meta.intent,
    confidencePercent: Math.round(clamped * 100),
    badge: badgeFor(meta.policy),
    tripleText: triple,
  };
}

function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** Render the sidebar panel for one entry; empty string when hidden. */
export function renderDebugPanel(entry: TranscriptEntry): string {
  const view = debugView(entry);
  if (!view) {
    return "";
  }
  const lines = [
    `<div class="debug-panel">`,
    `<div class="debug-intent">${escapeHtml(view.intent)}</div>`,
    `<div class="debug-bar"><div class="debug-bar-fill" style="width:${view.confidencePercent}%"></div></div>`,
    `<div class="debug-confidence">${view.confidencePercent}%</div>`,
    `<span class="badge badge-${view.badge.tone}">${escapeHtml(view.badge.label)}</span>`,
  ];
  if (view.tripleText !== null) {
    lines.push(`<div class="debug-triple">${escapeHtml(view.tripleText)}</div>`);
  }
  lines.push(`</div>`);
  return lines.join("");
}
