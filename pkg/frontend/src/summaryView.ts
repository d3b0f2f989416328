import { escapeXml } from "./text.js";
import { SummaryView } from "./types.js";

export function renderSummary(summary: SummaryView | null): string {
  if (summary === null) {
    return `<div class="summary empty">no session</div>`;
  }
  return (
    `<div class="summary">` +
    `<pre class="print">${escapeXml(summary.print)}</pre>` +
    `</div>`
  );
}

export function renderNotes(notes: string[]): string {
  if (notes.length === 0) return "";
  const items = notes.map((note) => `<li>${escapeXml(note)}</li>`).join("");
  return `<ul class="service-notes">${items}</ul>`;
}

export function renderError(code: string, message: string): string {
  return (
    `<div class="error-bar" data-code="${escapeXml(code)}">` +
    `${escapeXml(message)}</div>`
  );
}
