import { escapeXml } from "./text.js";
import { GuideState } from "./types.js";

/** The guided-walk panel. Question objects from the service render
 * verbatim: text, options and notes are not rephrased or recomputed. */
export function renderGuide(state: GuideState | null): string {
  if (state === null) {
    return (
      `<div class="guide idle">` +
      `<p>Walk through the tree one split at a time and pick priors from answers.</p>` +
      `<button id="guide-start" type="button">Begin guide</button>` +
      `</div>`
    );
  }
  if (state.done) {
    return (
      `<div class="guide done">` +
      `<p class="headline">Guide finished. The chosen priors are applied:</p>` +
      `<pre class="summary">${escapeXml(state.summary)}</pre>` +
      `</div>`
    );
  }
  const question = state.question;
  const parts: string[] = [`<div class="guide question" data-question="${escapeXml(question.id)}">`];
  parts.push(`<p class="node">Node: <code>${escapeXml(question.node)}</code></p>`);
  parts.push(`<p class="text">${escapeXml(question.text)}</p>`);
  if (question.note !== null) {
    parts.push(`<p class="note">${escapeXml(question.note)}</p>`);
  }
  if (question.kind === "choice") {
    parts.push(`<div class="choices">`);
    for (const option of question.options) {
      parts.push(
        `<button type="button" class="answer" data-answer="${escapeXml(option)}">` +
          `${escapeXml(option)}</button>`,
      );
    }
    parts.push(`</div>`);
  } else {
    parts.push(
      `<div class="number-entry">` +
        `<input id="guide-number" type="number" step="any"/>` +
        `<button id="guide-submit" type="button">Answer</button>` +
        `</div>`,
    );
  }
  parts.push(`</div>`);
  return parts.join("");
}
