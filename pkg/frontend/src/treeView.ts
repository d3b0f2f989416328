import { layoutTree } from "./layout.js";
import { escapeXml } from "./text.js";
import { TreeView } from "./types.js";

export const EDIT_WARNING =
  "Editing the tree resets all split priors to their Dirichlet defaults; " +
  "total-variance priors are kept where the root survives.";

const NODE_RADIUS = 17;

/** SVG diagram of the prior tree. Labels and badges are the service's
 * strings verbatim; only the geometry is computed here. Nodes carry
 * data-name attributes for click wiring. */
export function renderTree(view: TreeView, selected?: string): string {
  const layout = layoutTree(view);
  const parts: string[] = [];
  parts.push(
    `<svg class="tree" viewBox="0 0 ${layout.width} ${layout.height}" ` +
      `width="${layout.width}" height="${layout.height}" role="img">`,
  );
  for (const edge of layout.edges) {
    parts.push(
      `<line class="edge" x1="${edge.x1}" y1="${edge.y1}" ` +
        `x2="${edge.x2}" y2="${edge.y2}"/>`,
    );
  }
  for (const node of layout.nodes) {
    const classes = ["node", `kind-${node.kind}`];
    if (node.name === selected) classes.push("selected");
    parts.push(`<g class="${classes.join(" ")}" data-name="${escapeXml(node.name)}">`);
    parts.push(`<circle cx="${node.x}" cy="${node.y}" r="${NODE_RADIUS}"/>`);
    parts.push(
      `<text class="name" x="${node.x}" y="${node.y + 5}" text-anchor="middle">` +
        `${escapeXml(node.name)}</text>`,
    );
    if (node.variance_label !== null) {
      parts.push(
        `<text class="badge variance" x="${node.x}" y="${node.y - NODE_RADIUS - 10}" ` +
          `text-anchor="middle">${escapeXml(node.variance_label)}</text>`,
      );
    }
    if (node.weight_label !== null) {
      parts.push(
        `<text class="badge weight" x="${node.x}" y="${node.y + NODE_RADIUS + 16}" ` +
          `text-anchor="middle">${escapeXml(node.weight_label)}</text>`,
      );
    }
    parts.push("</g>");
  }
  parts.push("</svg>");
  return parts.join("");
}

/** The tree edit box: current tree text plus the standing reset warning. */
export function renderTreeEditor(tree: string, notes: string[]): string {
  const noteItems = notes
    .map((note) => `<li class="note">${escapeXml(note)}</li>`)
    .join("");
  return (
    `<div class="tree-editor">` +
    `<label>Tree <input id="tree-input" type="text" value="${escapeXml(tree)}"/></label>` +
    `<button id="tree-apply" type="button">Apply</button>` +
    `<p class="warning">${escapeXml(EDIT_WARNING)}</p>` +
    (noteItems ? `<ul class="notes">${noteItems}</ul>` : "") +
    `</div>`
  );
}
