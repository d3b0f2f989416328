import { describe, expect, it } from "vitest";

import { layoutTree } from "../src/layout.js";
import { visibleText } from "../src/text.js";
import { EDIT_WARNING, renderTree, renderTreeEditor } from "../src/treeView.js";
import { SessionCreated, TreeEdited, TreeView } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const model1 = loadFixture<TreeView>("tree_model1");
const latin = loadFixture<SessionCreated>("session_latin");
const edited = loadFixture<TreeEdited>("edit_tree");

describe("layoutTree", () => {
  it("puts the root at the top and children below their parent", () => {
    const layout = layoutTree(model1);
    const byName = new Map(layout.nodes.map((node) => [node.name, node]));
    const root = byName.get("eps_a_b")!;
    for (const node of layout.nodes) {
      if (node.name !== "eps_a_b") expect(node.y).toBeGreaterThan(root.y);
    }
    const ab = byName.get("a_b")!;
    expect(byName.get("a")!.y).toBeGreaterThan(ab.y);
    expect(byName.get("b")!.y).toBeGreaterThan(ab.y);
  });

  it("keeps the canonical child order left to right", () => {
    const layout = layoutTree(latin);
    const byName = new Map(layout.nodes.map((node) => [node.name, node]));
    // eps_row_col_iid_rw2 = (eps, row_col_iid_rw2): eps sits left
    expect(byName.get("eps")!.x).toBeLessThan(byName.get("row_col_iid_rw2")!.x);
    // row_col_iid_rw2 = (row, col, iid_rw2)
    expect(byName.get("row")!.x).toBeLessThan(byName.get("col")!.x);
    expect(byName.get("col")!.x).toBeLessThan(byName.get("iid_rw2")!.x);
  });

  it("draws one edge per parent-child pair, anchored at both nodes", () => {
    const layout = layoutTree(model1);
    const byName = new Map(layout.nodes.map((node) => [node.name, node]));
    expect(layout.edges).toHaveLength(4);
    for (const edge of layout.edges) {
      const parent = byName.get(edge.from)!;
      const child = byName.get(edge.to)!;
      expect(child.parent).toBe(parent.name);
      expect(edge.x1).toBe(parent.x);
      expect(edge.y1).toBe(parent.y);
      expect(edge.x2).toBe(child.x);
      expect(edge.y2).toBe(child.y);
    }
  });
});

describe("renderTree", () => {
  it("shows every canonical node name and the service's prior badges", () => {
    const markup = renderTree(model1);
    const texts = visibleText(markup).join("\n");
    for (const node of model1.nodes) {
      expect(markup).toContain(`data-name="${node.name}"`);
      expect(texts).toContain(node.name);
      if (node.weight_label !== null) expect(texts).toContain(node.weight_label);
      if (node.variance_label !== null) expect(texts).toContain(node.variance_label);
    }
  });

  it("marks the selected node", () => {
    const markup = renderTree(model1, "a_b");
    expect(markup).toMatch(/class="node kind-split selected" data-name="a_b"/);
    expect(renderTree(model1)).not.toContain("selected");
  });

  it("renders the latin-square forest with its long canonical names", () => {
    const texts = visibleText(renderTree(latin)).join("\n");
    expect(texts).toContain("eps_row_col_iid_rw2");
    expect(texts).toContain("iid_rw2");
  });
});

describe("renderTreeEditor", () => {
  it("always shows the reset warning next to the edit box", () => {
    const markup = renderTreeEditor(model1.tree, []);
    expect(markup).toContain(`id="tree-input"`);
    expect(markup).toContain(`value="${model1.tree}"`);
    expect(visibleText(markup).join("\n")).toContain(EDIT_WARNING);
    expect(EDIT_WARNING).toContain("resets all split priors");
  });

  it("lists the service notes from an applied edit", () => {
    const markup = renderTreeEditor(edited.tree, edited.notes);
    const texts = visibleText(markup).join("\n");
    expect(texts).toContain("tree changed: all split priors reset to Dirichlet");
  });
});
