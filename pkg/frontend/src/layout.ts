import { NodeView, TreeView } from "./types.js";

// Tidy top-down layout: leaves take evenly spaced slots in canonical
// order, parents sit centered above their children, roots at the top.

export interface PlacedNode extends NodeView {
  x: number;
  y: number;
}

export interface Edge {
  from: string;
  to: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface TreeLayout {
  nodes: PlacedNode[];
  edges: Edge[];
  width: number;
  height: number;
}

export const SLOT_WIDTH = 150;
export const LEVEL_HEIGHT = 96;
export const MARGIN_X = 80;
export const MARGIN_Y = 56;
const TREE_GAP = 1; // empty slots between separate trees

export function layoutTree(view: TreeView): TreeLayout {
  const byName = new Map(view.nodes.map((node) => [node.name, node]));
  const xs = new Map<string, number>();
  const depths = new Map<string, number>();
  let slot = 0;
  let maxDepth = 0;

  const place = (name: string, depth: number): number => {
    const node = byName.get(name);
    if (node === undefined) throw new Error(`layout: unknown node ${name}`);
    depths.set(name, depth);
    maxDepth = Math.max(maxDepth, depth);
    let x: number;
    if (node.children.length === 0) {
      x = slot;
      slot += 1;
    } else {
      const childXs = node.children.map((child) => place(child, depth + 1));
      x = (Math.min(...childXs) + Math.max(...childXs)) / 2;
    }
    xs.set(name, x);
    return x;
  };

  for (const [i, root] of view.roots.entries()) {
    if (i > 0) slot += TREE_GAP;
    place(root, 0);
  }

  const toPixelX = (x: number) => MARGIN_X + x * SLOT_WIDTH;
  const toPixelY = (depth: number) => MARGIN_Y + depth * LEVEL_HEIGHT;

  const nodes: PlacedNode[] = [];
  for (const node of view.nodes) {
    const x = xs.get(node.name);
    const depth = depths.get(node.name);
    if (x === undefined || depth === undefined) continue; // not reachable from a root
    nodes.push({ ...node, x: toPixelX(x), y: toPixelY(depth) });
  }

  const placed = new Map(nodes.map((node) => [node.name, node]));
  const edges: Edge[] = [];
  for (const node of nodes) {
    if (node.parent === null) continue;
    const parent = placed.get(node.parent);
    if (parent === undefined) continue;
    edges.push({
      from: parent.name,
      to: node.name,
      x1: parent.x,
      y1: parent.y,
      x2: node.x,
      y2: node.y,
    });
  }

  return {
    nodes,
    edges,
    width: MARGIN_X * 2 + Math.max(slot - 1, 0) * SLOT_WIDTH,
    height: MARGIN_Y * 2 + maxDepth * LEVEL_HEIGHT + 40,
  };
}
