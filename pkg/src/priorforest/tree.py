"""Prior tree DSL: parsing, canonical form, rendering and edits.

Tree strings place every model component in a forest of trees::

    s1 = (a, b); s2 = (s1, eps)     two nested splits
    s1 = (a, b); (eps)              one split plus a singleton
    (a); (b); (eps)                 all singletons

Split aliases (``s1``) are only parse-time names.  Canonically a split is
named by joining the labels of the leaves below it with underscores, in
canonical child order: the residual ``eps`` always first, everything else
by formula position of the earliest component underneath.  Rendering a
canonical forest and parsing it back is the identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .formula import RESIDUAL, ModelSpec

_IDENT = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


class TreeError(ValueError):
    """Raised for malformed or inconsistent tree strings."""


@dataclass
class TreeNode:
    name: str
    children: tuple[str, ...] = ()
    parent: str | None = None


@dataclass
class PriorForest:
    """Canonical forest of prior trees over the components of ``spec``."""

    spec: ModelSpec
    nodes: dict[str, TreeNode]
    roots: list[str]
    aliases: dict[str, str] = field(default_factory=dict)
    declared: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def declared_children(self, name: str) -> tuple[str, ...]:
        """Children in the order the split was written, canonical names.

        Weight priors are oriented by the declared first child, so the
        original order survives canonicalization.
        """
        return self.declared.get(name, self.nodes[name].children)

    def node_kind(self, name: str) -> str:
        node = self.nodes[name]
        if node.children:
            return "tree-root" if node.parent is None else "split"
        return "singleton-root" if node.parent is None else "leaf"

    def splits(self) -> list[str]:
        """Split names in render (children before parents) order."""
        out: list[str] = []

        def visit(name: str) -> None:
            node = self.nodes[name]
            for ch in node.children:
                visit(ch)
            if node.children:
                out.append(name)

        for r in self.roots:
            visit(r)
        return out

    def leaves_under(self, name: str) -> list[str]:
        node = self.nodes[name]
        if not node.children:
            return [name]
        out: list[str] = []
        for ch in node.children:
            out.extend(self.leaves_under(ch))
        return out

    def root_of(self, name: str) -> str:
        while self.nodes[name].parent is not None:
            name = self.nodes[name].parent
        return name

    def resolve(self, name: str) -> str:
        """Map a user alias or canonical name to the canonical name."""
        if name in self.nodes:
            return name
        if name in self.aliases:
            return self.aliases[name]
        raise TreeError(f"unknown tree node {name!r}")


def _sort_key(spec: ModelSpec, leaves: list[str]) -> tuple[int, int]:
    # eps first, then earliest formula position of any leaf below.
    has_eps = any(l == RESIDUAL for l in leaves)
    pos = min(spec.position(l) for l in leaves)
    return (0 if has_eps and len(leaves) == 1 else 1, pos)


def _canonical_order(spec: ModelSpec, children: list[tuple[str, list[str]]]) -> list[int]:
    """Order child subtrees: a bare eps leaf first, then by formula position."""
    keys = []
    for i, (_, leaves) in enumerate(children):
        keys.append((_sort_key(spec, leaves), i))
    return [i for _, i in sorted(keys, key=lambda t: t[0])]


def build_forest(spec: ModelSpec, groups: dict[str, list[str]], order: list[str]) -> PriorForest:
    """Build a canonical forest from alias -> children lists.

    ``groups`` maps split aliases to child names (component labels or other
    aliases); ``order`` lists statements in input order, with singleton
    statements given as the bare component label.
    """
    labels = set(spec.component_labels())
    used: dict[str, str] = {}  # child -> alias using it

    for alias, children in groups.items():
        if alias in labels:
            raise TreeError(f"split name {alias!r} collides with a component")
        if len(children) < 2:
            raise TreeError(f"split {alias!r} needs at least two children")
        for ch in children:
            if ch in used:
                raise TreeError(f"node {ch!r} used in more than one split")
            if ch not in labels and ch not in groups:
                raise TreeError(f"unknown child {ch!r} in split {alias!r}")
            used[ch] = alias
        if len(set(children)) != len(children):
            raise TreeError(f"repeated child in split {alias!r}")

    placed = set()
    for children in groups.values():
        placed.update(c for c in children if c in labels)
    singles = [s for s in order if s in labels]
    if len(set(singles)) != len(singles):
        raise TreeError("repeated singleton statement")
    for s in singles:
        if s in placed:
            raise TreeError(f"component {s!r} is both a singleton and a split child")
    placed.update(singles)
    missing = labels - placed
    if missing:
        raise TreeError(f"components missing from the tree: {sorted(missing)}")

    # resolve each alias to its canonical subtree, bottom up
    nodes: dict[str, TreeNode] = {}
    canon: dict[str, str] = {}
    declared: dict[str, tuple[str, ...]] = {}
    resolving: set[str] = set()

    def resolve(name: str) -> tuple[str, list[str]]:
        if name in labels:
            nodes.setdefault(name, TreeNode(name=name))
            return name, [name]
        if name in canon:
            cname = canon[name]
            return cname, [l for l in _leaves(nodes, cname)]
        if name in resolving:
            raise TreeError(f"split {name!r} contains itself")
        resolving.add(name)
        resolved = [resolve(ch) for ch in groups[name]]
        idx = _canonical_order(spec, [(n, lv) for n, lv in resolved])
        ordered = [resolved[i] for i in idx]
        leaves: list[str] = []
        for _, lv in ordered:
            leaves.extend(lv)
        cname = "_".join(leaves)
        if cname in labels:
            raise TreeError(f"canonical split name {cname!r} collides with a component label")
        if cname in nodes:
            raise TreeError(f"duplicate canonical split {cname!r}")
        nodes[cname] = TreeNode(name=cname, children=tuple(n for n, _ in ordered))
        for n, _ in ordered:
            nodes[n] = replace(nodes[n], parent=cname)
        canon[name] = cname
        declared[cname] = tuple(n for n, _ in resolved)
        resolving.discard(name)
        return cname, leaves

    tops = [a for a in groups if a not in used]
    root_names = []
    for alias in order:
        if alias in groups:
            if alias in tops:
                root_names.append(resolve(alias)[0])
            else:
                resolve(alias)
        else:
            nodes.setdefault(alias, TreeNode(name=alias))
            root_names.append(alias)

    keyed = sorted(root_names, key=lambda r: _sort_key(spec, _leaves(nodes, r))[1])
    return PriorForest(
        spec=spec, nodes=nodes, roots=keyed, aliases=dict(canon), declared=declared
    )


def _leaves(nodes: dict[str, TreeNode], name: str) -> list[str]:
    node = nodes[name]
    if not node.children:
        return [name]
    out: list[str] = []
    for ch in node.children:
        out.extend(_leaves(nodes, ch))
    return out


def parse_tree(text: str, spec: ModelSpec) -> PriorForest:
    """Parse a tree string into a canonical :class:`PriorForest`."""
    groups: dict[str, list[str]] = {}
    order: list[str] = []
    for raw in text.split(";"):
        stmt = raw.strip()
        if not stmt:
            continue
        if "=" in stmt:
            alias, _, rhs = stmt.partition("=")
            alias = alias.strip()
            rhs = rhs.strip()
            if not _IDENT.match(alias):
                raise TreeError(f"invalid split name {alias!r}")
            if not (rhs.startswith("(") and rhs.endswith(")")):
                raise TreeError(f"split {alias!r} needs a parenthesized child list")
            children = [c.strip() for c in rhs[1:-1].split(",")]
            if any(not _IDENT.match(c) for c in children):
                raise TreeError(f"malformed child list in split {alias!r}")
            if alias in groups:
                raise TreeError(f"split {alias!r} defined twice")
            groups[alias] = children
            order.append(alias)
        elif stmt.startswith("(") and stmt.endswith(")"):
            label = stmt[1:-1].strip()
            if not _IDENT.match(label):
                raise TreeError(f"malformed singleton {stmt!r}")
            if label not in spec.component_labels():
                raise TreeError(f"singleton {label!r} is not a component")
            order.append(label)
        else:
            raise TreeError(f"cannot parse tree statement {stmt!r}")
    if not order:
        raise TreeError("empty tree string")
    return build_forest(spec, groups, order)


def default_forest(spec: ModelSpec) -> PriorForest:
    """One multi-split joining every component (the default tree)."""
    labels = spec.component_labels()
    if len(labels) == 1:
        return build_forest(spec, {}, [labels[0]])
    return build_forest(spec, {"s": list(labels)}, ["s"])


def render_tree(forest: PriorForest) -> str:
    """Serialize a canonical forest; inverse of :func:`parse_tree`."""
    stmts: list[str] = []

    def visit(name: str) -> None:
        node = forest.nodes[name]
        for ch in node.children:
            visit(ch)
        if node.children:
            stmts.append(f"{name} = ({','.join(node.children)})")

    for r in forest.roots:
        if forest.nodes[r].children:
            visit(r)
        else:
            stmts.append(f"({r})")
    return "; ".join(stmts)


def _regroup(forest: PriorForest) -> dict[str, list[str]]:
    """Decompose a forest back into split-name -> children groups."""
    return {
        name: list(node.children) for name, node in forest.nodes.items() if node.children
    }


def _rebuild(spec: ModelSpec, groups: dict[str, list[str]]) -> PriorForest:
    # statement order: all groups, then whatever labels are left as singletons
    in_split = {c for children in groups.values() for c in children}
    labels = spec.component_labels()
    order = list(groups.keys()) + [l for l in labels if l not in in_split]
    return build_forest(spec, groups, order)


def merge_roots(forest: PriorForest, names: list[str]) -> PriorForest:
    """Join two or more roots under a new split."""
    resolved = [forest.resolve(n) for n in names]
    if len(set(resolved)) < 2:
        raise TreeError("merging needs at least two distinct roots")
    for n in resolved:
        if forest.nodes[n].parent is not None:
            raise TreeError(f"{n!r} is not a root; detach it first")
    groups = _regroup(forest)
    alias = "m0"
    while alias in groups:
        alias += "x"
    groups[alias] = resolved
    return _rebuild(forest.spec, groups)


def detach_node(forest: PriorForest, name: str) -> PriorForest:
    """Detach a node from its parent; the node becomes a root.

    A parent left with a single child collapses into that child.
    """
    target = forest.resolve(name)
    parent = forest.nodes[target].parent
    if parent is None:
        raise TreeError(f"{target!r} is already a root")
    groups = _regroup(forest)
    groups[parent] = [c for c in groups[parent] if c != target]
    if len(groups[parent]) == 1:
        only = groups[parent][0]
        grand = forest.nodes[parent].parent
        if grand is not None:
            groups[grand] = [only if c == parent else c for c in groups[grand]]
        del groups[parent]
    return _rebuild(forest.spec, groups)


def attach_node(forest: PriorForest, name: str, split: str) -> PriorForest:
    """Attach a root as an extra child of an existing split."""
    target = forest.resolve(name)
    dest = forest.resolve(split)
    if forest.nodes[target].parent is not None:
        raise TreeError(f"{target!r} is not a root; detach it first")
    if not forest.nodes[dest].children:
        raise TreeError(f"{dest!r} is not a split")
    if dest in forest.leaves_under(target) or dest == target:
        raise TreeError("cannot attach a node inside its own subtree")
    groups = _regroup(forest)
    groups[dest].append(target)
    return _rebuild(forest.spec, groups)
