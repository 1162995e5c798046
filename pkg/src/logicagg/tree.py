"""Feature hierarchy: parsing, serialization and structural queries.

Two input formats are accepted:

* nested JSON ``{"label": str, "children": [node, ...]}``; internal labels
  may be omitted and are then auto-named ``n<k>``;
* a UTF-8 TSV edge list with one ``child<TAB>parent`` pair per line and no
  header.  A line holding a single label declares a parentless node, which
  is how a one-node tree is written.

Nodes are numbered in preorder (root = 0).  Leaf column order is the order in
which leaf labels first appear in the input, which fixes how leaves bind to
data columns.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class TreeError(ValueError):
    """Malformed or inconsistent feature hierarchy."""


@dataclass(frozen=True)
class FeatureTree:
    labels: tuple[str, ...]
    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    leaves: tuple[int, ...]
    depth: tuple[int, ...] = field(init=False, compare=False)
    _index: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        n = len(self.labels)
        if not (len(self.parent) == len(self.children) == n) or n == 0:
            raise TreeError("inconsistent node arrays")
        index = {}
        for i, lab in enumerate(self.labels):
            if lab in index:
                raise TreeError(f"duplicate node label {lab!r}")
            index[lab] = i
        roots = [i for i, p in enumerate(self.parent) if p < 0]
        if roots != [0]:
            raise TreeError("node 0 must be the unique root")
        depth = [-1] * n
        depth[0] = 0
        seen = 1
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for c in self.children[u]:
                if self.parent[c] != u or depth[c] >= 0:
                    raise TreeError("parent/children links disagree")
                depth[c] = depth[u] + 1
                seen += 1
                queue.append(c)
        if seen != n:
            raise TreeError("tree is not connected")
        leaf_set = {i for i in range(n) if not self.children[i]}
        if set(self.leaves) != leaf_set or len(self.leaves) != len(leaf_set):
            raise TreeError("leaf order must list every leaf exactly once")
        object.__setattr__(self, "depth", tuple(depth))
        object.__setattr__(self, "_index", index)

    # -- basic accessors -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def p0(self) -> int:
        return len(self.leaves)

    @property
    def root(self) -> int:
        return 0

    @property
    def leaf_col(self) -> dict[int, int]:
        return {leaf: j for j, leaf in enumerate(self.leaves)}

    def is_leaf(self, node) -> bool:
        return not self.children[self.node_id(node)]

    def internal_nodes(self) -> list[int]:
        return [u for u in range(self.n_nodes) if self.children[u]]

    def node_id(self, node) -> int:
        if isinstance(node, str):
            try:
                return self._index[node]
            except KeyError:
                raise KeyError(f"unknown node {node!r}") from None
        node = int(node)
        if not 0 <= node < self.n_nodes:
            raise KeyError(f"unknown node id {node}")
        return node

    # -- closures --------------------------------------------------------

    def ancestors(self, node) -> list[int]:
        """Path from the parent of ``node`` up to the root (node excluded)."""
        u = self.node_id(node)
        path = []
        while self.parent[u] >= 0:
            u = self.parent[u]
            path.append(u)
        return path

    def descendants(self, node) -> set[int]:
        u = self.node_id(node)
        out: set[int] = set()
        stack = list(self.children[u])
        while stack:
            v = stack.pop()
            out.add(v)
            stack.extend(self.children[v])
        return out

    def leaves_under(self, node) -> set[int]:
        u = self.node_id(node)
        if not self.children[u]:
            return {u}
        return {v for v in self.descendants(u) if not self.children[v]}

    def leaf_columns_under(self, node) -> list[int]:
        """Data-column indices of the leaves under ``node``, sorted."""
        col = self.leaf_col
        return sorted(col[v] for v in self.leaves_under(node))

    def stats(self) -> tuple[int, int, int]:
        return tree_stats(self)

    # -- binding ---------------------------------------------------------

    def bind_columns(self, header: Sequence[str]) -> list[int]:
        """Index of each leaf (in column order) within a data header."""
        pos = {name: i for i, name in enumerate(header)}
        missing = [self.labels[v] for v in self.leaves if self.labels[v] not in pos]
        if missing:
            raise TreeError(f"leaf labels absent from data header: {missing[:5]}")
        return [pos[self.labels[v]] for v in self.leaves]

    def digest(self) -> str:
        return hashlib.sha256(to_json(self).encode("utf-8")).hexdigest()[:16]


def tree_stats(tree: FeatureTree) -> tuple[int, int, int]:
    """Return ``(p0, height, max children)``."""
    k = max((len(c) for c in tree.children), default=0)
    return tree.p0, max(tree.depth), k


# ---------------------------------------------------------------------------
# construction


def _build(labels: list[str], parent: list[int], children: list[list[int]],
           root: int, leaf_order: list[int]) -> FeatureTree:
    """Renumber arbitrary node ids to preorder and freeze."""
    order = []
    stack = [root]
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(reversed(children[u]))
    if len(order) != len(labels):
        raise TreeError("tree is not connected (cycle or orphan nodes)")
    new = {old: i for i, old in enumerate(order)}
    return FeatureTree(
        labels=tuple(labels[u] for u in order),
        parent=tuple(-1 if u == root else new[parent[u]] for u in order),
        children=tuple(tuple(new[c] for c in children[u]) for u in order),
        leaves=tuple(new[u] for u in leaf_order),
    )


def from_nested(obj: dict) -> FeatureTree:
    """Build a tree from a nested ``{"label", "children"}`` mapping.

    An optional top-level ``"leaf_order"`` list of labels overrides the
    default (preorder) column order.
    """
    labels: list[str | None] = []
    parent: list[int] = []
    children: list[list[int]] = []
    stack = [(obj, -1)]
    while stack:
        node, par = stack.pop()
        if not isinstance(node, dict):
            raise TreeError("every tree node must be a JSON object")
        i = len(labels)
        lab = node.get("label")
        labels.append(None if lab is None else str(lab))
        parent.append(par)
        children.append([])
        if par >= 0:
            children[par].append(i)
        kids = node.get("children") or []
        for kid in reversed(kids):
            stack.append((kid, i))
    # ids are preorder: children are pushed reversed
    taken = {lab for lab in labels if lab is not None}
    k = 0
    for i, lab in enumerate(labels):
        if lab is None:
            while f"n{k}" in taken:
                k += 1
            labels[i] = f"n{k}"
            taken.add(labels[i])
    leaf_order = [i for i in range(len(labels)) if not children[i]]
    if obj.get("leaf_order") is not None:
        pos = {lab: i for i, lab in enumerate(labels)}
        try:
            leaf_order = [pos[str(lab)] for lab in obj["leaf_order"]]
        except KeyError as exc:
            raise TreeError(f"leaf_order names unknown node {exc}") from None
    return _build(labels, parent, children, 0, leaf_order)


def parse_json(text: str) -> FeatureTree:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeError(f"invalid tree JSON: {exc}") from None
    return from_nested(obj)


def parse_edges(text: str) -> FeatureTree:
    """Parse a ``child<TAB>parent`` edge list."""
    ids: dict[str, int] = {}
    labels: list[str] = []
    parent: list[int] = []
    children: list[list[int]] = []

    def get(lab: str) -> int:
        if lab not in ids:
            ids[lab] = len(labels)
            labels.append(lab)
            parent.append(-1)
            children.append([])
        return ids[lab]

    has_parent: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split("\t")]
        fields = [f for f in fields if f]
        if len(fields) == 1:
            get(fields[0])
            continue
        if len(fields) != 2:
            raise TreeError(f"line {lineno}: expected 'child<TAB>parent'")
        c, p = get(fields[0]), get(fields[1])
        if c == p:
            raise TreeError(f"line {lineno}: node {fields[0]!r} is its own parent (cycle)")
        if c in has_parent:
            if parent[c] == p:
                raise TreeError(f"line {lineno}: duplicate edge for {fields[0]!r}")
            raise TreeError(f"line {lineno}: duplicate node label {fields[0]!r} "
                            "(appears under two parents)")
        has_parent.add(c)
        parent[c] = p
        children[p].append(c)
    if not labels:
        raise TreeError("empty tree")
    roots = [i for i in range(len(labels)) if i not in has_parent]
    if not roots:
        raise TreeError("cycle detected: every node has a parent")
    if len(roots) > 1:
        raise TreeError(f"multiple roots: {[labels[r] for r in roots][:5]}")
    root = roots[0]
    # nodes unreachable from the root can only sit on a cycle
    reach = {root}
    stack = [root]
    while stack:
        for c in children[stack.pop()]:
            reach.add(c)
            stack.append(c)
    if len(reach) != len(labels):
        bad = sorted(set(range(len(labels))) - reach)
        raise TreeError(f"cycle detected among {[labels[b] for b in bad][:5]}")
    leaf_order = [i for i in range(len(labels)) if not children[i]]
    return _build(labels, parent, children, root, leaf_order)


def parse_tree(text: str) -> FeatureTree:
    """Parse tree-file content, sniffing JSON versus edge list."""
    if text.lstrip().startswith("{"):
        return parse_json(text)
    return parse_edges(text)


def load_tree(path) -> FeatureTree:
    with open(path, encoding="utf-8") as fh:
        return parse_tree(fh.read())


# ---------------------------------------------------------------------------
# serialization


def to_nested(tree: FeatureTree, node: int = 0) -> dict:
    out = {"label": tree.labels[node]}
    if tree.children[node]:
        out["children"] = [to_nested(tree, c) for c in tree.children[node]]
    return out


def to_json(tree: FeatureTree, indent: int | None = None) -> str:
    """Canonical JSON form (children in stored order)."""
    obj = to_nested(tree)
    if tree.leaves != tuple(u for u in range(tree.n_nodes) if not tree.children[u]):
        obj["leaf_order"] = [tree.labels[v] for v in tree.leaves]
    return json.dumps(obj, indent=indent)


def to_edges(tree: FeatureTree) -> str:
    """Edge-list form whose re-parse reproduces ``tree`` exactly.

    Line order must keep every sibling list in order and list leaves in
    column order; both constraints are chains, merged here topologically.
    """
    if tree.n_nodes == 1:
        return tree.labels[0] + "\n"
    after: dict[int, list[int]] = {u: [] for u in range(1, tree.n_nodes)}
    indeg = {u: 0 for u in range(1, tree.n_nodes)}

    def chain(seq: Iterable[int]):
        seq = list(seq)
        for a, b in zip(seq, seq[1:]):
            after[a].append(b)
            indeg[b] += 1

    for u in range(tree.n_nodes):
        chain(tree.children[u])
    chain(tree.leaves)
    ready = [u for u, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    lines = []
    while ready:
        u = heapq.heappop(ready)
        lines.append(f"{tree.labels[u]}\t{tree.labels[tree.parent[u]]}")
        for v in after[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    if len(lines) != tree.n_nodes - 1:
        raise TreeError("sibling order and leaf order are incompatible")
    return "\n".join(lines) + "\n"


def from_parent_map(edges: Sequence[tuple[str, str]], root: str | None = None) -> FeatureTree:
    """Convenience constructor from ``(child, parent)`` label pairs."""
    lines = [f"{c}\t{p}" for c, p in edges]
    if root is not None and not edges:
        lines = [root]
    return parse_edges("\n".join(lines))
