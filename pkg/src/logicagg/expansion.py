"""Tree-guided "or"-interaction expansion of a rare binary design.

For every internal node ``u`` and every subset ``S`` of its children with
``|S| >= 2`` a derived leaf is attached to ``u`` whose column is the
elementwise AND, over ``s`` in ``S``, of the OR of the leaves under ``s``.
Derived columns that are identically zero on the training design are dropped.

Columns are handled as sorted arrays of the row indices holding a one, which
is the natural representation for rare binary features.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import sparse

from .tree import FeatureTree

log = logging.getLogger(__name__)

DEFAULT_SUBSET_CAP = 4095


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class ExpandedTree:
    """Original hierarchy plus derived interaction leaves.

    Node ids ``0 .. tree.n_nodes-1`` are the native nodes (same ids as in
    ``tree``); derived nodes follow.  ``columns`` lists the leaves of the
    expanded tree in design-column order: native leaves first (in the tree's
    column order) and then the surviving derived nodes.
    """

    tree: FeatureTree
    parent: np.ndarray
    children: tuple[tuple[int, ...], ...]
    depth: np.ndarray
    subsets: dict[int, tuple[int, ...]]
    labels: tuple[str, ...]
    columns: tuple[int, ...]
    sign: np.ndarray
    dropped: tuple[tuple[int, tuple[int, ...]], ...]

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def p(self) -> int:
        return len(self.columns)

    @property
    def n_derived(self) -> int:
        return len(self.subsets)

    def is_derived(self, node: int) -> bool:
        return node in self.subsets

    def internal_nodes(self) -> list[int]:
        return [u for u in range(self.n_nodes) if self.children[u]]

    def path(self, node: int) -> list[int]:
        """``node`` followed by its ancestors up to the root."""
        out = [node]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out

    def subtree(self, node: int) -> list[int]:
        out = [node]
        i = 0
        while i < len(out):
            out.extend(self.children[out[i]])
            i += 1
        return out

    def height(self) -> int:
        return int(self.depth.max())

    def column_spec(self) -> list[dict]:
        """JSON-friendly description of every design column."""
        labels = self.tree.labels
        out = []
        for v in self.columns:
            if v in self.subsets:
                out.append({"node": self.labels[v],
                            "parent": labels[int(self.parent[v])],
                            "subset": [labels[s] for s in self.subsets[v]],
                            "sign": int(self.sign[v])})
            else:
                out.append({"node": self.labels[v], "parent": None,
                            "subset": None, "sign": 1})
        return out


@dataclass(frozen=True)
class BinaryDesign:
    """Expanded design: CSC binary matrix plus its column bookkeeping."""

    X: sparse.csc_array
    columns: tuple[int, ...]
    dropped: tuple[tuple[int, tuple[int, ...]], ...]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column_rows(self, j: int) -> np.ndarray:
        X = self.X
        return X.indices[X.indptr[j]:X.indptr[j + 1]]

    def toarray(self) -> np.ndarray:
        return self.X.toarray()


# ---------------------------------------------------------------------------


def _as_row_lists(X0) -> tuple[int, list[np.ndarray]]:
    """Validate a binary design and return per-column sorted row indices."""
    if sparse.issparse(X0):
        M = sparse.csc_array(X0)
        M.sum_duplicates()
        data = M.data
        if data.size and not np.all((data == 0) | (data == 1)):
            raise ExpansionError("design must be binary (entries 0/1)")
        M.eliminate_zeros()
        M.sort_indices()
        n = M.shape[0]
        cols = [M.indices[M.indptr[j]:M.indptr[j + 1]].astype(np.int64)
                for j in range(M.shape[1])]
        return n, cols
    A = np.asarray(X0)
    if A.ndim != 2:
        raise ExpansionError("design must be a 2-d array")
    if A.size and not np.all((A == 0) | (A == 1)):
        raise ExpansionError("design must be binary (entries 0/1)")
    n = A.shape[0]
    return n, [np.flatnonzero(A[:, j]).astype(np.int64) for j in range(A.shape[1])]


def _or_rows(tree: FeatureTree, cols: list[np.ndarray]) -> list[np.ndarray]:
    """Row-index set of the OR column of every native node, bottom-up."""
    leaf_col = tree.leaf_col
    out: list[np.ndarray | None] = [None] * tree.n_nodes
    for u in sorted(range(tree.n_nodes), key=lambda v: -tree.depth[v]):
        if not tree.children[u]:
            out[u] = cols[leaf_col[u]]
        else:
            acc = out[tree.children[u][0]]
            for c in tree.children[u][1:]:
                acc = np.union1d(acc, out[c])
            out[u] = acc
    return out


def or_column(tree: FeatureTree, X0, node) -> np.ndarray:
    """Elementwise OR of the design columns of the leaves under ``node``."""
    n, cols = _as_row_lists(X0)
    if len(cols) != tree.p0:
        raise ExpansionError(f"design has {len(cols)} columns, tree has {tree.p0} leaves")
    rows = np.zeros(0, dtype=np.int64)
    for j in tree.leaf_columns_under(node):
        rows = np.union1d(rows, cols[j])
    out = np.zeros(n, dtype=np.uint8)
    out[rows] = 1
    return out


def _subset_rows(child_rows: list[np.ndarray]):
    """Yield ``(subset, rows)`` for every child subset of size >= 2.

    Intersections are memoised on the prefix so each subset costs a single
    ``intersect1d``; an empty prefix short-circuits.
    """
    c = len(child_rows)
    memo: dict[tuple[int, ...], np.ndarray] = {(i,): child_rows[i] for i in range(c)}
    empty = np.zeros(0, dtype=np.int64)
    for size in range(2, c + 1):
        for S in combinations(range(c), size):
            prefix = memo[S[:-1]]
            rows = empty if prefix.size == 0 else np.intersect1d(
                prefix, child_rows[S[-1]], assume_unique=True)
            memo[S] = rows
            yield S, rows


def expand(tree: FeatureTree, X0, subset_cap: int = DEFAULT_SUBSET_CAP,
           drop_zero: bool = True) -> tuple[ExpandedTree, BinaryDesign]:
    """Expand ``tree`` with derived interaction leaves and build the design.

    ``X0`` holds one binary column per native leaf, in the tree's column
    order.  Native columns must not be all zero.
    """
    n, cols = _as_row_lists(X0)
    if n < 1:
        raise ExpansionError("design needs at least one row")
    if len(cols) != tree.p0:
        raise ExpansionError(f"design has {len(cols)} columns, tree has {tree.p0} leaves")
    for u in tree.internal_nodes():
        c = len(tree.children[u])
        if 2 ** c - 1 > subset_cap:
            raise ExpansionError(
                f"node {tree.labels[u]!r} has {c} children: 2^{c}-1 subsets exceed "
                f"the cap of {subset_cap}")
    zero_native = [tree.labels[v] for j, v in enumerate(tree.leaves) if cols[j].size == 0]
    if zero_native and drop_zero:
        raise ExpansionError(f"native feature columns are all zero: {zero_native[:5]}")

    or_rows = _or_rows(tree, cols)
    N0 = tree.n_nodes
    parent = list(tree.parent)
    children = [list(ch) for ch in tree.children]
    depth = list(tree.depth)
    labels = list(tree.labels)
    subsets: dict[int, tuple[int, ...]] = {}
    derived_rows: list[np.ndarray] = []
    derived_ids: list[int] = []
    dropped: list[tuple[int, tuple[int, ...]]] = []
    taken = set(labels)

    for u in range(N0):
        kids = tree.children[u]
        if len(kids) < 2:
            continue
        for S, rows in _subset_rows([or_rows[c] for c in kids]):
            members = tuple(kids[i] for i in S)
            if rows.size == 0 and drop_zero:
                dropped.append((u, members))
                continue
            v = len(labels)
            lab = "(" + ",".join(tree.labels[m] for m in members) + ")"
            if lab in taken:
                raise ExpansionError(f"derived label {lab!r} collides with a native label")
            taken.add(lab)
            labels.append(lab)
            parent.append(u)
            children.append([])
            depth.append(depth[u] + 1)
            children[u].append(v)
            subsets[v] = members
            derived_rows.append(rows)
            derived_ids.append(v)

    if dropped:
        log.info("expansion dropped %d all-zero derived columns", len(dropped))

    sign = np.ones(len(labels), dtype=np.int8)
    for v, S in subsets.items():
        sign[v] = 1 if len(S) % 2 == 1 else -1

    columns = tuple(tree.leaves) + tuple(derived_ids)
    col_rows = list(cols) + derived_rows
    indptr = np.zeros(len(col_rows) + 1, dtype=np.int64)
    np.cumsum([r.size for r in col_rows], out=indptr[1:])
    indices = np.concatenate(col_rows) if col_rows else np.zeros(0, dtype=np.int64)
    X = sparse.csc_array((np.ones(indices.size), indices, indptr), shape=(n, len(col_rows)))

    expanded = ExpandedTree(
        tree=tree,
        parent=np.asarray(parent, dtype=np.int64),
        children=tuple(tuple(ch) for ch in children),
        depth=np.asarray(depth, dtype=np.int64),
        subsets=subsets,
        labels=tuple(labels),
        columns=columns,
        sign=sign,
        dropped=tuple(dropped),
    )
    return expanded, BinaryDesign(X=X, columns=columns, dropped=tuple(dropped))


def design_for(expanded: ExpandedTree, X0) -> sparse.csc_array:
    """Rebuild the expanded design for new rows using the fitted columns.

    Columns dropped at expansion time stay absent, so the result always has
    ``expanded.p`` columns aligned with the fitted coefficients.
    """
    tree = expanded.tree
    n, cols = _as_row_lists(X0)
    if len(cols) != tree.p0:
        raise ExpansionError(f"design has {len(cols)} columns, tree has {tree.p0} leaves")
    or_rows = _or_rows(tree, cols)
    col_rows = []
    for v in expanded.columns:
        if v in expanded.subsets:
            members = expanded.subsets[v]
            rows = or_rows[members[0]]
            for m in members[1:]:
                rows = np.intersect1d(rows, or_rows[m], assume_unique=True)
            col_rows.append(rows)
        else:
            col_rows.append(or_rows[v])
    indptr = np.zeros(len(col_rows) + 1, dtype=np.int64)
    np.cumsum([r.size for r in col_rows], out=indptr[1:])
    indices = np.concatenate(col_rows) if col_rows else np.zeros(0, dtype=np.int64)
    return sparse.csc_array((np.ones(indices.size), indices, indptr), shape=(n, len(col_rows)))


def from_column_spec(tree: FeatureTree, spec: list[dict]) -> ExpandedTree:
    """Rebuild an :class:`ExpandedTree` from :meth:`ExpandedTree.column_spec` output."""
    native = [c for c in spec if c["subset"] is None]
    if [c["node"] for c in native] != [tree.labels[v] for v in tree.leaves]:
        raise ExpansionError("column spec does not match the tree's leaves")
    parent = list(tree.parent)
    children = [list(ch) for ch in tree.children]
    depth = list(tree.depth)
    labels = list(tree.labels)
    subsets: dict[int, tuple[int, ...]] = {}
    derived = []
    for c in spec[len(native):]:
        if c["subset"] is None:
            raise ExpansionError("native columns must precede derived ones")
        u = tree.node_id(c["parent"])
        members = tuple(tree.node_id(s) for s in c["subset"])
        if len(members) < 2 or any(tree.parent[m] != u for m in members):
            raise ExpansionError(f"invalid derived column {c['node']!r}")
        v = len(labels)
        labels.append(c["node"])
        parent.append(u)
        children.append([])
        depth.append(depth[u] + 1)
        children[u].append(v)
        subsets[v] = members
        derived.append(v)
    sign = np.ones(len(labels), dtype=np.int8)
    for v, S in subsets.items():
        sign[v] = 1 if len(S) % 2 == 1 else -1
    return ExpandedTree(tree=tree, parent=np.asarray(parent, dtype=np.int64),
                        children=tuple(tuple(ch) for ch in children),
                        depth=np.asarray(depth, dtype=np.int64), subsets=subsets,
                        labels=tuple(labels), columns=tuple(tree.leaves) + tuple(derived),
                        sign=sign, dropped=())
