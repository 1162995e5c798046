"""From fitted node coefficients to selected groups and "or"-aggregation blocks."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .expansion import ExpandedTree
from .reparam import Groups
from .tree import FeatureTree


def select_groups(gamma: np.ndarray, groups: Groups) -> list[int]:
    """Groups whose share of ``sum_g w_g ||gamma_g||`` exceeds ``1/|G|``."""
    m = groups.weights * groups.norms(np.asarray(gamma, dtype=float))
    total = float(m.sum())
    if total == 0.0:
        return []
    share = m / total
    return [g for g in range(len(groups)) if share[g] > 1.0 / len(groups)]


@dataclass(frozen=True)
class Block:
    node: int
    leaves: tuple[int, ...]  # native leaf ids, in column order
    coefficient: float
    dropped: bool


@dataclass(frozen=True)
class AggregationPattern:
    selected_groups: tuple[int, ...]
    blocks: tuple[Block, ...]

    def to_dict(self, tree: FeatureTree) -> dict:
        lab = tree.labels
        return {
            "selected_groups": list(self.selected_groups),
            "blocks": [{"node": lab[b.node], "leaves": [lab[v] for v in b.leaves],
                        "coefficient": b.coefficient, "dropped": b.dropped}
                       for b in self.blocks],
        }

    @classmethod
    def from_dict(cls, d: dict, tree: FeatureTree) -> "AggregationPattern":
        blocks = []
        for b in d["blocks"]:
            blocks.append(Block(node=tree.node_id(b["node"]),
                                leaves=tuple(tree.node_id(v) for v in b["leaves"]),
                                coefficient=float(b["coefficient"]), dropped=bool(b["dropped"])))
        return cls(selected_groups=tuple(int(g) for g in d.get("selected_groups", [])),
                   blocks=tuple(blocks))

    def nodes(self) -> set[int]:
        return {b.node for b in self.blocks}


def _ordered_leaves(tree: FeatureTree, node: int) -> tuple[int, ...]:
    col = tree.leaf_col
    return tuple(sorted(tree.leaves_under(node), key=col.__getitem__))


def aggregation_pattern(selected: list[int] | set[int], expanded: ExpandedTree,
                        gamma: np.ndarray, groups: Groups) -> AggregationPattern:
    """Collapse the native tree wherever every group below a node is unselected.

    Unselected groups are zeroed first.  Walking down from the root, a node
    collapses into one block when no group owned by it or by any internal
    node beneath it is selected; native leaves always end a walk.  A block's
    coefficient is the sum of the surviving coefficients on the path from
    the root to the block node.
    """
    tree = expanded.tree
    sel = set(int(g) for g in selected)
    gamma_t = np.zeros_like(np.asarray(gamma, dtype=float))
    for g in sel:
        m = groups.members[g]
        gamma_t[m] = gamma[m]
    owned = {u: g for g, u in enumerate(groups.owner) if u >= 0}
    # does the subtree rooted at native node u own a selected group?
    active = {}
    for u in sorted(range(tree.n_nodes), key=lambda v: -tree.depth[v]):
        a = owned.get(u) in sel if u in owned else False
        active[u] = a or any(active[c] for c in tree.children[u])
    blocks = []
    stack = [(0, 0.0)]
    while stack:
        u, above = stack.pop()
        coef = above + float(gamma_t[u])
        if not tree.children[u] or not active[u]:
            blocks.append(Block(node=u, leaves=_ordered_leaves(tree, u),
                                coefficient=coef, dropped=coef == 0.0))
            continue
        for c in reversed(tree.children[u]):
            stack.append((c, coef))
    col = tree.leaf_col
    blocks.sort(key=lambda b: col[b.leaves[0]])
    return AggregationPattern(selected_groups=tuple(sorted(sel)), blocks=tuple(blocks))


def coarsest_aggregation_set(beta: np.ndarray, tree: FeatureTree) -> list[int]:
    """Coarsest node set whose leaf sets partition the leaves with constant ``beta``.

    ``beta`` is indexed by leaf column.  A node is uniform when every leaf
    under it carries the same value; the result is the set of uniform nodes
    whose parent is not uniform (or the root, when everything is equal).
    Returned in column order of each block's first leaf.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (tree.p0,):
        raise ValueError(f"beta must have length {tree.p0}")
    col = tree.leaf_col
    value: dict[int, float | None] = {}
    for u in sorted(range(tree.n_nodes), key=lambda v: -tree.depth[v]):
        if not tree.children[u]:
            value[u] = float(beta[col[u]])
            continue
        vals = {value[c] for c in tree.children[u]}
        value[u] = vals.pop() if len(vals) == 1 and None not in vals else None
    out = []
    stack = [0]
    while stack:
        u = stack.pop()
        if value[u] is not None:
            out.append(u)
        else:
            stack.extend(tree.children[u])
    first = {u: min(col[v] for v in tree.leaves_under(u)) for u in out}
    return sorted(out, key=first.__getitem__)


def block_constant_beta(beta: np.ndarray, tree: FeatureTree, nodes: list[int]) -> np.ndarray:
    """Leaf coefficients with every block replaced by its first leaf's value."""
    out = np.asarray(beta, dtype=float).copy()
    col = tree.leaf_col
    for u in nodes:
        cols = [col[v] for v in tree.leaves_under(u)]
        out[cols] = out[min(cols)]
    return out


def truth_gamma(expanded: ExpandedTree, beta_leaves: np.ndarray) -> np.ndarray:
    """Node coefficients of a block model: ``gamma_u = beta`` on coarsest-set nodes.

    All other entries (including every derived node) are zero, so
    ``A @ gamma`` reproduces ``beta`` on native leaves and the matching signed
    value on derived leaves inside a block.
    """
    tree = expanded.tree
    gamma = np.zeros(expanded.n_nodes)
    col = tree.leaf_col
    for u in coarsest_aggregation_set(beta_leaves, tree):
        leaf = next(iter(tree.leaves_under(u)))
        gamma[u] = beta_leaves[col[leaf]]
    return gamma


def true_groups(gamma_true: np.ndarray, groups: Groups) -> list[int]:
    return [g for g in range(len(groups)) if np.any(gamma_true[groups.members[g]] != 0)]


def aggregate_design(X0, pattern: AggregationPattern, tree: FeatureTree,
                     keep_dropped: bool = False) -> np.ndarray:
    """One OR column per (non-dropped) block, in block order."""
    X0 = np.asarray(X0.toarray() if hasattr(X0, "toarray") else X0)
    col = tree.leaf_col
    cols = []
    for b in pattern.blocks:
        if b.dropped and not keep_dropped:
            continue
        idx = [col[v] for v in b.leaves]
        cols.append(X0[:, idx].max(axis=1))
    if not cols:
        return np.zeros((X0.shape[0], 0), dtype=X0.dtype)
    return np.column_stack(cols)


def block_coefficients(pattern: AggregationPattern, keep_dropped: bool = False) -> np.ndarray:
    return np.array([b.coefficient for b in pattern.blocks if keep_dropped or not b.dropped])


# ---------------------------------------------------------------------------
# Graphviz export


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(tree: FeatureTree, pattern: AggregationPattern, name: str = "aggregation") -> str:
    """Deterministic DOT rendering of an aggregation pattern.

    Leaves kept on their own are solid, leaves merged into a larger block are
    open circles reached by dashed edges, and leaves of dropped blocks carry a
    cross.  The pattern itself is embedded in ``// block`` comment lines so
    that :func:`pattern_from_dot` can recover it.
    """
    lab = tree.labels
    leaf_state = {}
    below = set()
    for b in pattern.blocks:
        merged = len(b.leaves) > 1 or tree.children[b.node]
        for v in b.leaves:
            leaf_state[v] = "dropped" if b.dropped else ("merged" if merged else "solo")
        if tree.children[b.node]:
            below |= tree.descendants(b.node)
    lines = [f"digraph {_q(name)} {{", "  rankdir=TB;", "  node [fontname=Helvetica];"]
    groups = ",".join(str(g) for g in pattern.selected_groups)
    lines.append(f"  // selected {groups}")
    for b in pattern.blocks:
        leaves = ",".join(lab[v] for v in b.leaves)
        lines.append(f"  // block node={lab[b.node]} coef={b.coefficient!r} "
                     f"dropped={int(b.dropped)} leaves={leaves}")
    block_nodes = pattern.nodes()
    for u in range(tree.n_nodes):
        attrs = []
        if tree.children[u]:
            attrs.append("shape=box")
            if u in block_nodes:
                attrs.append("style=bold")
        else:
            state = leaf_state.get(u, "solo")
            if state == "solo":
                attrs += ["shape=circle", "style=filled", "fillcolor=black", "fontcolor=white"]
            elif state == "merged":
                attrs += ["shape=circle", "style=solid"]
            else:
                attrs += ["shape=circle", "style=dashed", 'xlabel="x"']
        lines.append(f"  {_q(lab[u])} [{', '.join(attrs)}];")
    for u in range(1, tree.n_nodes):
        style = " [style=dashed]" if u in below else ""
        lines.append(f"  {_q(lab[tree.parent[u]])} -> {_q(lab[u])}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"


_BLOCK_RE = re.compile(r"//\s*block node=(\S+) coef=(\S+) dropped=([01]) leaves=(\S*)")


def pattern_from_dot(text: str, tree: FeatureTree) -> AggregationPattern:
    """Recover the pattern embedded by :func:`export_dot`."""
    selected: tuple[int, ...] = ()
    blocks = []
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("// selected"):
            rest = s[len("// selected"):].strip()
            selected = tuple(int(g) for g in rest.split(",") if g)
            continue
        m = _BLOCK_RE.match(s)
        if m:
            leaves = tuple(tree.node_id(v) for v in m.group(4).split(",") if v)
            blocks.append(Block(node=tree.node_id(m.group(1)), leaves=leaves,
                                coefficient=float(m.group(2)), dropped=m.group(3) == "1"))
    return AggregationPattern(selected_groups=selected, blocks=tuple(blocks))
