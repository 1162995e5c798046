"""Node-coefficient reparameterization and the group structure on it.

Each node ``u`` of the expanded tree gets a coefficient ``gamma_u``; the
coefficient of a leaf column is the signed sum of ``gamma`` along its path to
the root, ``beta = A @ gamma``.  Groups are the root singleton plus the child
set of every internal node, so they partition the nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .expansion import ExpandedTree
from .linalg import spectral_norm


def build_A(expanded: ExpandedTree) -> sparse.csr_array:
    """Signed ancestor-path indicator matrix, one row per design column."""
    rows, cols, vals = [], [], []
    for j, v in enumerate(expanded.columns):
        s = float(expanded.sign[v])
        for u in expanded.path(v):
            rows.append(j)
            cols.append(u)
            vals.append(s)
    A = sparse.csr_array((vals, (rows, cols)), shape=(expanded.p, expanded.n_nodes))
    A.sort_indices()
    return A


@dataclass(frozen=True)
class Groups:
    members: tuple[np.ndarray, ...]
    weights: np.ndarray
    owner: tuple[int, ...]  # internal node whose child set forms the group; -1 for root singleton

    @property
    def sizes(self) -> np.ndarray:
        return np.array([m.size for m in self.members], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.members)

    @cached_property
    def group_of(self) -> np.ndarray:
        n = sum(m.size for m in self.members)
        out = np.empty(n, dtype=np.int64)
        for g, m in enumerate(self.members):
            out[m] = g
        return out

    @cached_property
    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR-style ``(ptr, nodes)`` layout for the kernels."""
        ptr = np.zeros(len(self.members) + 1, dtype=np.int64)
        np.cumsum(self.sizes, out=ptr[1:])
        return ptr, np.concatenate(self.members).astype(np.int64)

    def norms(self, gamma: np.ndarray) -> np.ndarray:
        return np.array([np.linalg.norm(gamma[m]) for m in self.members])


def build_groups(expanded: ExpandedTree, k: int | None = None) -> Groups:
    """Root singleton plus one group per internal node's (surviving) children.

    ``k`` is the maximum child count of the *original* tree; the weight of a
    group of size ``p_g`` is ``sqrt(p_g / (2**k - 1))``.
    """
    if k is None:
        k = expanded.tree.stats()[2]
    denom = 2.0 ** max(k, 1) - 1.0
    members = [np.array([0], dtype=np.int64)]
    owner = [-1]
    for u in expanded.internal_nodes():
        members.append(np.asarray(expanded.children[u], dtype=np.int64))
        owner.append(u)
    sizes = np.array([m.size for m in members], dtype=float)
    return Groups(members=tuple(members), weights=np.sqrt(sizes / denom), owner=tuple(owner))


def build_feature_weights(X) -> np.ndarray:
    """``sqrt(m_j / n)`` with ``m_j`` the number of ones in column ``j``."""
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty design")
    counts = np.asarray(abs(X).sum(axis=0)).ravel() if sparse.issparse(X) else \
        np.abs(np.asarray(X)).sum(axis=0)
    if np.any(counts == 0):
        raise ValueError(f"zero columns in design: {np.flatnonzero(counts == 0)[:5].tolist()}")
    return np.sqrt(counts / n)


@dataclass(frozen=True)
class ReparamMap:
    A: sparse.csr_array
    feature_weights: np.ndarray
    groups: Groups
    k: int
    expanded: ExpandedTree = field(repr=False)

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.A.shape[1]

    @cached_property
    def DA(self) -> sparse.csr_array:
        return sparse.csr_array(sparse.diags_array(self.feature_weights) @ self.A)

    @cached_property
    def norm_DA(self) -> float:
        return spectral_norm(self.DA)

    def duals(self, lam: float, alpha: float) -> "DualMatrices":
        return build_dual_matrices(self, lam, alpha)


def build_reparam(expanded: ExpandedTree, X, k: int | None = None) -> ReparamMap:
    if k is None:
        k = expanded.tree.stats()[2]
    return ReparamMap(A=build_A(expanded), feature_weights=build_feature_weights(X),
                      groups=build_groups(expanded, k), k=k, expanded=expanded)


@dataclass(frozen=True)
class DualMatrices:
    """Scaled operators of the two penalty terms.

    ``C1 = lam*(1-alpha) * D @ A``.  The group operator is block diagonal with
    ``lam*alpha*w_g`` on each node of group ``g``; it is kept as the per-node
    scale ``c2_scale`` and never materialized unless asked for.
    """

    C1: sparse.csr_array
    c1_row_scale: np.ndarray
    c2_scale: np.ndarray
    groups: Groups
    norm_C1: float
    norm_C2: float
    lam: float
    alpha: float

    def C2(self) -> sparse.csr_array:
        ptr, nodes = self.groups.flat
        m = self.c2_scale.size
        return sparse.csr_array((self.c2_scale[nodes], (np.arange(nodes.size), nodes)),
                                shape=(nodes.size, m))


def build_dual_matrices(rmap: ReparamMap, lam: float, alpha: float) -> DualMatrices:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    s1 = lam * (1.0 - alpha)
    row_scale = s1 * rmap.feature_weights
    C1 = sparse.csr_array(sparse.diags_array(row_scale) @ rmap.A)
    g = rmap.groups
    c2_scale = lam * alpha * g.weights[g.group_of]
    return DualMatrices(
        C1=C1,
        c1_row_scale=row_scale,
        c2_scale=c2_scale,
        groups=g,
        norm_C1=s1 * rmap.norm_DA,
        norm_C2=lam * alpha * float(g.weights.max()),
        lam=float(lam),
        alpha=float(alpha),
    )
