import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_design, random_tree, tree_seeds
from logicagg.expansion import expand, or_column
from logicagg.reparam import (build_A, build_dual_matrices, build_feature_weights,
                              build_groups, build_reparam)
from logicagg.tree import from_nested


def _fig2_full(fig2):
    ex, des = expand(fig2, np.ones((4, 5), dtype=np.uint8))
    return ex, des


def _row(ex, A, label):
    j = ex.columns.index(ex.labels.index(label))
    row = A.toarray()[j]
    return {ex.labels[u]: row[u] for u in np.flatnonzero(row)}


def test_A_rows_fig2(fig2):
    ex, _ = _fig2_full(fig2)
    A = build_A(ex)
    assert _row(ex, A, "x4") == {"x4": 1, "u2^1": 1, "u1^0": 1}
    assert _row(ex, A, "(x4,x5)") == {"(x4,x5)": -1, "u2^1": -1, "u1^0": -1}
    assert _row(ex, A, "(x1,x2,x3)") == {"(x1,x2,x3)": 1, "u1^1": 1, "u1^0": 1}


def test_A_one_leaf_tree():
    t = from_nested({"label": "r", "children": [{"label": "x"}]})
    ex, _ = expand(t, np.ones((3, 1)))
    np.testing.assert_array_equal(build_A(ex).toarray(), [[1, 1]])


def test_groups_fig2(fig2):
    ex, _ = _fig2_full(fig2)
    g = build_groups(ex, k=3)
    u21 = ex.labels.index("u2^1")
    gi = g.owner.index(u21)
    assert sorted(ex.labels[v] for v in g.members[gi]) == ["(x4,x5)", "x4", "x5"]
    assert g.weights[gi] == pytest.approx(np.sqrt(3 / 7))
    assert g.owner[0] == -1 and list(g.members[0]) == [0]
    assert g.weights[0] == pytest.approx(np.sqrt(1 / 7))
    assert g.sizes.sum() == ex.n_nodes
    assert sorted(np.concatenate(g.members).tolist()) == list(range(ex.n_nodes))


def test_feature_weights():
    X = np.zeros((200, 3))
    X[:, 0] = 1
    X[:20, 1] = 1
    X[:20, 2] = 1
    w = build_feature_weights(X)
    assert w[0] == 1.0
    assert w[1] == pytest.approx(0.31622776601683794)
    assert w[1] == w[2]
    with pytest.raises(ValueError, match="zero columns"):
        build_feature_weights(np.zeros((5, 2)))


def test_dual_matrices_extremes(fig2):
    X0 = random_design(fig2, 30, 1)
    ex, des = expand(fig2, X0)
    rmap = build_reparam(ex, des.X)
    d1 = build_dual_matrices(rmap, 0.7, 1.0)
    assert d1.C1.count_nonzero() == 0 and d1.norm_C1 == 0
    d0 = build_dual_matrices(rmap, 0.7, 0.0)
    assert not d0.c2_scale.any() and d0.norm_C2 == 0
    with pytest.raises(ValueError):
        build_dual_matrices(rmap, -1.0, 0.5)
    with pytest.raises(ValueError):
        build_dual_matrices(rmap, 1.0, 1.5)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
def test_dual_norms_vs_dense_svd(fig2, alpha):
    X0 = random_design(fig2, 30, 2)
    ex, des = expand(fig2, X0)
    rmap = build_reparam(ex, des.X)
    d = build_dual_matrices(rmap, 0.8, alpha)
    s1 = np.linalg.norm(d.C1.toarray(), 2) if alpha < 1 else 0.0
    s2 = np.linalg.norm(d.C2().toarray(), 2)
    assert d.norm_C1 == pytest.approx(s1, rel=1e-6, abs=1e-12)
    assert d.norm_C2 == pytest.approx(s2, rel=1e-12, abs=1e-12)
    assert d.norm_C2 == pytest.approx(0.8 * alpha * rmap.groups.weights.max())


@given(tree_seeds, st.floats(0.0, 1.0), st.floats(0.01, 10.0))
def test_penalty_dual_identity(seed, alpha, lam):
    tree = random_tree(seed)
    X0 = random_design(tree, 20, seed)
    ex, des = expand(tree, X0)
    rmap = build_reparam(ex, des.X)
    d = build_dual_matrices(rmap, lam, alpha)
    gamma = np.random.default_rng(seed).normal(size=ex.n_nodes)
    primal = (lam * (1 - alpha) * np.abs(rmap.DA @ gamma).sum()
              + lam * alpha * sum(w * np.linalg.norm(gamma[m])
                                  for m, w in zip(rmap.groups.members, rmap.groups.weights)))
    v1 = d.C1 @ gamma
    v2 = d.C2() @ gamma
    ptr, _ = rmap.groups.flat
    eta2 = np.concatenate([v2[a:b] / max(np.linalg.norm(v2[a:b]), 1e-300)
                           for a, b in zip(ptr[:-1], ptr[1:])])
    dual = np.sign(v1) @ v1 + eta2 @ v2
    assert dual == pytest.approx(primal, rel=1e-10, abs=1e-12)


@given(tree_seeds)
def test_A_nonzeros_per_row(seed):
    tree = random_tree(seed)
    ex, _ = expand(tree, random_design(tree, 20, seed))
    A = build_A(ex)
    nnz = np.diff(A.indptr)
    for j, v in enumerate(ex.columns):
        assert nnz[j] == ex.depth[v] + 1


@given(tree_seeds, st.integers(0, 1000))
def test_equisparsity_collapse(seed, pick):
    tree = random_tree(seed)
    X0 = random_design(tree, 30, seed)
    ex, des = expand(tree, X0)
    A = build_A(ex)
    internal = tree.internal_nodes()
    u = internal[pick % len(internal)]
    sub = set(ex.subtree(u)) - {u}
    gamma = np.random.default_rng(pick).normal(size=ex.n_nodes)
    gamma[list(sub)] = 0.0
    beta = A @ gamma
    full = des.X @ beta
    X = des.toarray()
    keep = [j for j, v in enumerate(ex.columns) if v not in sub]
    coef_u = sum(gamma[a] for a in ex.path(u))
    reduced = X[:, keep] @ beta[keep] + or_column(tree, X0, u) * coef_u
    np.testing.assert_allclose(full, reduced, rtol=0, atol=1e-10)
