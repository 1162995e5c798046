import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from logicagg.tree import from_nested

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIG2_EDGES = "x1\tu1^1\nx2\tu1^1\nx3\tu1^1\nx4\tu2^1\nx5\tu2^1\nu1^1\tu1^0\nu2^1\tu1^0\n"


def fig2_tree():
    """Five leaves, depth two: {x1,x2,x3} and {x4,x5} under the root."""
    return from_nested({"label": "u1^0", "children": [
        {"label": "u1^1", "children": [{"label": "x1"}, {"label": "x2"}, {"label": "x3"}]},
        {"label": "u2^1", "children": [{"label": "x4"}, {"label": "x5"}]},
    ]})


@pytest.fixture
def fig2():
    return fig2_tree()


def random_nested(rng, max_depth=3, max_children=3, p_leaf=0.35, _depth=0, _count=None):
    """Random labelled nested tree with at least two leaves under any internal node."""
    if _count is None:
        _count = [0]
    if _depth >= max_depth or (_depth > 0 and rng.random() < p_leaf):
        _count[0] += 1
        return {"label": f"x{_count[0]}"}
    k = int(rng.integers(2, max_children + 1))
    node = {"children": [random_nested(rng, max_depth, max_children, p_leaf, _depth + 1, _count)
                         for _ in range(k)]}
    return node


def random_tree(seed, **kw):
    return from_nested(random_nested(np.random.default_rng(seed), **kw))


def random_design(tree, n, seed, prevalence=0.3):
    """Binary design with every native column non-zero."""
    rng = np.random.default_rng(seed)
    X = (rng.random((n, tree.p0)) < prevalence).astype(np.uint8)
    for j in range(tree.p0):
        if not X[:, j].any():
            X[rng.integers(n), j] = 1
    return X


tree_seeds = st.integers(min_value=0, max_value=10_000)


def random_partition(tree, rng, p_collapse=0.4):
    """Random tree-consistent partition of the native leaves (list of block nodes)."""
    out, stack = [], [tree.root]
    while stack:
        u = stack.pop()
        if not tree.children[u] or (u != tree.root and rng.random() < p_collapse):
            out.append(u)
        else:
            stack.extend(tree.children[u])
    return out


def random_block_model(expanded, rng, blocks, coef):
    """Node coefficients of the block model ``sum_b coef[b] * OR(leaves under b)``.

    Non-zero values are spread over every level above the blocks; derived
    nodes straddling blocks cancel their path sum.  Integer inputs give an
    integer-valued gamma.
    """
    tree = expanded.tree
    inside = set()
    for b in blocks:
        inside |= tree.descendants(b)
    gamma = np.zeros(expanded.n_nodes)
    above = [u for u in range(tree.n_nodes) if u not in inside and u not in coef]
    for u in above:
        gamma[u] = rng.integers(-3, 4)

    def pathsum(u):
        return sum(gamma[a] for a in expanded.path(u))

    for b in blocks:
        gamma[b] = coef[b] - (pathsum(tree.parent[b]) if tree.parent[b] >= 0 else 0.0)
    for v, _ in expanded.subsets.items():
        u = int(expanded.parent[v])
        if u in above:
            gamma[v] = -pathsum(u)
    return gamma
