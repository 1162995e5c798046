"""Synthetic benchmarks: built-in hierarchies, rare binary designs, outcomes.

Randomness comes from numpy's Philox counter-based generator.  A stream is
identified by ``(seed, stream_id)`` and seeded through ``SeedSequence``, so
the draws of one stream never depend on how many numbers another stream
consumed.  Replicate ``r`` of an experiment uses seed ``base + r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import FeatureTree, from_nested

# stream ids
DESIGN, NOISE, LATENT, OUTCOME, SUBSAMPLE, FOLDS = range(6)
TEST_OFFSET = 100  # added to stream ids for independent test sets


def rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


# ---------------------------------------------------------------------------
# built-in trees


def _leaf(i: int) -> dict:
    return {"label": f"x{i}"}


def _node(label: str, *kids: dict) -> dict:
    return {"label": label, "children": list(kids)}


def _leaves(lo: int, hi: int) -> list[dict]:
    return [_leaf(i) for i in range(lo, hi + 1)]


def _shared_branches() -> list[dict]:
    """The first two level-1 subtrees, common to all three trees."""
    b1 = _node("u1^1",
               _node("u1^2", *_leaves(1, 4)),
               _node("u2^2", _node("u5^3", *_leaves(5, 6)), _node("u6^3", *_leaves(7, 8))),
               _leaf(9))
    b2 = _node("u2^1", _node("u4^2", *_leaves(10, 12)), _leaf(13))
    return [b1, b2]


def builtin_tree(tree_id: int) -> FeatureTree:
    """Simulation hierarchies: 15, 42 and 43 leaves with k = 4, 11, 10."""
    if tree_id == 1:
        root = _node("u1^0", *_shared_branches(), _leaf(14), _leaf(15))
    elif tree_id == 2:
        root = _node("u1^0", *_shared_branches(), _leaf(14), _leaf(15),
                     _node("u5^1", *_leaves(16, 25)),
                     _node("u6^1", *_leaves(26, 35)),
                     _node("u7^1", *_leaves(36, 38)),
                     *_leaves(39, 42))
    elif tree_id == 3:
        root = _node("u1^0", *_shared_branches(), _leaf(14), _leaf(15),
                     _node("u5^1", *_leaves(16, 17)),
                     _node("u6^1", *_leaves(18, 19)),
                     _node("u7^1", _node("u10^2", *_leaves(20, 21)), _leaf(22)),
                     _node("u8^1", *_leaves(23, 32)),
                     _node("u9^1", *_leaves(33, 42)),
                     _leaf(43))
    else:
        raise ValueError(f"unknown built-in tree {tree_id!r}; choose 1, 2 or 3")
    return from_nested(root)


# ---------------------------------------------------------------------------
# designs and outcomes


@dataclass(frozen=True)
class SimConfig:
    tree_id: int = 1
    n: int = 200
    seed: int = 0
    prevalence: float = 0.1
    snr: float | None = 2.0
    abcd: tuple[float, float, float, float] | None = None
    replicate: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.prevalence < 1.0:
            raise ValueError("prevalence must lie in [0, 1)")
        if self.snr is not None and not self.snr > 0:
            raise ValueError("SNR must be positive")

    @property
    def effective_seed(self) -> int:
        return self.seed + self.replicate


def gen_design(tree: FeatureTree | int, n: int, prevalence: float = 0.1, seed: int = 0,
               stream: int = DESIGN) -> np.ndarray:
    """``n x p0`` matrix of i.i.d. Bernoulli(prevalence) entries (uint8)."""
    p0 = builtin_tree(tree).p0 if isinstance(tree, int) else tree.p0
    return (rng(seed, stream).random((n, p0)) < prevalence).astype(np.uint8)


def _or(X0: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """OR of features ``x_lo .. x_hi`` (1-based, inclusive)."""
    if X0.shape[1] < hi:
        raise ValueError(f"generator needs features up to x{hi}; design has {X0.shape[1]}")
    return X0[:, lo - 1:hi].max(axis=1).astype(float)


REGRESSION_MU = 2.0


def regression_truth(p0: int) -> np.ndarray:
    """True coefficients on the native leaves ``x1 .. x_p0``."""
    if p0 < 13:
        raise ValueError("the regression truth needs at least 13 features")
    beta = np.zeros(p0)
    beta[0:4] = 3.0
    beta[8] = -5.0
    beta[9:13] = 1.5
    return beta


def regression_signal(X0: np.ndarray) -> np.ndarray:
    X0 = np.asarray(X0)
    return (REGRESSION_MU + 3.0 * _or(X0, 1, 4) - 5.0 * _or(X0, 9, 9)
            + 1.5 * _or(X0, 10, 13))


def gen_regression(X0: np.ndarray, snr: float, seed: int = 0,
                   sigma2: float | None = None, stream: int = NOISE):
    """Continuous outcome with noise variance ``var(signal)/snr``.

    ``var`` is the empirical variance of the signal on this design.  Pass
    ``sigma2`` to reuse a training noise level for a test set.
    Returns ``(y, beta_on_leaves, sigma2)``.
    """
    signal = regression_signal(X0)
    if sigma2 is None:
        if not snr > 0:
            raise ValueError("SNR must be positive")
        sigma2 = float(np.var(signal)) / snr
    noise = rng(seed, stream).standard_normal(signal.size)
    return signal + np.sqrt(sigma2) * noise, regression_truth(X0.shape[1]), float(sigma2)


def classification_eta(X0: np.ndarray, a: float, b: float, c: float, d: float,
                       z: np.ndarray) -> np.ndarray:
    X0 = np.asarray(X0)
    eta = -5.0 * a + b * (z + 5.0 * _or(X0, 1, 4) + 4.0 * _or(X0, 9, 9)
                          - 1.5 * _or(X0, 10, 13))
    if c != 0.0:
        eta = eta + c * _or(X0, 18, 19)
    if d != 0.0:
        eta = eta - d * _or(X0, 20, 22)
    return eta


def classification_truth(p0: int, a: float, b: float, c: float, d: float) -> np.ndarray:
    """Leaf coefficients of the logit (the intercept ``-5a`` and ``z`` aside)."""
    need = 22 if (c or d) else 13
    if p0 < need:
        raise ValueError(f"the classification truth needs at least {need} features")
    beta = np.zeros(p0)
    beta[0:4] = 5.0 * b
    beta[8] = 4.0 * b
    beta[9:13] = -1.5 * b
    if c or d:
        beta[17:19] = c
        beta[19:22] = -d
    return beta


def gen_classification(X0: np.ndarray, a: float, b: float, c: float, d: float,
                       seed: int = 0, stream: int = LATENT) -> np.ndarray:
    """Binary outcome ``y ~ Bernoulli(logistic(eta))`` with ``z ~ N(0, 0.25)``."""
    g = rng(seed, stream)
    z = 0.5 * g.standard_normal(X0.shape[0])
    q = 1.0 / (1.0 + np.exp(-classification_eta(X0, a, b, c, d, z)))
    return (g.random(X0.shape[0]) < q).astype(np.uint8)


CLASSIFICATION_CASES = {
    1: (1, (1.0, 1.0, 0.0, 0.0), 200),
    2: (1, (0.66, 0.6, 0.0, 0.0), 200),
    3: (1, (0.7, 1.0, 0.0, 0.0), 200),
    4: (3, (0.9, 1.0, 1.5, -3.5), 100),
}
REGRESSION_CASES = {1: (1, 0.5, 200), 2: (1, 2.0, 200), 3: (2, 2.0, 200)}


def case_control_subsample(y: np.ndarray, ratio: float, seed: int = 0,
                           stream: int = SUBSAMPLE) -> np.ndarray:
    """Sorted row indices: every case plus ``ratio x #cases`` random controls."""
    y = np.asarray(y)
    cases = np.flatnonzero(y == 1)
    controls = np.flatnonzero(y == 0)
    want = int(round(ratio * cases.size))
    if want > controls.size:
        raise ValueError(f"need {want} controls but only {controls.size} available")
    picked = rng(seed, stream).choice(controls, size=want, replace=False)
    return np.sort(np.concatenate([cases, picked]))
