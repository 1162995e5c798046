"""Penalty-path construction and k-fold cross-validation over (alpha, lambda)."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .expansion import BinaryDesign, ExpandedTree, expand
from .reparam import ReparamMap, build_reparam
from .simgen import FOLDS, rng
from .solver import FitResult, SolverConfig, design_norm, design_product, fit
from .tree import FeatureTree

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class TuningGrid:
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    n_lambdas: int = 50
    lambda_min_ratio: float = 0.01
    lambdas: tuple[float, ...] | None = None
    folds: int = 5
    metric: str | None = None  # "mse" | "deviance"; default follows the loss

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if not self.alphas or any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ValueError("alphas must lie in [0, 1]")
        if self.lambdas is not None:
            lam = np.asarray(self.lambdas, dtype=float)
            if lam.size == 0 or np.any(lam < 0) or np.any(np.diff(lam) >= 0):
                raise ValueError("lambdas must be non-negative and strictly decreasing")
        if self.metric not in (None, "mse", "deviance"):
            raise ValueError("metric must be 'mse' or 'deviance'")

    def lambda_values(self, lam_max: float) -> np.ndarray:
        if self.lambdas is not None:
            return np.asarray(self.lambdas, dtype=float)
        return lambda_path(lam_max, self.n_lambdas, self.lambda_min_ratio)


def lambda_path(lam_max: float, n: int = 50, min_ratio: float = 0.01) -> np.ndarray:
    """``n`` log-spaced values from ``lam_max`` down to ``min_ratio * lam_max``."""
    if lam_max <= 0 or n == 1:
        return np.array([float(lam_max)])
    return np.geomspace(lam_max, lam_max * min_ratio, n)


def working_residual(y: np.ndarray, loss: str = "squared",
                     weights: tuple[float, float] = (1.0, 1.0)) -> np.ndarray:
    """Negative loss gradient (times n) at the intercept-only fit.

    Squared loss: ``y - mean(y)``.  Logistic: the case-weighted residual at
    the null-model probability, which reduces to ``y - mean(y)`` for equal
    weights.
    """
    y = np.asarray(y, dtype=float)
    if loss == "squared":
        return y - y.mean()
    w1, w0 = weights
    ybar = y.mean()
    p0 = w1 * ybar / (w1 * ybar + w0 * (1.0 - ybar))
    return w1 * y * (1.0 - p0) - w0 * (1.0 - y) * p0


def lambda_max(X, y, rmap: ReparamMap, loss: str = "squared",
               weights: tuple[float, float] = (1.0, 1.0), XA: np.ndarray | None = None,
               parts: bool = False):
    """Smallest penalty level at which the all-zero fit is optimal.

    ``max(l1, l2)`` with ``l1 = max_j |x_j' r| / (n w_j)`` (the bound for
    alpha = 0) and ``l2 = max_g ||(XA)_g' r|| / (n w_g)`` (alpha = 1), where
    ``r`` is the working residual of the intercept-only model.
    """
    r = working_residual(y, loss, weights)
    n = r.size
    xr = np.asarray(X.T @ r).ravel() / n
    l1 = float(np.max(np.abs(xr) / rmap.feature_weights)) if xr.size else 0.0
    Z = design_product(X, rmap.A) if XA is None else XA
    zr = Z.T @ r / n
    g = rmap.groups
    l2 = max(float(np.linalg.norm(zr[m])) / w for m, w in zip(g.members, g.weights))
    # round-off floor: an exactly orthogonal response gives zero
    lam = max(l1, l2)
    if lam <= 1e-14 * (1.0 + float(np.abs(r).max(initial=0.0))):
        l1 = l2 = lam = 0.0
    return (lam, l1, l2) if parts else lam


def make_folds(y: np.ndarray, k: int, seed: int = 0, stratified: bool = False) -> np.ndarray:
    """Fold id per row; stratified folds deal each class out round-robin."""
    y = np.asarray(y)
    n = y.size
    if n < k:
        raise ValueError(f"need at least {k} rows for {k}-fold CV")
    g = rng(seed, FOLDS)
    folds = np.empty(n, dtype=np.int64)
    if stratified:
        for cls in np.unique(y):
            idx = g.permutation(np.flatnonzero(y == cls))
            folds[idx] = np.arange(idx.size) % k
        for f in range(k):
            if np.unique(y[folds != f]).size < 2 or np.unique(y[folds == f]).size < 2:
                raise ValueError(f"fold {f} lacks one class; too few cases for {k} folds")
    else:
        folds[g.permutation(n)] = np.arange(n) % k
    return folds


def score(y: np.ndarray, pred: np.ndarray, metric: str) -> float:
    """Held-out MSE, or unweighted binomial deviance per observation."""
    if metric == "mse":
        return float(np.mean((y - pred) ** 2))
    p = np.clip(pred, 1e-15, 1.0 - 1e-15)
    return float(-2.0 * np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@dataclass
class CVResult:
    best_alpha: float
    best_lambda: float
    alphas: np.ndarray
    lambdas: np.ndarray
    scores: np.ndarray  # folds x alphas x lambdas
    lambda_max: float
    metric: str
    expanded: ExpandedTree = field(repr=False)
    design: BinaryDesign = field(repr=False)
    rmap: ReparamMap = field(repr=False)
    fit: FitResult | None = field(default=None, repr=False)

    @property
    def mean_scores(self) -> np.ndarray:
        return self.scores.mean(axis=0)

    @property
    def se_scores(self) -> np.ndarray:
        k = self.scores.shape[0]
        return self.scores.std(axis=0, ddof=1) / math.sqrt(k)

    def table(self) -> list[dict]:
        mean, se = self.mean_scores, self.se_scores
        rows = []
        for i, a in enumerate(self.alphas):
            for j, lam in enumerate(self.lambdas):
                rows.append({"alpha": float(a), "lambda": float(lam),
                             "mean_score": float(mean[i, j]), "se_score": float(se[i, j]),
                             "chosen": bool(a == self.best_alpha and lam == self.best_lambda)})
        return rows

    def to_dict(self) -> dict:
        return {"metric": self.metric, "lambda_max": self.lambda_max,
                "best_alpha": self.best_alpha, "best_lambda": self.best_lambda,
                "folds": int(self.scores.shape[0]), "grid": self.table()}


def select_best(mean: np.ndarray, alphas: np.ndarray, lambdas: np.ndarray) -> tuple[int, int]:
    """Argmin of the mean CV score; ties go to larger lambda, then larger alpha."""
    best = None
    for i, a in enumerate(alphas):
        for j, lam in enumerate(lambdas):
            key = (mean[i, j], -lam, -a)
            if best is None or key < best[0]:
                best = (key, i, j)
    return best[1], best[2]


def _fold_path(Z, y, rmap, alphas, lambdas, config, train, test, metric, warm_start):
    Zt, yt = Z[train], y[train]
    sigma = design_norm(Zt, config.intercept)
    out = np.empty((len(alphas), len(lambdas)))
    for i, a in enumerate(alphas):
        init = None
        for j, lam in enumerate(lambdas):
            res = fit(None, yt, rmap, lam, a, config, init=init, XA=Zt, sigma=sigma)
            pred = res.predict_nodes(Z[test])
            out[i, j] = score(y[test], pred, metric)
            if warm_start:
                init = (res.mu, res.gamma)
    return out


def cross_validate(X0, y, tree: FeatureTree, grid: TuningGrid | None = None,
                   config: SolverConfig | None = None, seed: int = 0,
                   folds: np.ndarray | None = None, threads: int = 1,
                   warm_start: bool = False, refit: bool = True) -> CVResult:
    """Tune ``(alpha, lambda)`` jointly by k-fold CV and optionally refit.

    The design is expanded once on all of ``X0`` and the resulting columns,
    weights and groups are shared by every fold.  ``folds`` overrides the
    seeded fold assignment.
    """
    grid = grid or TuningGrid()
    config = config or SolverConfig()
    y = np.asarray(y, dtype=float)
    logistic = config.loss == "logistic"
    metric = grid.metric or ("deviance" if logistic else "mse")
    expanded, design = expand(tree, X0)
    rmap = build_reparam(expanded, design.X)
    Z = design_product(design.X, rmap.A)
    lam_max = lambda_max(design.X, y, rmap, config.loss, (config.w1, config.w0), XA=Z)
    lambdas = grid.lambda_values(lam_max)
    alphas = np.asarray(grid.alphas, dtype=float)
    if folds is None:
        folds = make_folds(y, grid.folds, seed, stratified=logistic)
    folds = np.asarray(folds)
    fold_ids = np.unique(folds)
    if logistic:
        for f in fold_ids:
            if np.unique(y[folds != f]).size < 2:
                raise ValueError(f"training part of fold {f} has a single class")

    def run(f):
        return _fold_path(Z, y, rmap, alphas, lambdas, config, folds != f, folds == f,
                          metric, warm_start)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            scores = np.stack(list(ex.map(run, fold_ids)))
    else:
        scores = np.stack([run(f) for f in fold_ids])
    if not np.all(np.isfinite(scores)):
        raise FloatingPointError("non-finite CV scores")
    i, j = select_best(scores.mean(axis=0), alphas, lambdas)
    result = CVResult(best_alpha=float(alphas[i]), best_lambda=float(lambdas[j]),
                      alphas=alphas, lambdas=lambdas, scores=scores, lambda_max=lam_max,
                      metric=metric, expanded=expanded, design=design, rmap=rmap)
    if refit:
        result.fit = fit(design.X, y, rmap, result.best_lambda, result.best_alpha, config, XA=Z)
    log.info("CV chose alpha=%.3g lambda=%.4g (lambda_max=%.4g)",
             result.best_alpha, result.best_lambda, lam_max)
    return result
