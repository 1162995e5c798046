"""Smoothing proximal gradient (FISTA) solver for the node-coefficient problem.

Minimizes over ``(mu, gamma)``::

    loss(y, mu + X A gamma)
        + lam*(1-alpha) * ||D A gamma||_1 + lam*alpha * sum_g w_g ||gamma_g||

where the non-smooth penalty is replaced by its Nesterov smoothing with
parameter ``tau``.  ``loss`` is either ``||r||^2 / (2n)`` or the case-weighted
logistic negative log-likelihood divided by ``n``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

from . import _accel
from .linalg import spectral_norm, with_intercept
from .reparam import DualMatrices, ReparamMap, build_dual_matrices

LOSSES = ("squared", "logistic")


class NumericalError(FloatingPointError):
    """The iteration produced a non-finite objective."""


@dataclass(frozen=True)
class SolverConfig:
    tau: float = 1e-3
    max_iter: int = 10_000
    tol: float = 1e-5
    loss: str = "squared"
    w1: float = 1.0
    w0: float = 1.0
    intercept: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if not (self.w1 > 0 and self.w0 > 0):
            raise ValueError("case weights must be positive")

    @property
    def loss_kind(self) -> int:
        return LOSSES.index(self.loss)


@dataclass
class FitResult:
    mu: float
    gamma: np.ndarray
    beta: np.ndarray
    iterations: int
    smoothed_objective: float
    objective: float
    converged: bool
    lam: float
    alpha: float
    tau: float
    loss: str = "squared"
    lipschitz: float = field(default=float("nan"), repr=False)

    def linear_predictor(self, X) -> np.ndarray:
        return self.mu + np.asarray(X @ self.beta).ravel()

    def predict(self, X) -> np.ndarray:
        """Fitted mean: identity link for squared loss, probability for logistic."""
        return self._link(self.linear_predictor(X))

    def predict_nodes(self, XA: np.ndarray) -> np.ndarray:
        """Same as :meth:`predict`, from the node-space design ``X @ A``."""
        return self._link(self.mu + XA @ self.gamma)

    def _link(self, eta: np.ndarray) -> np.ndarray:
        return _sigmoid(eta) if self.loss == "logistic" else eta

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma"] = self.gamma.tolist()
        d["beta"] = self.beta.tolist()
        d["lambda"] = d.pop("lam")
        return d


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


# ---------------------------------------------------------------------------
# penalty and loss pieces (reference implementations, not the hot path)


def smoothed_penalty(gamma: np.ndarray, duals: DualMatrices, tau: float):
    """Return ``(f_tau, gradient, eta1, eta2)`` of the smoothed penalty.

    ``eta2`` is laid out group by group, in the order of ``duals.groups``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    gamma = np.asarray(gamma, dtype=float)
    v1 = duals.C1 @ gamma
    eta1 = np.clip(v1 / tau, -1.0, 1.0)
    ptr, nodes = duals.groups.flat
    v2 = (duals.c2_scale * gamma)[nodes] / tau
    eta2 = np.empty_like(v2)
    for g in range(len(ptr) - 1):
        seg = v2[ptr[g]:ptr[g + 1]]
        nrm = np.linalg.norm(seg)
        eta2[ptr[g]:ptr[g + 1]] = seg if nrm <= 1.0 else seg / nrm
    C2g = v2 * tau
    value = float(eta1 @ v1 - 0.5 * tau * eta1 @ eta1 + eta2 @ C2g - 0.5 * tau * eta2 @ eta2)
    grad = duals.C1.T @ eta1
    np.add.at(grad, nodes, duals.c2_scale[nodes] * eta2)
    return value, grad, eta1, eta2


def exact_penalty(gamma: np.ndarray, duals: DualMatrices) -> float:
    """``lam(1-alpha)||DA gamma||_1 + lam*alpha*sum_g w_g ||gamma_g||``."""
    gamma = np.asarray(gamma, dtype=float)
    val = float(np.abs(duals.C1 @ gamma).sum())
    ptr, nodes = duals.groups.flat
    v2 = (duals.c2_scale * gamma)[nodes]
    val += float(np.sqrt(np.add.reduceat(v2 * v2, ptr[:-1])).sum())
    return val


def smoothing_gap(gamma: np.ndarray, duals: DualMatrices, tau: float) -> float:
    """``exact_penalty - f_tau`` summed term by term.

    Each dual-ball term contributes ``tau/2 - (tau - min(|v|, tau))**2 / (2 tau)``,
    which lies in ``[0, tau/2]``; summing with ``math.fsum`` avoids the
    cancellation of subtracting two large totals.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    gamma = np.asarray(gamma, dtype=float)
    ptr, nodes = duals.groups.flat
    v2 = (duals.c2_scale * gamma)[nodes]
    mags = np.r_[np.abs(duals.C1 @ gamma), np.sqrt(np.add.reduceat(v2 * v2, ptr[:-1]))]
    d = tau - np.minimum(mags, tau)
    shortfall = np.clip(d * d / (2.0 * tau), 0.0, tau / 2.0)
    return math.fsum(tau / 2.0 - shortfall)


def loss_value(Z: np.ndarray, y: np.ndarray, mu: float, gamma: np.ndarray,
               config: SolverConfig) -> float:
    lin = mu + Z @ gamma
    n = len(y)
    if config.loss == "squared":
        r = y - lin
        return 0.5 * float(r @ r) / n
    return float(np.sum(config.w1 * y * np.logaddexp(0.0, -lin)
                        + config.w0 * (1.0 - y) * np.logaddexp(0.0, lin))) / n


def loss_gradient(Z: np.ndarray, y: np.ndarray, mu: float, gamma: np.ndarray,
                  config: SolverConfig) -> tuple[float, np.ndarray]:
    """Gradient of the loss with respect to ``(mu, gamma)``."""
    lin = mu + Z @ gamma
    n = len(y)
    if config.loss == "squared":
        d = (lin - y) / n
    else:
        pr = _sigmoid(lin)
        d = (-config.w1 * y * (1.0 - pr) + config.w0 * (1.0 - y) * pr) / n
    return float(d.sum()), Z.T @ d


def objective(Z, y, mu, gamma, duals: DualMatrices, config: SolverConfig,
              smoothed: bool = False) -> float:
    pen = smoothed_penalty(gamma, duals, config.tau)[0] if smoothed else exact_penalty(gamma, duals)
    return loss_value(Z, y, mu, gamma, config) + pen


# ---------------------------------------------------------------------------


def design_product(X, A) -> np.ndarray:
    """Dense ``X @ A`` as a C-contiguous float array."""
    Z = X @ A
    Z = Z.toarray() if sparse.issparse(Z) else np.asarray(Z)
    return np.ascontiguousarray(Z, dtype=np.float64)


def design_norm(Z: np.ndarray, intercept: bool = True) -> float:
    """Largest singular value of ``[1 | Z]`` (or ``Z`` without intercept)."""
    return spectral_norm(with_intercept(Z) if intercept else Z)


def lipschitz_constant(Z: np.ndarray, duals: DualMatrices, tau: float,
                       loss: str = "squared", weights: tuple[float, float] = (1.0, 1.0),
                       intercept: bool = True, sigma: float | None = None) -> float:
    """Gradient Lipschitz bound of the smoothed objective.

    Loss part: ``sigma^2/n`` (squared) or ``max(w1, w0)/4 * sigma^2/n``
    (logistic) with ``sigma`` the largest singular value of ``[1 | XA]``.
    Penalty part: ``(||C1||^2 + ||C2||^2) / tau``.
    """
    n = Z.shape[0]
    if sigma is None:
        sigma = design_norm(Z, intercept)
    l_loss = sigma ** 2 / n
    if loss == "logistic":
        l_loss *= max(weights) / 4.0
    return l_loss + (duals.norm_C1 ** 2 + duals.norm_C2 ** 2) / tau


def fit(X, y, rmap: ReparamMap, lam: float, alpha: float,
        config: SolverConfig | None = None, init: tuple[float, np.ndarray] | None = None,
        XA: np.ndarray | None = None, sigma: float | None = None,
        backend: str | None = None) -> FitResult:
    """Fit the penalized model at one ``(lam, alpha)``.

    ``XA`` (dense ``X @ A``) and ``sigma`` (its spectral norm with the
    intercept column) may be passed in to skip recomputation across a grid.
    ``init`` is an optional ``(mu, gamma)`` starting point; by default the
    iteration starts from ``gamma = 0`` and the no-feature intercept, since
    with a large penalty the common step ``1/L`` barely moves ``mu``.
    """
    config = config or SolverConfig()
    y = np.ascontiguousarray(y, dtype=np.float64)
    if lam < 0 or not math.isfinite(lam):
        raise ValueError("lambda must be finite and non-negative")
    if config.loss == "logistic":
        _check_binary(y)
    Z = design_product(X, rmap.A) if XA is None else np.ascontiguousarray(XA, dtype=np.float64)
    if Z.shape[0] != y.size:
        raise ValueError(f"design has {Z.shape[0]} rows but y has {y.size}")
    duals = build_dual_matrices(rmap, lam, alpha)
    L = lipschitz_constant(Z, duals, config.tau, config.loss, (config.w1, config.w0),
                           config.intercept, sigma)
    if L <= 0:
        L = 1.0
    if init is None:
        mu0 = null_intercept(y, config) if config.intercept else 0.0
        gamma0 = np.zeros(rmap.n_nodes)
    else:
        mu0, gamma0 = float(init[0]), np.array(init[1], dtype=np.float64)
    A = rmap.A
    ptr, nodes = rmap.groups.flat
    kern = _accel.get_backend(backend)
    mu, gamma, iters, converged, finite = kern.fista(
        Z, y, config.loss_kind, float(config.w1), float(config.w0),
        A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data.astype(np.float64),
        duals.c1_row_scale.astype(np.float64), duals.c2_scale.astype(np.float64),
        ptr, nodes, float(L), float(config.tau), int(config.max_iter), float(config.tol),
        float(mu0), gamma0, bool(config.intercept))
    mu = float(mu)
    if not finite:
        raise NumericalError("solver produced a non-finite objective; check data scaling")
    obj = objective(Z, y, mu, gamma, duals, config)
    sobj = objective(Z, y, mu, gamma, duals, config, smoothed=True)
    if not (math.isfinite(obj) and math.isfinite(sobj)):
        raise NumericalError("non-finite objective at the solution")
    return FitResult(mu=mu, gamma=gamma, beta=np.asarray(A @ gamma), iterations=int(iters),
                     smoothed_objective=sobj, objective=obj, converged=bool(converged),
                     lam=float(lam), alpha=float(alpha), tau=config.tau, loss=config.loss,
                     lipschitz=float(L))


def null_intercept(y: np.ndarray, config: SolverConfig) -> float:
    """Intercept of the model without features: mean(y), or the weighted logit."""
    ybar = float(np.mean(y))
    if config.loss == "squared":
        return ybar
    return math.log(config.w1 * ybar / (config.w0 * (1.0 - ybar)))


def _check_binary(y: np.ndarray) -> None:
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic loss needs a 0/1 response")
    if y.min() == y.max():
        raise ValueError("logistic loss needs both classes present")


def fit_logistic(X, y, rmap: ReparamMap, lam: float, alpha: float,
                 config: SolverConfig | None = None, **kwargs) -> FitResult:
    """Case-weighted logistic fit; ``config.w1``/``config.w0`` weight the classes."""
    config = config or SolverConfig(loss="logistic")
    if config.loss != "logistic":
        config = SolverConfig(**{**asdict(config), "loss": "logistic"})
    return fit(X, y, rmap, lam, alpha, config, **kwargs)
