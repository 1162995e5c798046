"""Independent reference solvers for the penalized problem (test-only)."""

import numpy as np
from numba import njit

from logicagg.solver import design_norm


@njit(cache=True)
def _subgradient(Z, y, C1, c2s, g_ptr, g_nodes, step0, iters):
    n, m = Z.shape
    mu = 0.0
    gamma = np.zeros(m)
    best = np.inf
    best_mu = 0.0
    best_gamma = gamma.copy()
    for k in range(iters):
        r = mu + Z @ gamma - y
        v1 = C1 @ gamma
        f = 0.5 * (r @ r) / n + np.abs(v1).sum()
        for g in range(g_ptr.size - 1):
            s = 0.0
            for t in range(g_ptr[g], g_ptr[g + 1]):
                u = g_nodes[t]
                s += (c2s[u] * gamma[u]) ** 2
            f += np.sqrt(s)
        if f < best:
            best = f
            best_mu = mu
            best_gamma[:] = gamma
        d = r / n
        gmu = d.sum()
        grad = Z.T @ d + C1.T @ np.sign(v1)
        for g in range(g_ptr.size - 1):
            s = 0.0
            for t in range(g_ptr[g], g_ptr[g + 1]):
                u = g_nodes[t]
                s += (c2s[u] * gamma[u]) ** 2
            s = np.sqrt(s)
            if s > 0:
                for t in range(g_ptr[g], g_ptr[g + 1]):
                    u = g_nodes[t]
                    grad[u] += c2s[u] * c2s[u] * gamma[u] / s
        h = step0 / np.sqrt(k + 1.0)
        mu -= h * gmu
        gamma -= h * grad
    return best, best_mu, best_gamma


def subgradient_oracle(Z, y, duals, iters=200_000):
    """Long-run subgradient descent on the unsmoothed objective, best iterate.

    Unconstrained, so the projection step is the identity.  The step is
    ``(1/L_loss) / sqrt(k+1)``.
    """
    n = Z.shape[0]
    step0 = n / design_norm(Z) ** 2
    ptr, nodes = duals.groups.flat
    return _subgradient(np.ascontiguousarray(Z), np.asarray(y, float),
                        np.ascontiguousarray(duals.C1.toarray()), duals.c2_scale,
                        ptr, nodes, step0, iters)


def weighted_lasso_oracle(X, y, w, lam, iters=200_000, tol=1e-15):
    """FISTA with soft-thresholding on ``||y - mu - X b||^2/2n + lam sum w_j |b_j|``."""
    X = np.asarray(X.toarray() if hasattr(X, "toarray") else X, dtype=float)
    n, p = X.shape
    Z = np.column_stack([np.ones(n), X])
    L = np.linalg.norm(Z, 2) ** 2 / n
    thr = np.r_[0.0, lam * w] / L
    x = np.zeros(p + 1)
    z = x.copy()
    t = 1.0
    for _ in range(iters):
        g = Z.T @ (Z @ z - y) / n
        v = z - g / L
        x_new = np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = x_new + (t - 1) / t_new * (x_new - x)
        done = np.abs(x_new - x).sum() <= tol * max(np.abs(x).sum(), 1.0)
        x, t = x_new, t_new
        if done:
            break
    r = y - x[0] - X @ x[1:]
    obj = 0.5 * (r @ r) / n + lam * (w * np.abs(x[1:])).sum()
    return obj, x[0], x[1:]


def conic_oracle(Z, y, rmap, lam, alpha):
    """Interior-point solution of the exact squared-loss problem via cvxpy."""
    import cvxpy as cp

    n, m = Z.shape
    g = cp.Variable(m)
    mu = cp.Variable()
    DA = rmap.DA.toarray()
    pen = lam * (1 - alpha) * cp.norm1(DA @ g)
    if alpha > 0:
        pen = pen + lam * alpha * sum(w * cp.norm(g[mm]) for mm, w in
                                      zip(rmap.groups.members, rmap.groups.weights))
    prob = cp.Problem(cp.Minimize(cp.sum_squares(y - mu - Z @ g) / (2 * n) + pen))
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return prob.value, float(mu.value), np.asarray(g.value)
