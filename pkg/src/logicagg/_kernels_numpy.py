"""Vectorized numpy versions of the solver kernels (no compilation)."""

import math

import numpy as np
from scipy import sparse

SQUARED = 0
LOGISTIC = 1


def _csr(a_indptr, a_indices, a_data, m):
    p = a_indptr.size - 1
    return sparse.csr_array((a_data, a_indices, a_indptr), shape=(p, m))


def smoothed_penalty_grad(v1, gamma, A, c1s, c2s, g_ptr, g_nodes, tau, grad):
    """Smoothed penalty and its gradient; ``v1`` is ``A @ gamma``."""
    v1 = c1s * v1
    e1 = np.clip(v1 / tau, -1.0, 1.0)
    f = float(e1 @ v1 - 0.5 * tau * (e1 @ e1))
    grad[:] = A.T @ (e1 * c1s)
    v2 = (c2s * gamma)[g_nodes]
    nrm = np.sqrt(np.add.reduceat(v2 * v2, g_ptr[:-1]))
    scale = np.where(nrm <= tau, 1.0 / tau, 1.0 / np.where(nrm == 0.0, 1.0, nrm))
    e2 = v2 * np.repeat(scale, np.diff(g_ptr))
    f += float(e2 @ v2 - 0.5 * tau * (e2 @ e2))
    np.add.at(grad, g_nodes, c2s[g_nodes] * e2)
    return f


def exact_penalty(v1, gamma, c1s, c2s, g_ptr, g_nodes):
    v2 = (c2s * gamma)[g_nodes]
    return float(np.abs(c1s * v1).sum() + np.sqrt(np.add.reduceat(v2 * v2, g_ptr[:-1])).sum())


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def loss_value(lin, y, loss_kind, w1, w0):
    if loss_kind == SQUARED:
        r = lin - y
        return 0.5 * float(r @ r) / y.size
    return float(np.sum(w1 * y * _softplus(-lin) + w0 * (1.0 - y) * _softplus(lin))) / y.size


def loss_grad(Z, lin, y, loss_kind, w1, w0, grad):
    """Writes d/dgamma into ``grad``; returns d/dmu.  ``lin = mu + Z @ gamma``."""
    if loss_kind == SQUARED:
        d = (lin - y) / y.size
    else:
        pr = _sigmoid(lin)
        d = (-w1 * y * (1.0 - pr) + w0 * (1.0 - y) * pr) / y.size
    grad[:] = Z.T @ d
    return float(d.sum())


def fista(Z, y, loss_kind, w1, w0, a_indptr, a_indices, a_data, c1s, c2s,
          g_ptr, g_nodes, L, tau, max_iter, tol, mu0, gamma0, fit_intercept):
    m = gamma0.size
    A = _csr(a_indptr, a_indices, a_data, m)
    mu = mu0 if fit_intercept else 0.0
    gamma = gamma0.copy()
    zx, ax = Z @ gamma, A @ gamma
    best = loss_value(mu + zx, y, loss_kind, w1, w0) + exact_penalty(ax, gamma, c1s, c2s,
                                                                      g_ptr, g_nodes)
    best_mu, best_g = mu, gamma.copy()
    wmu, wg, zw, aw = mu, gamma.copy(), zx.copy(), ax.copy()
    g_loss = np.empty(m)
    g_pen = np.empty(m)
    theta = 1.0
    step = 1.0 / L
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        gmu = loss_grad(Z, wmu + zw, y, loss_kind, w1, w0, g_loss)
        smoothed_penalty_grad(aw, wg, A, c1s, c2s, g_ptr, g_nodes, tau, g_pen)
        new_mu = wmu - step * gmu if fit_intercept else 0.0
        new_g = wg - step * (g_loss + g_pen)
        new_zx, new_ax = Z @ new_g, A @ new_g
        obj = (loss_value(new_mu + new_zx, y, loss_kind, w1, w0)
               + exact_penalty(new_ax, new_g, c1s, c2s, g_ptr, g_nodes))
        if not math.isfinite(obj):
            return new_mu, new_g, it, False, False
        if obj < best:
            best, best_mu, best_g = obj, new_mu, new_g.copy()
        theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        mom = (theta - 1.0) / theta_new
        num = abs(new_mu - mu) + float(np.abs(new_g - gamma).sum())
        den = abs(mu) + float(np.abs(gamma).sum())
        wmu = new_mu + mom * (new_mu - mu)
        wg = new_g + mom * (new_g - gamma)
        zw = new_zx + mom * (new_zx - zx)
        aw = new_ax + mom * (new_ax - ax)
        mu, gamma, zx, ax = new_mu, new_g, new_zx, new_ax
        theta = theta_new
        if den == 0.0:
            if num == 0.0:
                converged = True
                break
        elif num / den <= tol:
            converged = True
            break
    return best_mu, best_g, it, converged, True
