"""Numba kernels for the smoothed FISTA loop.

Mirrors ``_kernels_numpy`` statement for statement but with explicit loops;
``A`` is passed in CSR pieces and groups as ``(g_ptr, g_nodes)``.
"""

import math

import numpy as np
from numba import njit

SQUARED = 0
LOGISTIC = 1


@njit(cache=True, nogil=True)
def _csr_matvec(a_indptr, a_indices, a_data, x, out):
    for j in range(a_indptr.size - 1):
        acc = 0.0
        for k in range(a_indptr[j], a_indptr[j + 1]):
            acc += a_data[k] * x[a_indices[k]]
        out[j] = acc


@njit(cache=True, nogil=True)
def _dense_matvec(Z, x, out):
    n, m = Z.shape
    for r in range(n):
        acc = 0.0
        for c in range(m):
            acc += Z[r, c] * x[c]
        out[r] = acc


@njit(cache=True, nogil=True)
def smoothed_penalty_grad(v1, gamma, a_indptr, a_indices, a_data, c1s, c2s,
                          g_ptr, g_nodes, tau, grad):
    """Write ``C1^T eta1 + C2^T eta2`` into ``grad``; return ``f_tau``.

    ``v1`` holds ``A @ gamma``.
    """
    for i in range(gamma.size):
        grad[i] = 0.0
    f = 0.0
    for j in range(c1s.size):
        s = c1s[j]
        if s == 0.0:
            continue
        v = s * v1[j]
        e = v / tau
        if e > 1.0:
            e = 1.0
        elif e < -1.0:
            e = -1.0
        f += e * v - 0.5 * tau * e * e
        es = e * s
        for k in range(a_indptr[j], a_indptr[j + 1]):
            grad[a_indices[k]] += es * a_data[k]
    for g in range(g_ptr.size - 1):
        nrm2 = 0.0
        for k in range(g_ptr[g], g_ptr[g + 1]):
            u = g_nodes[k]
            v = c2s[u] * gamma[u]
            nrm2 += v * v
        nrm = math.sqrt(nrm2)
        if nrm == 0.0:
            continue
        scale = 1.0 / tau if nrm <= tau else 1.0 / nrm
        for k in range(g_ptr[g], g_ptr[g + 1]):
            u = g_nodes[k]
            v = c2s[u] * gamma[u]
            e = v * scale
            f += e * v - 0.5 * tau * e * e
            grad[u] += c2s[u] * e
    return f


@njit(cache=True, nogil=True)
def exact_penalty(v1, gamma, c1s, c2s, g_ptr, g_nodes):
    f = 0.0
    for j in range(c1s.size):
        f += abs(c1s[j] * v1[j])
    for g in range(g_ptr.size - 1):
        nrm2 = 0.0
        for k in range(g_ptr[g], g_ptr[g + 1]):
            v = c2s[g_nodes[k]] * gamma[g_nodes[k]]
            nrm2 += v * v
        f += math.sqrt(nrm2)
    return f


@njit(cache=True, nogil=True)
def _softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True, nogil=True)
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


@njit(cache=True, nogil=True)
def loss_value(mu, zx, y, loss_kind, w1, w0):
    loss = 0.0
    for r in range(y.size):
        lin = mu + zx[r]
        if loss_kind == SQUARED:
            res = lin - y[r]
            loss += 0.5 * res * res
        else:
            loss += w1 * y[r] * _softplus(-lin) + w0 * (1.0 - y[r]) * _softplus(lin)
    return loss / y.size


@njit(cache=True, nogil=True)
def loss_grad(Z, mu, zx, y, loss_kind, w1, w0, grad):
    """Writes d/dgamma into ``grad``; returns d/dmu.  ``zx = Z @ gamma``."""
    n, m = Z.shape
    for i in range(m):
        grad[i] = 0.0
    gmu = 0.0
    inv_n = 1.0 / n
    for r in range(n):
        lin = mu + zx[r]
        if loss_kind == SQUARED:
            d = (lin - y[r]) * inv_n
        else:
            pr = _sigmoid(lin)
            d = (-w1 * y[r] * (1.0 - pr) + w0 * (1.0 - y[r]) * pr) * inv_n
        gmu += d
        if d != 0.0:
            for c in range(m):
                grad[c] += Z[r, c] * d
    return gmu


@njit(cache=True, nogil=True)
def fista(Z, y, loss_kind, w1, w0, a_indptr, a_indices, a_data, c1s, c2s,
          g_ptr, g_nodes, L, tau, max_iter, tol, mu0, gamma0, fit_intercept):
    """Accelerated gradient on the smoothed objective.

    Returns ``(mu, gamma, iterations, converged, finite)`` where ``(mu, gamma)``
    is the visited iterate with the lowest exact objective.
    """
    n = y.size
    m = gamma0.size
    p = c1s.size
    mu = mu0 if fit_intercept else 0.0
    gamma = gamma0.copy()
    zx = np.empty(n)
    ax = np.empty(p)
    _dense_matvec(Z, gamma, zx)
    _csr_matvec(a_indptr, a_indices, a_data, gamma, ax)
    best = (loss_value(mu, zx, y, loss_kind, w1, w0)
            + exact_penalty(ax, gamma, c1s, c2s, g_ptr, g_nodes))
    best_mu = mu
    best_g = gamma.copy()
    wmu = mu
    wg = gamma.copy()
    zw = zx.copy()
    aw = ax.copy()
    new_zx = np.empty(n)
    new_ax = np.empty(p)
    g_loss = np.empty(m)
    g_pen = np.empty(m)
    new_g = np.empty(m)
    theta = 1.0
    step = 1.0 / L
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        gmu = loss_grad(Z, wmu, zw, y, loss_kind, w1, w0, g_loss)
        smoothed_penalty_grad(aw, wg, a_indptr, a_indices, a_data, c1s, c2s,
                              g_ptr, g_nodes, tau, g_pen)
        new_mu = wmu - step * gmu if fit_intercept else 0.0
        for i in range(m):
            new_g[i] = wg[i] - step * (g_loss[i] + g_pen[i])
        _dense_matvec(Z, new_g, new_zx)
        _csr_matvec(a_indptr, a_indices, a_data, new_g, new_ax)
        obj = (loss_value(new_mu, new_zx, y, loss_kind, w1, w0)
               + exact_penalty(new_ax, new_g, c1s, c2s, g_ptr, g_nodes))
        if not math.isfinite(obj):
            return new_mu, new_g.copy(), it, False, False
        if obj < best:
            best = obj
            best_mu = new_mu
            best_g[:] = new_g
        theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        mom = (theta - 1.0) / theta_new
        num = abs(new_mu - mu)
        den = abs(mu)
        for i in range(m):
            num += abs(new_g[i] - gamma[i])
            den += abs(gamma[i])
        wmu = new_mu + mom * (new_mu - mu)
        for i in range(m):
            wg[i] = new_g[i] + mom * (new_g[i] - gamma[i])
            gamma[i] = new_g[i]
        for r in range(n):
            zw[r] = new_zx[r] + mom * (new_zx[r] - zx[r])
            zx[r] = new_zx[r]
        for j in range(p):
            aw[j] = new_ax[j] + mom * (new_ax[j] - ax[j])
            ax[j] = new_ax[j]
        mu = new_mu
        theta = theta_new
        if den == 0.0:
            if num == 0.0:
                converged = True
                break
        elif num / den <= tol:
            converged = True
            break
    return best_mu, best_g, it, converged, True
