from __future__ import annotations

import numpy as np
from scipy import sparse

POWER_ITERS = 50
POWER_TOL = 1e-8
_DENSE_FALLBACK = 4_000_000


def spectral_norm(M, max_iter: int = POWER_ITERS, tol: float = POWER_TOL) -> float:
    """Largest singular value of ``M`` by power iteration on ``M^T M``.

    Starts from a deterministic vector.  When the iteration has not settled
    to ``tol`` after ``max_iter`` steps the exact value is taken from a dense
    SVD if the matrix is small enough, otherwise iteration continues (an
    underestimate would make the gradient step unsafe).
    """
    m, n = M.shape
    if m == 0 or n == 0:
        return 0.0
    v = np.ones(n) / np.sqrt(n)
    v += 1e-3 * np.cos(np.arange(n))  # break symmetry with structured inputs
    v /= np.linalg.norm(v)
    est = 0.0
    limit = max_iter
    it = 0
    while True:
        w = M.T @ (M @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        it += 1
        if abs(nw - est) <= tol * nw:
            return float(np.sqrt(nw))
        est = nw
        if it >= limit:
            if m * n <= _DENSE_FALLBACK:
                dense = M.toarray() if sparse.issparse(M) else np.asarray(M)
                return float(np.linalg.norm(dense, 2))
            if limit >= 20 * max_iter:
                return float(np.sqrt(nw)) * (1.0 + 1e-3)
            limit += max_iter


def with_intercept(Z: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((Z.shape[0], 1)), Z])
