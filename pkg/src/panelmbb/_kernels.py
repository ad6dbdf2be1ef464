"""Numba kernels for the two operations that dominate bootstrap runtime.

Both kernels iterate in a fixed order with plain IEEE arithmetic (no
fastmath), so their output is a pure function of the input bytes. The
``idx`` argument lets the within-group cross products be computed on a
time-resampled view of the data without materialising the resampled panel:
reading ``y[i, idx[t]]`` for t = 0..m-1 touches exactly the values, in
exactly the order, that a materialised resample would.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def within_cross_products(y, X, idx):
    """Unit means and demeaned cross products of a (possibly resampled) panel.

    Returns ``(S, v, ybar, xbar)`` where ``S`` and ``v`` are the sums
    sum_i sum_t (x - xbar_i)(x - xbar_i)' and sum_i sum_t (x - xbar_i)(y - ybar_i).
    """
    n, _, k = X.shape
    m = idx.shape[0]
    S = np.zeros((k, k))
    v = np.zeros(k)
    ybar = np.empty(n)
    xbar = np.empty((n, k))
    for i in range(n):
        sy = 0.0
        for t in range(m):
            sy += y[i, idx[t]]
        ybar[i] = sy / m
        for a in range(k):
            sx = 0.0
            for t in range(m):
                sx += X[i, idx[t], a]
            xbar[i, a] = sx / m
        for t in range(m):
            yd = y[i, idx[t]] - ybar[i]
            for a in range(k):
                xda = X[i, idx[t], a] - xbar[i, a]
                v[a] += xda * yd
                for b in range(a, k):
                    S[a, b] += xda * (X[i, idx[t], b] - xbar[i, b])
    for a in range(k):
        for b in range(a):
            S[a, b] = S[b, a]
    return S, v, ybar, xbar


@njit(cache=True, nogil=True)
def block_score_outer(y, X, starts, q, ybar_star, xbar_star, beta_star):
    """Sum over units and blocks of the outer products of block scores.

    The score of block ``s`` in unit ``i`` is
    ``q**-0.5 * sum_{j<q} (x[i, s+j] - xbar_star[i]) * e[i, s+j]`` with
    ``e[i, t] = (y[i, t] - ybar_star[i]) - (x[i, t] - xbar_star[i])' beta_star``:
    original observations at the block positions, centred at the resampled
    means, with the resampled slope. The caller divides by ``n * p``.
    """
    n, _, k = X.shape
    p = starts.shape[0]
    out = np.zeros((k, k))
    V = np.empty(k)
    rootq = np.sqrt(q)
    for i in range(n):
        for bidx in range(p):
            s = starts[bidx]
            for a in range(k):
                V[a] = 0.0
            for j in range(q):
                t = s + j
                e = y[i, t] - ybar_star[i]
                for a in range(k):
                    e -= (X[i, t, a] - xbar_star[i, a]) * beta_star[a]
                for a in range(k):
                    V[a] += (X[i, t, a] - xbar_star[i, a]) * e
            for a in range(k):
                for b in range(a, k):
                    out[a, b] += (V[a] / rootq) * (V[b] / rootq)
    for a in range(k):
        for b in range(a):
            out[a, b] = out[b, a]
    return out
