"""Compiled inner loops.

These are the few places where per-call Python overhead would dominate the
Monte Carlo budget: path simulation, the Perron pair of a positive matrix, and
the Newton iteration for the stationary-polytope projection.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def simulate_path(cdf, x0, u):
    """Inverse-CDF sampling of a path of length ``len(u) + 1`` started at ``x0``."""
    m = cdf.shape[0]
    n = u.shape[0]
    out = np.empty(n + 1, dtype=np.int64)
    out[0] = x0
    x = x0
    for t in range(n):
        row = cdf[x]
        y = 0
        while y < m - 1 and row[y] <= u[t]:
            y += 1
        out[t + 1] = y
        x = y
    return out


@njit(cache=True)
def perron_pair(M, tol, max_iter):
    """Power iteration with a Rayleigh-quotient eigenvalue estimate.

    Returns ``(rho, v, iterations, converged)`` with ``v`` normalized to sum 1.
    """
    m = M.shape[0]
    v = np.full(m, 1.0 / m)
    rho = 0.0
    for it in range(1, max_iter + 1):
        w = M @ v
        rho = (v @ w) / (v @ v)
        res = 0.0
        for i in range(m):
            res = max(res, abs(w[i] - rho * v[i]))
        if res <= tol * max(rho, 1e-300):
            return rho, v, it, True
        s = w.sum()
        for i in range(m):
            v[i] = w[i] / s
    return rho, v, max_iter, False


@njit(cache=True)
def _barrier_value(ct, P):
    m = P.shape[0]
    val = 0.0
    for i in range(m):
        for j in range(m):
            val -= ct[i, j] * np.log(P[i, j])
    return val


@njit(cache=True)
def barrier_stage(c, pi, P, mu, max_iter):
    """Centering stage of a primal log-barrier method for

        min  -sum_xy c_xy log P_xy   s.t.  P 1 = 1,  pi P = pi,

    where the zero entries of ``c`` carry the barrier weight ``mu``.  ``P``
    must be strictly positive and (nearly) feasible; it is updated in place.
    Newton steps solve the KKT system through its (2m-1) x (2m-1) Schur
    complement and also correct any drift in the equality constraints.

    Returns ``(half_decrement_sq, iterations, converged)``.
    """
    m = pi.shape[0]
    K = 2 * m - 1
    W = 0.0
    n0 = 0
    for i in range(m):
        for j in range(m):
            if c[i, j] > 0.0:
                W += c[i, j]
            else:
                n0 += 1
    stage_tol = max(1e-3 * mu * n0, 1e-15 * W)
    ct = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            ct[i, j] = c[i, j] if c[i, j] > 0.0 else mu
    hinv = np.empty((m, m))
    g = np.empty((m, m))
    d = np.empty((m, m))
    S = np.empty((K, K))
    rhs = np.empty(K)
    sc = np.empty(K)
    trial = np.empty((m, m))
    half_dec = np.inf
    for it in range(max_iter):
        for i in range(m):
            for j in range(m):
                g[i, j] = -ct[i, j] / P[i, j]
                hinv[i, j] = P[i, j] * P[i, j] / ct[i, j]
        S[:, :] = 0.0
        for i in range(m):
            r = 1.0
            for j in range(m):
                r -= P[i, j]
            rhs[i] = r
        for j in range(m - 1):
            r = pi[j]
            for i in range(m):
                r -= pi[i] * P[i, j]
            rhs[m + j] = r
        for i in range(m):
            for j in range(m):
                h = hinv[i, j]
                hg = h * g[i, j]
                S[i, i] += h
                rhs[i] += hg
                if j < m - 1:
                    S[m + j, m + j] += pi[i] * pi[i] * h
                    S[i, m + j] += pi[i] * h
                    S[m + j, i] += pi[i] * h
                    rhs[m + j] += pi[i] * hg
        # symmetric Jacobi scaling: the diagonal spans many orders of magnitude
        for k in range(K):
            sc[k] = 1.0 / np.sqrt(S[k, k])
        for k in range(K):
            for l in range(K):
                S[k, l] *= sc[k] * sc[l]
            rhs[k] *= sc[k]
        lam = np.linalg.solve(S, rhs)
        for k in range(K):
            lam[k] *= sc[k]
        dec2 = 0.0
        slope = 0.0
        for i in range(m):
            for j in range(m):
                v = lam[i] - g[i, j]
                if j < m - 1:
                    v += pi[i] * lam[m + j]
                d[i, j] = hinv[i, j] * v
                dec2 += d[i, j] * d[i, j] / hinv[i, j]
                slope += g[i, j] * d[i, j]
        half_dec = 0.5 * dec2
        if half_dec <= stage_tol:
            return half_dec, it, True
        step = 1.0
        for i in range(m):
            for j in range(m):
                if d[i, j] < 0.0:
                    step = min(step, -0.99 * P[i, j] / d[i, j])
        base = _barrier_value(ct, P)
        for _ls in range(60):
            for i in range(m):
                for j in range(m):
                    trial[i, j] = P[i, j] + step * d[i, j]
            if _barrier_value(ct, trial) <= base + 1e-4 * step * slope + 1e-15 * abs(base):
                break
            step *= 0.5
        for i in range(m):
            for j in range(m):
                P[i, j] = trial[i, j]
    return half_dec, max_iter, False
