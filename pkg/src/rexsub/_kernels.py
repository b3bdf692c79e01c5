"""Compiled per-site conditional solves for closed-form Matérn smoothness values."""

import math

import numpy as np
from numba import njit

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)
CLOSED_FORM_NU = {0.5: 0, 1.5: 1, 2.5: 2}


@njit(cache=True)
def _corr(d, code, phi):
    if code == 0:
        return math.exp(-d / phi)
    if code == 1:
        h = SQRT3 * d / phi
        return (1.0 + h) * math.exp(-h)
    h = SQRT5 * d / phi
    return (1.0 + h + h * h / 3.0) * math.exp(-h)


@njit(cache=True)
def _dist(S, a, b):
    dx = S[a, 0] - S[b, 0]
    dy = S[a, 1] - S[b, 1]
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def _solve_site(S, s, nb, k, code, phi, sigma2, diag, L, y, bvec):
    """Cholesky-solve one conditional; returns ``c^T A^{-1} c`` or -1.0 on failure."""
    for a in range(k):
        pa = nb[a]
        for c in range(a):
            L[a, c] = sigma2 * _corr(_dist(S, pa, nb[c]), code, phi)
        L[a, a] = diag
        y[a] = sigma2 * _corr(_dist(S, pa, s), code, phi)
    # in-place lower Cholesky
    for j in range(k):
        acc = L[j, j]
        for t in range(j):
            acc -= L[j, t] * L[j, t]
        if acc <= 0.0:
            return -1.0
        ljj = math.sqrt(acc)
        L[j, j] = ljj
        for i in range(j + 1, k):
            acc = L[i, j]
            for t in range(j):
                acc -= L[i, t] * L[j, t]
            L[i, j] = acc / ljj
    # forward then back substitution: L y' = c, L^T b = y'
    for i in range(k):
        acc = y[i]
        for t in range(i):
            acc -= L[i, t] * y[t]
        y[i] = acc / L[i, i]
    quad = 0.0
    for i in range(k):
        quad += y[i] * y[i]
    for i in range(k - 1, -1, -1):
        acc = y[i]
        for t in range(i + 1, k):
            acc -= L[t, i] * bvec[t]
        bvec[i] = acc / L[i, i]
    return quad


@njit(cache=True)
def conditionals(S, order, nbrs, code, phi, sigma2, tau2, jitter, b_out, d_out):
    """Fill ``b_out``/``d_out`` for every ordered position; False on a non-positive variance."""
    n, m = nbrs.shape
    L = np.empty((max(m, 1), max(m, 1)))
    y = np.empty(max(m, 1))
    bvec = np.empty(max(m, 1))
    diag = sigma2 + tau2 + jitter
    for i in range(n):
        k = 0
        while k < m and nbrs[i, k] >= 0:
            k += 1
        quad = _solve_site(S, order[i], nbrs[i], k, code, phi, sigma2, diag, L, y, bvec)
        d = diag - quad
        if quad < 0.0 or not d > 0.0:
            return False
        d_out[i] = d
        for a in range(k):
            b_out[i, a] = bvec[a]
        for a in range(k, m):
            b_out[i, a] = 0.0
    return True


@njit(cache=True)
def loglik(S, order, nbrs, r, code, phi, sigma2, tau2, jitter):
    """Vecchia log-likelihood of residuals ``r``; NaN when a conditional variance fails."""
    n, m = nbrs.shape
    L = np.empty((max(m, 1), max(m, 1)))
    y = np.empty(max(m, 1))
    bvec = np.empty(max(m, 1))
    diag = sigma2 + tau2 + jitter
    total = 0.0
    for i in range(n):
        k = 0
        while k < m and nbrs[i, k] >= 0:
            k += 1
        s = order[i]
        quad = _solve_site(S, s, nbrs[i], k, code, phi, sigma2, diag, L, y, bvec)
        d = diag - quad
        if quad < 0.0 or not d > 0.0:
            return np.nan
        mu = 0.0
        for a in range(k):
            mu += bvec[a] * r[nbrs[i, a]]
        e = r[s] - mu
        total += math.log(d) + e * e / d
    return -0.5 * (n * math.log(2.0 * math.pi) + total)


@njit(cache=True)
def predict(S, r, Q, nb, code, phi, sigma2, tau2, jitter, mean_out, var_out):
    """Conditional mean (of residuals) and variance at each query row given its neighbours."""
    n0, k = nb.shape
    npts = S.shape[0]
    # stack training points and one query slot so _solve_site can index both
    X = np.empty((npts + 1, 2))
    X[:npts] = S
    L = np.empty((max(k, 1), max(k, 1)))
    y = np.empty(max(k, 1))
    bvec = np.empty(max(k, 1))
    total = sigma2 + tau2
    for q in range(n0):
        X[npts, 0] = Q[q, 0]
        X[npts, 1] = Q[q, 1]
        quad = _solve_site(X, npts, nb[q], k, code, phi, sigma2, total + jitter, L, y, bvec)
        if quad < 0.0:
            return False
        mu = 0.0
        for a in range(k):
            mu += bvec[a] * r[nb[q, a]]
        mean_out[q] = mu
        # the query's own variance carries no jitter
        var_out[q] = total - quad
    return True


@njit(cache=True)
def maxmin_fill(S, first, order):
    """Greedy maxmin ordering from ``first``; ties resolve to the lowest index."""
    n = S.shape[0]
    mind = np.empty(n)
    for p in range(n):
        mind[p] = _dist(S, p, first)
    mind[first] = -1.0
    order[0] = first
    for i in range(1, n):
        nxt = 0
        best = -1.0
        for p in range(n):
            if mind[p] > best:
                best = mind[p]
                nxt = p
        order[i] = nxt
        mind[nxt] = -1.0
        for p in range(n):
            if mind[p] >= 0.0:
                d = _dist(S, p, nxt)
                if d < mind[p]:
                    mind[p] = d


@njit(cache=True)
def nearest_predecessors_fill(S, order, out):
    """``out[i]`` = the nearest earlier sites of ``order[i]`` by (distance, index)."""
    n, m = out.shape
    bd = np.empty(max(m, 1))
    bi = np.empty(max(m, 1), dtype=np.int64)
    for i in range(1, n):
        s = order[i]
        cnt = 0
        for j in range(i):
            p = order[j]
            d = _dist(S, p, s)
            if cnt == m:
                last = bd[m - 1]
                if d > last or (d == last and p > bi[m - 1]):
                    continue
                pos = m - 1
            else:
                pos = cnt
                cnt += 1
            # insertion keeps (distance, index) ascending
            while pos > 0 and (bd[pos - 1] > d or (bd[pos - 1] == d and bi[pos - 1] > p)):
                bd[pos] = bd[pos - 1]
                bi[pos] = bi[pos - 1]
                pos -= 1
            bd[pos] = d
            bi[pos] = p
        for a in range(cnt):
            out[i, a] = bi[a]
