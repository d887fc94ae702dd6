"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same signatures, same return conventions, same arithmetic order where it
matters, so either backend can be swapped in.  Slow: use only when the
extension is unavailable or for cross-checking.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_LOG_2PI = 1.8378770664093453


def _step(logb_row, A, pred, filt):
    m = len(pred)
    mx = max(logb_row)
    if mx != mx or mx == math.inf:
        return None
    s = 0.0
    if mx > -math.inf:
        for i in range(m):
            v = pred[i] * math.exp(logb_row[i] - mx)
            filt[i] = v
            s += v
    if s > 1e-280:
        term = mx + math.log(s)
    else:
        mx = -math.inf
        for i in range(m):
            if pred[i] > 0.0:
                v = math.log(pred[i]) + logb_row[i]
                filt[i] = v
                if v > mx:
                    mx = v
            else:
                filt[i] = -math.inf
        if mx == -math.inf or mx != mx:
            return None
        s = 0.0
        for i in range(m):
            v = math.exp(filt[i] - mx)
            filt[i] = v
            s += v
        term = mx + math.log(s)
    for i in range(m):
        filt[i] /= s
    s = 0.0
    for j in range(m):
        v = 0.0
        for i in range(m):
            v += filt[i] * A[i][j]
        pred[j] = v
        s += v
    for j in range(m):
        pred[j] /= s
    return term


def forward_loglik(logb, A, init):
    logb = np.asarray(logb).tolist()
    A = np.asarray(A).tolist()
    pred = [float(p) for p in init]
    filt = [0.0] * len(pred)
    total = 0.0
    for k, row in enumerate(logb):
        term = _step(row, A, pred, filt)
        if term is None:
            return total, k
        total += term
    return total, -1


def forward(logb, A, init, terms, predictive, filtered):
    rows = np.asarray(logb).tolist()
    A = np.asarray(A).tolist()
    pred = [float(p) for p in init]
    filt = [0.0] * len(pred)
    total = 0.0
    for k, row in enumerate(rows):
        predictive[k, :] = pred
        term = _step(row, A, pred, filt)
        if term is None:
            return total, k
        filtered[k, :] = filt
        terms[k] = term
        total += term
    return total, -1


def backward(logb, A, terms, filtered, smoothed, xi_sum):
    logb = np.asarray(logb)
    A = np.asarray(A)
    n, m = logb.shape
    beta = np.ones(m)
    xi_sum[:, :] = 0.0
    smoothed[n - 1, :] = filtered[n - 1, :]
    for k in range(n - 2, -1, -1):
        ratio = np.exp(logb[k + 1] - terms[k + 1]) * beta
        nxt = A @ ratio
        xi_sum[:, :] += filtered[k][:, None] * A * ratio[None, :]
        row = filtered[k] * nxt
        smoothed[k, :] = row / row.sum()
        beta = nxt
    return None


def linear_gaussian_loglik(y, b, rho, sigma, A, init):
    y = np.asarray(y, dtype=float)
    b = np.asarray(b, dtype=float)
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    r = (y[1:, None] - rho[None, :] * y[:-1, None] - b[None, :]) / sigma[None, :]
    logb = -0.5 * _LOG_2PI - np.log(sigma)[None, :] - 0.5 * r * r
    return forward_loglik(logb, A, init)


def perron_root(Q, shift, tol, max_iter):
    Q = np.asarray(Q, dtype=float).tolist()
    m = len(Q)
    x = [1.0] * m
    prev = math.inf
    est = 0.0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        qx = [shift * x[i] + sum(Q[i][j] * x[j] for j in range(m)) for i in range(m)]
        s = sum(qx)
        bracket = all(v > 0.0 for v in x)
        if bracket:
            ratios = [qx[i] / x[i] for i in range(m)]
        else:
            ratios = [qx[i] / x[i] for i in range(m) if x[i] > 0.0]
        lo, hi = min(ratios), max(ratios)
        if s <= 0.0:
            est = 0.0
            converged = True
            break
        est = 0.5 * (lo + hi)
        if bracket and hi - lo <= tol * max(abs(hi), 1.0):
            converged = True
            break
        if not bracket and abs(est - prev) < tol:
            converged = True
            break
        prev = est
        x = [v / s for v in qx]
    return est - shift, it, converged


def simulate_chain(cum_A, cum_init, u):
    cum_A = np.asarray(cum_A).tolist()
    cum_init = list(cum_init)
    n = len(u)
    m = len(cum_A)
    x = np.empty(n, dtype=np.intp)
    if n == 0:
        return x
    cur = m - 1
    for j in range(m):
        if u[0] < cum_init[j]:
            cur = j
            break
    x[0] = cur
    for k in range(1, n):
        j = 0
        row = cum_A[cur]
        uk = u[k]
        while j < m - 1 and uk >= row[j]:
            j += 1
        cur = j
        x[k] = cur
    return x


def linear_recursion(x, b, rho, sigma, e, y0):
    n = len(x)
    y = np.empty(n + 1)
    y[0] = y0
    prev = float(y0)
    b = list(b)
    rho = list(rho)
    sigma = list(sigma)
    for k, r in enumerate(np.asarray(x).tolist()):
        prev = rho[r] * prev + b[r] + sigma[r] * e[k]
        y[k + 1] = prev
    return y
