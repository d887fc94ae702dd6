# cython: language_level=3
"""Compiled inner loops for the regime filter, smoother and simulators.

Every function here has a twin with the same signature and semantics in
``_kernels_py``; ``msnar._core`` picks one at import time.

Conventions: ``logb[k, i]`` is the log emission density of observation
``k + 1`` under regime ``i`` (row 0 is the first observation after
``y_0``).  Return codes are ``-1`` on success, otherwise the zero-based row
at which the predictive density underflowed.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY

cnp.import_array()

BACKEND = "compiled"

cdef double LOG_2PI = 1.8378770664093453


cdef inline Py_ssize_t _step(const double[:, ::1] logb, Py_ssize_t k,
                             const double[:, ::1] A, double* pred,
                             double* filt, double* term) noexcept nogil:
    """One prediction-filter update; overwrites ``pred`` with the next prediction."""
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t i, j
    cdef double mx = -INFINITY
    cdef double s = 0.0
    cdef double v
    for i in range(m):
        if logb[k, i] > mx:
            mx = logb[k, i]
    if mx != mx or mx == INFINITY:
        return k
    if mx > -INFINITY:
        for i in range(m):
            v = pred[i] * exp(logb[k, i] - mx)
            filt[i] = v
            s += v
    if s > 1e-280:
        term[0] = mx + log(s)
    else:
        # predictive mass sits on regimes with negligible emission density
        mx = -INFINITY
        for i in range(m):
            if pred[i] > 0.0:
                v = log(pred[i]) + logb[k, i]
                filt[i] = v
                if v > mx:
                    mx = v
            else:
                filt[i] = -INFINITY
        if mx == -INFINITY or mx != mx:
            return k
        s = 0.0
        for i in range(m):
            v = exp(filt[i] - mx)
            filt[i] = v
            s += v
        term[0] = mx + log(s)
    for i in range(m):
        filt[i] /= s
    s = 0.0
    for j in range(m):
        v = 0.0
        for i in range(m):
            v += filt[i] * A[i, j]
        pred[j] = v
        s += v
    for j in range(m):
        pred[j] /= s
    return -1


def forward_loglik(const double[:, ::1] logb, const double[:, ::1] A,
                   const double[::1] init):
    """Return ``(loglik, status)`` for a full forward pass."""
    cdef Py_ssize_t n = logb.shape[0]
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t k, i, status = -1
    cdef double total = 0.0
    cdef double term = 0.0
    cdef double[::1] pred = np.array(init, dtype=np.float64)
    cdef double[::1] filt = np.empty(m, dtype=np.float64)
    with nogil:
        for k in range(n):
            status = _step(logb, k, A, &pred[0], &filt[0], &term)
            if status >= 0:
                break
            total += term
    return total, status


def forward(const double[:, ::1] logb, const double[:, ::1] A,
            const double[::1] init, double[::1] terms,
            double[:, ::1] predictive, double[:, ::1] filtered):
    """Full forward pass storing per-step terms, predictions and filters.

    ``predictive[k]`` is the regime law used for row ``k`` (before seeing
    it); ``filtered[k]`` is the law after seeing it.
    """
    cdef Py_ssize_t n = logb.shape[0]
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t k, i, status = -1
    cdef double total = 0.0
    cdef double term = 0.0
    cdef double[::1] pred = np.array(init, dtype=np.float64)
    with nogil:
        for k in range(n):
            for i in range(m):
                predictive[k, i] = pred[i]
            status = _step(logb, k, A, &pred[0], &filtered[k, 0], &term)
            if status >= 0:
                break
            terms[k] = term
            total += term
    return total, status


def backward(const double[:, ::1] logb, const double[:, ::1] A,
             const double[::1] terms, const double[:, ::1] filtered,
             double[:, ::1] smoothed, double[:, ::1] xi_sum):
    """Normalised backward recursion.

    Fills ``smoothed`` with P(X_k | all data) and ``xi_sum`` with the
    expected transition counts summed over consecutive pairs.
    """
    cdef Py_ssize_t n = logb.shape[0]
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double s, v
    cdef double[::1] beta = np.ones(m, dtype=np.float64)
    cdef double[::1] nxt = np.empty(m, dtype=np.float64)
    cdef double[::1] ratio = np.empty(m, dtype=np.float64)
    with nogil:
        for i in range(m):
            for j in range(m):
                xi_sum[i, j] = 0.0
        for i in range(m):
            smoothed[n - 1, i] = filtered[n - 1, i]
        for k in range(n - 2, -1, -1):
            for j in range(m):
                ratio[j] = exp(logb[k + 1, j] - terms[k + 1]) * beta[j]
            s = 0.0
            for i in range(m):
                v = 0.0
                for j in range(m):
                    v += A[i, j] * ratio[j]
                    xi_sum[i, j] += filtered[k, i] * A[i, j] * ratio[j]
                nxt[i] = v
                smoothed[k, i] = filtered[k, i] * v
                s += smoothed[k, i]
            for i in range(m):
                smoothed[k, i] /= s
                beta[i] = nxt[i]
    return None


def linear_gaussian_loglik(const double[::1] y, const double[::1] b,
                           const double[::1] rho, const double[::1] sigma,
                           const double[:, ::1] A, const double[::1] init):
    """Fused emission + forward pass for the linear Gaussian family.

    ``sigma`` has one entry per regime.  Returns ``(loglik, status)``.
    """
    cdef Py_ssize_t n = y.shape[0] - 1
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t k, i, status = -1
    cdef double total = 0.0
    cdef double term = 0.0
    cdef double r
    cdef double[::1] pred = np.array(init, dtype=np.float64)
    cdef double[::1] filt = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] row = np.empty((1, m), dtype=np.float64)
    cdef double[::1] lognorm = np.empty(m, dtype=np.float64)
    cdef double[::1] inv = np.empty(m, dtype=np.float64)
    for i in range(m):
        lognorm[i] = -0.5 * LOG_2PI - log(sigma[i])
        inv[i] = 1.0 / sigma[i]
    with nogil:
        for k in range(n):
            for i in range(m):
                r = (y[k + 1] - rho[i] * y[k] - b[i]) * inv[i]
                row[0, i] = lognorm[i] - 0.5 * r * r
            status = _step(row, 0, A, &pred[0], &filt[0], &term)
            if status >= 0:
                status = k
                break
            total += term
    return total, status


def perron_root(const double[:, ::1] Q, double shift, double tol,
                long max_iter):
    """Power iteration for the Perron root of a nonnegative matrix.

    Iterates on ``Q + shift*I`` from the all-ones vector.  Stops when the
    Collatz-Wielandt bracket ``[min (Qx)_i/x_i, max (Qx)_i/x_i]`` is
    narrower than ``tol`` (relative), or when successive midpoint estimates
    differ by less than ``tol`` while the bracket is unavailable.  Returns
    ``(estimate, iterations, converged)`` with the shift removed.
    """
    cdef Py_ssize_t m = Q.shape[0]
    cdef Py_ssize_t i, j
    cdef long it = 0
    cdef double lo, hi, est = 0.0, prev = INFINITY, v, s
    cdef bint converged = False, bracket
    cdef double[::1] x = np.ones(m, dtype=np.float64)
    cdef double[::1] qx = np.empty(m, dtype=np.float64)
    with nogil:
        while it < max_iter:
            it += 1
            s = 0.0
            for i in range(m):
                v = shift * x[i]
                for j in range(m):
                    v += Q[i, j] * x[j]
                qx[i] = v
                s += v
            lo = INFINITY
            hi = -INFINITY
            bracket = True
            for i in range(m):
                if x[i] > 0.0:
                    v = qx[i] / x[i]
                    if v < lo:
                        lo = v
                    if v > hi:
                        hi = v
                else:
                    bracket = False
            if s <= 0.0:
                est = 0.0
                converged = True
                break
            est = 0.5 * (lo + hi)
            if bracket and hi - lo <= tol * (fabs(hi) if fabs(hi) > 1.0 else 1.0):
                converged = True
                break
            if not bracket and fabs(est - prev) < tol:
                converged = True
                break
            prev = est
            for i in range(m):
                x[i] = qx[i] / s
    return est - shift, it, bool(converged)


def simulate_chain(const double[:, ::1] cum_A, const double[::1] cum_init,
                   const double[::1] u):
    """Regime path by inverse-CDF sampling from cumulative rows."""
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t m = cum_A.shape[0]
    cdef Py_ssize_t k, j, cur
    x_arr = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] x = x_arr
    if n == 0:
        return x_arr
    with nogil:
        cur = m - 1
        for j in range(m):
            if u[0] < cum_init[j]:
                cur = j
                break
        x[0] = cur
        for k in range(1, n):
            j = 0
            while j < m - 1 and u[k] >= cum_A[cur, j]:
                j += 1
            cur = j
            x[k] = cur
    return x_arr


def linear_recursion(const Py_ssize_t[::1] x, const double[::1] b,
                     const double[::1] rho, const double[::1] sigma,
                     const double[::1] e, double y0):
    """``y_k = rho[x_k] y_{k-1} + b[x_k] + sigma[x_k] e_k``; returns y_0..y_n."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, r
    y_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] y = y_arr
    y[0] = y0
    with nogil:
        for k in range(n):
            r = x[k]
            y[k + 1] = rho[r] * y[k] + b[r] + sigma[r] * e[k]
    return y_arr
