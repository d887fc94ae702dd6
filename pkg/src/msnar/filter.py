"""Prediction filter, exact log-likelihood and filter-forgetting diagnostics.

The per-step term

    D_k = log sum_{x_k} sum_{x_{k-1}} p(y_k | y_{k-1}, x_k) a[x_{k-1}, x_k] P(x_{k-1} | y_{0:k-1})

is the log predictive density of ``y_k``; the log-likelihood conditional on
``y_0`` is ``sum_k D_k``.  ``filter_step`` is a readable reference
implementation; bulk evaluation goes through the kernels in ``_core``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._core import kernels
from .errors import DomainError, GuardError, NumericError
from .model import ModelSpec, emission_logdensities, emission_logdensity

BRUTE_FORCE_LIMIT = 10**7

#: re-initialisation law used for windowed terms
WINDOW_INIT = "model initial distribution (stationary law unless overridden)"


@dataclass(frozen=True, eq=False)
class FilterState:
    predictive: np.ndarray
    filtered: np.ndarray | None
    loglik: float
    k: int


@dataclass(frozen=True, eq=False)
class FilterOutput:
    """Bulk forward-pass results for observations ``y_1..y_n``."""

    loglik: float
    terms: np.ndarray
    predictive: np.ndarray
    filtered: np.ndarray


@dataclass
class ForgettingRecord:
    k: int
    l: int
    d_k0: float
    d_kl: float
    gap: float
    bound: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "l": self.l,
            "d_k0": self.d_k0,
            "d_kl": self.d_kl,
            "gap": self.gap,
            "bound": self.bound,
            "reinit": WINDOW_INIT,
        }


def filter_init(spec: ModelSpec, initial=None) -> FilterState:
    p = spec.initial_distribution if initial is None else np.asarray(initial, dtype=float)
    return FilterState(predictive=np.array(p, dtype=float), filtered=None, loglik=0.0, k=1)


def filter_step(state: FilterState, y_prev: float, y: float, spec: ModelSpec):
    """Advance the filter by one observation; returns ``(new_state, D_k)``."""
    logd = np.array([emission_logdensity(y, y_prev, i, spec) for i in range(spec.m)])
    with np.errstate(divide="ignore"):
        lw = np.log(state.predictive) + logd
    mx = lw.max()
    if not np.isfinite(mx):
        raise NumericError(f"predictive density underflowed at step {state.k}")
    w = np.exp(lw - mx)
    s = w.sum()
    term = float(mx + math.log(s))
    filtered = w / s
    pred = filtered @ spec.A
    pred /= pred.sum()
    return FilterState(pred, filtered, state.loglik + term, state.k + 1), term


def _check_series(y):
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < 2:
        raise DomainError("need a series with at least two observations (y_0 and y_1)")
    return y


def _raise_status(status, offset=0):
    if status >= 0:
        raise NumericError(f"predictive density underflowed at step {status + 1 + offset}")


def log_likelihood(spec: ModelSpec, y) -> float:
    """``l_n = log p(y_{1:n} | y_0)``."""
    y = _check_series(y)
    init = np.ascontiguousarray(spec.initial_distribution, dtype=float)
    A = np.ascontiguousarray(spec.A)
    if spec.is_linear_gaussian:
        total, status = kernels.linear_gaussian_loglik(
            y,
            np.ascontiguousarray(spec.b),
            np.ascontiguousarray(spec.rho),
            np.ascontiguousarray(spec.sigma),
            A,
            init,
        )
    else:
        total, status = kernels.forward_loglik(emission_logdensities(spec, y), A, init)
    _raise_status(status)
    return float(total)


def _forward(logb, A, init) -> FilterOutput:
    n, m = logb.shape
    terms = np.empty(n)
    pred = np.empty((n, m))
    filt = np.empty((n, m))
    total, status = kernels.forward(
        logb, np.ascontiguousarray(A), np.ascontiguousarray(init, dtype=float), terms, pred, filt
    )
    _raise_status(status)
    return FilterOutput(float(total), terms, pred, filt)


def run_filter(spec: ModelSpec, y, initial=None) -> FilterOutput:
    """Forward pass keeping per-step terms and regime laws."""
    y = _check_series(y)
    init = spec.initial_distribution if initial is None else initial
    return _forward(emission_logdensities(spec, y), spec.A, init)


def step_terms(spec: ModelSpec, y) -> np.ndarray:
    """Per-observation terms ``D_1..D_n``."""
    return run_filter(spec, y).terms


def brute_force_loglik(spec: ModelSpec, y) -> float:
    """Marginal log-likelihood by enumerating all ``m**n`` regime paths.

    Independent of the filter: each path's joint log density is built from
    scalar ``emission_logdensity`` calls and the transition matrix, then the
    paths are combined with log-sum-exp.
    """
    y = _check_series(y)
    m, n = spec.m, y.shape[0] - 1
    if m**n > BRUTE_FORCE_LIMIT:
        raise GuardError(f"m**n = {m}**{n} exceeds the enumeration limit {BRUTE_FORCE_LIMIT}")
    table = [[emission_logdensity(y[k + 1], y[k], i, spec) for i in range(m)] for k in range(n)]
    with np.errstate(divide="ignore"):
        log_init = np.log(spec.initial_distribution)
        log_A = np.log(spec.A)
    paths = []
    for xs in itertools.product(range(m), repeat=n):
        v = log_init[xs[0]] + table[0][xs[0]]
        for k in range(1, n):
            v += log_A[xs[k - 1], xs[k]] + table[k][xs[k]]
        paths.append(v)
    return float(logsumexp(paths))


def brute_force_posterior(spec: ModelSpec, y) -> np.ndarray:
    """``P(x_k = i | y_{0:n})`` by path enumeration (small instances only)."""
    y = _check_series(y)
    m, n = spec.m, y.shape[0] - 1
    if m**n > BRUTE_FORCE_LIMIT:
        raise GuardError(f"m**n = {m}**{n} exceeds the enumeration limit {BRUTE_FORCE_LIMIT}")
    table = [[emission_logdensity(y[k + 1], y[k], i, spec) for i in range(m)] for k in range(n)]
    with np.errstate(divide="ignore"):
        log_init = np.log(spec.initial_distribution)
        log_A = np.log(spec.A)
    combos = list(itertools.product(range(m), repeat=n))
    logp = np.empty(len(combos))
    for c, xs in enumerate(combos):
        v = log_init[xs[0]] + table[0][xs[0]]
        for k in range(1, n):
            v += log_A[xs[k - 1], xs[k]] + table[k][xs[k]]
        logp[c] = v
    w = np.exp(logp - logsumexp(logp))
    post = np.zeros((n, m))
    for c, xs in enumerate(combos):
        for k, i in enumerate(xs):
            post[k, i] += w[c]
    return post


def forgetting_bound(delta: float, k: int, l: int) -> float:
    """``2 / delta * (1 - delta)**(k - 1 - l)``."""
    return 2.0 / delta * (1.0 - delta) ** (k - 1 - l)


def _windowed_terms(logb, A, init, l):
    """``D_{k,l}`` for every ``k > l``: filter restarted at step ``l + 1``."""
    out = _forward(np.ascontiguousarray(logb[l:]), A, init)
    return out.terms


def windowed_step_terms(spec: ModelSpec, y, k: int, l: int) -> ForgettingRecord:
    """Compare ``D_{k,0}`` (full history) with ``D_{k,l}`` (filter restarted at ``l + 1``)."""
    y = _check_series(y)
    n = y.shape[0] - 1
    if not 0 <= l < k <= n:
        raise DomainError(f"need 0 <= l < k <= n, got l={l}, k={k}, n={n}")
    delta = spec.transition.delta
    if delta <= 0:
        raise DomainError("forgetting bound requires min a_ij > 0")
    logb = emission_logdensities(spec, y[: k + 1])
    init = spec.initial_distribution
    d_k0 = float(_windowed_terms(logb, spec.A, init, 0)[k - 1])
    d_kl = float(_windowed_terms(logb, spec.A, init, l)[k - 1 - l])
    return ForgettingRecord(k, l, d_k0, d_kl, abs(d_kl - d_k0), forgetting_bound(delta, k, l))


def forgetting_sweep(spec: ModelSpec, y, max_lag: int | None = None):
    """All windowed gaps at once.

    Returns ``(gaps, bounds)`` as ``(n, L)`` arrays indexed by ``[k - 1, lag - 1]``
    with ``lag = k - l`` in ``1..L``; entries with ``l < 0`` are NaN.
    """
    y = _check_series(y)
    n = y.shape[0] - 1
    delta = spec.transition.delta
    if delta <= 0:
        raise DomainError("forgetting bound requires min a_ij > 0")
    L = n if max_lag is None else min(max_lag, n)
    logb = emission_logdensities(spec, y)
    init = spec.initial_distribution
    full = _windowed_terms(logb, spec.A, init, 0)
    gaps = np.full((n, L), np.nan)
    for l in range(0, n):
        win = _windowed_terms(logb, spec.A, init, l)
        ks = np.arange(l + 1, min(n, l + L) + 1)
        gaps[ks - 1, ks - l - 1] = np.abs(win[ks - 1 - l] - full[ks - 1])
    lags = np.arange(1, L + 1)
    bounds = 2.0 / delta * (1.0 - delta) ** (lags - 1)
    return gaps, np.broadcast_to(bounds, gaps.shape)


def smoothed_regime_probabilities(spec: ModelSpec, y) -> np.ndarray:
    """``P(x_k = i | y_{0:n})`` for ``k = 1..n`` (rows) by forward-backward."""
    return forward_backward(spec, y)[1]


def forward_backward(spec: ModelSpec, y):
    """Returns ``(loglik, smoothed, xi_sum)``; ``xi_sum[i, j]`` is the expected
    number of ``i -> j`` transitions between consecutive observed steps."""
    y = _check_series(y)
    logb = emission_logdensities(spec, y)
    fwd = _forward(logb, spec.A, spec.initial_distribution)
    n, m = logb.shape
    smoothed = np.empty((n, m))
    xi_sum = np.zeros((m, m))
    kernels.backward(logb, np.ascontiguousarray(spec.A), fwd.terms, fwd.filtered, smoothed, xi_sum)
    return fwd.loglik, smoothed, xi_sum
