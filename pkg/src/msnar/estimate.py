"""Maximum-likelihood estimation for linear Gaussian switching AR models.

Parameters are optimised in an unconstrained vector::

    [transition logits (m rows x (m-1), last logit pinned to 0)]
    [regime coefficients: (b_i, rho_i) per regime | b_1..b_m, rho | b_1..b_m]
    [log sigma (shared) | log sigma_i per regime]

The middle block depends on the slope mode: ``"free"`` (one slope per
regime), ``"shared"`` (one slope for all regimes) or ``"zero"`` (slopes
pinned to 0; the model is then a Gaussian hidden Markov model).
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize, stats

from ._core import kernels
from .errors import DegenerateRegimeError, DomainError, LabelTieError, NumericError, OptimizationError
from .filter import forward_backward, log_likelihood, step_terms
from .model import ModelSpec, NoiseSpec, RegimeParams, TransitionMatrix, permute_regimes

LOGIT_CLIP = 30.0
LOG_SIGMA_CLIP = 10.0
SLOPE_MODES = ("free", "shared", "zero")
SIGMA_MODES = ("shared", "regime")
EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# parameter layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamLayout:
    m: int
    slopes: str = "free"
    sigma: str = "shared"

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if self.slopes not in SLOPE_MODES:
            raise DomainError(f"slopes must be one of {SLOPE_MODES}")
        if self.sigma not in SIGMA_MODES:
            raise DomainError(f"sigma must be one of {SIGMA_MODES}")

    @classmethod
    def for_spec(cls, spec: ModelSpec, slopes: str = "free") -> "ParamLayout":
        return cls(spec.m, slopes, "regime" if spec.noise.per_regime else "shared")

    @property
    def n_logits(self) -> int:
        return self.m * (self.m - 1)

    @property
    def n_coef(self) -> int:
        return {"free": 2 * self.m, "shared": self.m + 1, "zero": self.m}[self.slopes]

    @property
    def n_sigma(self) -> int:
        return 1 if self.sigma == "shared" else self.m

    @property
    def size(self) -> int:
        return self.n_logits + self.n_coef + self.n_sigma

    @property
    def names(self) -> list[str]:
        m = self.m
        out = [f"logit[{i},{j}]" for i in range(m) for j in range(m - 1)]
        if self.slopes == "free":
            for i in range(m):
                out += [f"b[{i}]", f"rho[{i}]"]
        else:
            out += [f"b[{i}]" for i in range(m)]
            if self.slopes == "shared":
                out.append("rho")
        if self.sigma == "shared":
            out.append("log_sigma")
        else:
            out += [f"log_sigma[{i}]" for i in range(m)]
        return out

    @property
    def natural_names(self) -> list[str]:
        m = self.m
        out = [f"a[{i},{j}]" for i in range(m) for j in range(m - 1)]
        out += [f"b[{i}]" for i in range(m)]
        if self.slopes != "zero":
            out += [f"rho[{i}]" for i in range(m)] if self.slopes == "free" else ["rho"]
        out += ["sigma"] if self.sigma == "shared" else [f"sigma[{i}]" for i in range(m)]
        return out

    def clip(self, v: np.ndarray) -> tuple[np.ndarray, bool]:
        """Soft compactness: logits to +-30 and log sigma to +-10."""
        w = np.array(v, dtype=float)
        k = self.n_logits
        w[:k] = np.clip(w[:k], -LOGIT_CLIP, LOGIT_CLIP)
        w[-self.n_sigma :] = np.clip(w[-self.n_sigma :], -LOG_SIGMA_CLIP, LOG_SIGMA_CLIP)
        return w, bool(np.any(w != v))

    def split(self, v):
        """Natural pieces ``(A, b, rho, sigma)`` without building a ``ModelSpec``."""
        v = np.asarray(v, dtype=float)
        m = self.m
        k = self.n_logits
        if m == 1:
            A = np.ones((1, 1))
        else:
            z = np.concatenate([v[:k].reshape(m, m - 1), np.zeros((m, 1))], axis=1)
            z -= z.max(axis=1, keepdims=True)
            A = np.exp(z)
            A /= A.sum(axis=1, keepdims=True)
        c = v[k : k + self.n_coef]
        if self.slopes == "free":
            b, rho = c[0::2].copy(), c[1::2].copy()
        elif self.slopes == "shared":
            b, rho = c[:m].copy(), np.full(m, c[m])
        else:
            b, rho = c.copy(), np.zeros(m)
        sigma = np.exp(v[k + self.n_coef :])
        return A, b, rho, sigma

    def constrain(self, v) -> ModelSpec:
        A, b, rho, sigma = self.split(v)
        return ModelSpec(
            TransitionMatrix(A), RegimeParams(np.column_stack([b, rho])), NoiseSpec(sigma)
        )

    def unconstrain(self, spec: ModelSpec) -> np.ndarray:
        if spec.m != self.m:
            raise DomainError(f"spec has m = {spec.m}, layout expects {self.m}")
        A = spec.A
        m = self.m
        with np.errstate(divide="ignore"):
            logits = (np.log(A[:, :-1]) - np.log(A[:, -1:])).ravel() if m > 1 else np.zeros(0)
        logits = np.clip(logits, -LOGIT_CLIP, LOGIT_CLIP)
        b, rho = spec.b, spec.rho
        if self.slopes == "free":
            coef = np.column_stack([b, rho]).ravel()
        elif self.slopes == "shared":
            if np.ptp(rho) > 0:
                raise DomainError("shared-slope layout needs equal slopes")
            coef = np.concatenate([b, rho[:1]])
        else:
            if np.any(rho != 0):
                raise DomainError("zero-slope layout needs all slopes equal to 0")
            coef = np.array(b, dtype=float)
        sig = spec.noise.sigma
        if self.sigma == "shared":
            if spec.noise.per_regime and np.ptp(sig) > 0:
                raise DomainError("shared-sigma layout needs a common sigma")
            lsig = np.log(sig[:1])
        else:
            lsig = np.log(spec.sigma)
        return np.concatenate([logits, coef, lsig])

    def natural(self, spec: ModelSpec) -> np.ndarray:
        parts = [spec.A[:, :-1].ravel(), spec.b]
        if self.slopes == "free":
            parts.append(spec.rho)
        elif self.slopes == "shared":
            parts.append(spec.rho[:1])
        parts.append(spec.noise.sigma[:1] if self.sigma == "shared" else spec.sigma)
        return np.concatenate(parts)


def constrain(v, layout: ParamLayout) -> ModelSpec:
    return layout.constrain(v)


def unconstrain(spec: ModelSpec, layout: ParamLayout | None = None) -> np.ndarray:
    return (layout or ParamLayout.for_spec(spec)).unconstrain(spec)


def _stationary(A: np.ndarray) -> np.ndarray:
    m = A.shape[0]
    if m == 1:
        return np.ones(1)
    if m == 2:
        p, q = A[0, 1], A[1, 0]
        return np.array([q, p]) / (p + q)
    M = A.T - np.eye(m)
    M[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    mu = np.clip(np.linalg.solve(M, rhs), 0.0, None)
    return mu / mu.sum()


def data_digest(y) -> str:
    return hashlib.sha1(np.ascontiguousarray(y, dtype=float).tobytes()).hexdigest()


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


class InformationEstimate(NamedTuple):
    score: np.ndarray
    information: np.ndarray
    opg: np.ndarray


@dataclass
class FitResult:
    spec: ModelSpec
    loglik: float
    layout: ParamLayout
    params: np.ndarray
    n_obs: int
    method: str
    iterations: int
    n_fev: int
    converged: bool
    permutation: np.ndarray
    trace: list[float]
    data_digest: str
    initial_loglik: float
    clipped: bool = False
    score: np.ndarray | None = None
    information: np.ndarray | None = None
    opg: np.ndarray | None = None
    standard_errors: np.ndarray | None = None
    natural_standard_errors: np.ndarray | None = None
    near_singular: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def param_names(self) -> list[str]:
        return self.layout.names

    @property
    def natural_params(self) -> np.ndarray:
        return self.layout.natural(self.spec)

    def to_dict(self) -> dict:
        from .model import spec_to_dict

        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        eig = None
        if self.information is not None:
            eig = np.linalg.eigvalsh(self.information).tolist()
        return {
            "model": spec_to_dict(self.spec),
            "loglik": self.loglik,
            "initial_loglik": self.initial_loglik,
            "n_obs": self.n_obs,
            "layout": {"m": self.layout.m, "slopes": self.layout.slopes, "sigma": self.layout.sigma},
            "param_names": self.param_names,
            "params": arr(self.params),
            "standard_errors": arr(self.standard_errors),
            "natural_names": self.layout.natural_names,
            "natural_params": arr(self.natural_params),
            "natural_standard_errors": arr(self.natural_standard_errors),
            "score": arr(self.score),
            "information": arr(self.information),
            "information_eigenvalues": eig,
            "opg": arr(self.opg),
            "near_singular": self.near_singular,
            "permutation": arr(self.permutation),
            "trace": {
                "method": self.method,
                "iterations": self.iterations,
                "function_evaluations": self.n_fev,
                "converged": self.converged,
                "loglik": list(self.trace),
                "clipped": self.clipped,
            },
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------


class _Objective:
    """Negative log-likelihood in unconstrained coordinates (with clipping)."""

    def __init__(self, y, layout: ParamLayout):
        self.y = np.ascontiguousarray(y, dtype=float)
        self.layout = layout
        self.nfev = 0
        self.clipped = False

    def loglik(self, v) -> float:
        A, b, rho, sigma = self.layout.split(v)
        if sigma.shape[0] == 1:
            sigma = np.full(self.layout.m, sigma[0])
        total, status = kernels.linear_gaussian_loglik(
            self.y, b, rho, sigma, np.ascontiguousarray(A), _stationary(A)
        )
        if status >= 0 or not math.isfinite(total):
            return -math.inf
        return float(total)

    def __call__(self, v) -> float:
        self.nfev += 1
        w, hit = self.layout.clip(v)
        if hit:
            self.clipped = True
        ll = self.loglik(w)
        return -ll if math.isfinite(ll) else 1e300


# ---------------------------------------------------------------------------
# starting values
# ---------------------------------------------------------------------------


def _ols_ar1(y):
    y = np.asarray(y, dtype=float)
    X = np.column_stack([np.ones(y.shape[0] - 1), y[:-1]])
    coef, *_ = np.linalg.lstsq(X, y[1:], rcond=None)
    resid = y[1:] - X @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def ar1_mle(y):
    """Closed-form conditional Gaussian AR(1) MLE ``(b, rho, sigma)``."""
    return _ols_ar1(y)


def default_start(y, layout: ParamLayout) -> ModelSpec:
    """Data-driven starting model: AR(1) least squares spread across regimes."""
    m = layout.m
    b0, rho0, s = _ols_ar1(y)
    s = max(s, 1e-3)
    if layout.slopes == "zero":
        centre, spread, rho0 = float(np.mean(y)), max(float(np.std(y)), 1e-3), 0.0
    else:
        centre, spread = b0, s
    offsets = np.linspace(-1.0, 1.0, m) if m > 1 else np.zeros(1)
    b = centre + spread * offsets
    A = np.full((m, m), 0.1 / (m - 1)) if m > 1 else np.ones((1, 1))
    np.fill_diagonal(A, 0.9 if m > 1 else 1.0)
    sigma_scale = s / math.sqrt(2.0) if m > 1 else s
    sigma = np.full(layout.n_sigma, sigma_scale)
    return ModelSpec.linear(A, b, np.full(m, rho0), sigma)


def random_start(y, layout: ParamLayout, rng) -> ModelSpec:
    m = layout.m
    _, rho0, s = _ols_ar1(y)
    s = max(s, 1e-3)
    if m > 1:
        stay = rng.uniform(0.5, 0.95, size=m)
        A = np.empty((m, m))
        for i in range(m):
            rest = rng.dirichlet(np.ones(m - 1)) * (1 - stay[i])
            A[i] = np.insert(rest, i, stay[i])
    else:
        A = np.ones((1, 1))
    qs = np.sort(rng.uniform(0.1, 0.9, size=m))
    if layout.slopes == "free":
        rho = rng.uniform(-0.3, 0.9, size=m)
    elif layout.slopes == "shared":
        rho = np.full(m, rng.uniform(-0.3, 0.9))
    else:
        rho = np.zeros(m)
    centre = np.asarray(y[1:]) - rho.mean() * np.asarray(y[:-1])
    b = np.quantile(centre, qs)
    sigma = s * rng.uniform(0.4, 1.2, size=layout.n_sigma)
    return ModelSpec.linear(A, b, rho, sigma)


def _coerce_start(spec: ModelSpec, layout: ParamLayout) -> ModelSpec:
    """Project a start onto the layout (shared slope -> mean slope, etc.)."""
    rho = spec.rho
    if layout.slopes == "shared":
        rho = np.full(layout.m, float(np.mean(rho)))
    elif layout.slopes == "zero":
        rho = np.zeros(layout.m)
    sig = spec.sigma
    sig = np.array([float(np.mean(sig))]) if layout.sigma == "shared" else sig
    return ModelSpec.linear(spec.A, spec.b, rho, sig)


# ---------------------------------------------------------------------------
# label canonicalisation
# ---------------------------------------------------------------------------


def canonicalize_labels(spec: ModelSpec):
    """Sort regimes lexicographically by ``(rho_i, b_i, sigma_i)``.

    Returns ``(canonical_spec, perm)`` where new regime ``j`` is old regime
    ``perm[j]``.  Custom families sort by their parameter rows, last column
    first.
    """
    theta = spec.regimes.theta
    sigma = spec.sigma
    keys = [sigma] + [theta[:, c] for c in range(theta.shape[1])]
    perm = np.lexsort(keys)
    rows = np.column_stack([theta[:, ::-1], sigma])[perm]
    for a, b in zip(rows[:-1], rows[1:]):
        if np.array_equal(a, b):
            raise LabelTieError("regimes are indistinguishable: all sort keys tie")
    return permute_regimes(spec, perm), perm


# ---------------------------------------------------------------------------
# information
# ---------------------------------------------------------------------------


def score_and_information(spec: ModelSpec, y, layout: ParamLayout | None = None) -> InformationEstimate:
    """Finite-difference score and information of ``l_n / n`` at ``spec``.

    Returns the gradient, the negative Hessian and the outer product of the
    per-observation score increments, all in the unconstrained coordinates
    of ``layout``.
    """
    layout = layout or ParamLayout.for_spec(spec)
    y = np.ascontiguousarray(y, dtype=float)
    n = y.shape[0] - 1
    obj = _Objective(y, layout)
    v0 = layout.unconstrain(spec)
    p = v0.shape[0]
    names = layout.names

    def f(v):
        val = obj.loglik(v) / n
        return val

    def check(val, j):
        if not np.all(np.isfinite(val)):
            raise NumericError(f"non-finite finite difference in coordinate {names[j]}")
        return val

    h1 = EPS ** (1 / 3) * np.maximum(1.0, np.abs(v0))
    h2 = EPS ** (1 / 4) * np.maximum(1.0, np.abs(v0))
    f0 = f(v0)
    grad = np.empty(p)
    scores = np.empty((n, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = h1[j]
        fp, fm = f(v0 + e), f(v0 - e)
        grad[j] = check((fp - fm) / (2 * h1[j]), j)
        tp = step_terms(layout.constrain(v0 + e), y)
        tm = step_terms(layout.constrain(v0 - e), y)
        scores[:, j] = check((tp - tm) / (2 * h1[j]), j)
    H = np.empty((p, p))
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = h2[i]
        H[i, i] = check((f(v0 + 2 * ei) - 2 * f0 + f(v0 - 2 * ei)) / (4 * h2[i] ** 2), i)
        for j in range(i):
            ej = np.zeros(p)
            ej[j] = h2[j]
            val = (f(v0 + ei + ej) - f(v0 + ei - ej) - f(v0 - ei + ej) + f(v0 - ei - ej)) / (
                4 * h2[i] * h2[j]
            )
            H[i, j] = H[j, i] = check(val, i)
    opg = scores.T @ scores / n
    return InformationEstimate(grad, -H, opg)


def _attach_information(res: FitResult, y) -> None:
    est = score_and_information(res.spec, y, res.layout)
    J = 0.5 * (est.information + est.information.T)
    res.score, res.information, res.opg = est.score, J, est.opg
    eig = np.linalg.eigvalsh(J)
    n = res.n_obs
    if eig.min() < -1e-8 or eig.min() <= eig.max() * 1e-12:
        res.near_singular = True
        res.warnings.append("information estimate is singular or indefinite")
        res.standard_errors = np.full(J.shape[0], np.nan)
        res.natural_standard_errors = np.full(len(res.layout.natural_names), np.nan)
        return
    cov = np.linalg.inv(J) / n
    res.standard_errors = np.sqrt(np.clip(np.diag(cov), 0, None))
    # delta method for the natural parameters
    v0 = res.params
    h = EPS ** (1 / 3) * np.maximum(1.0, np.abs(v0))
    jac = np.empty((len(res.layout.natural_names), v0.shape[0]))
    for j in range(v0.shape[0]):
        e = np.zeros_like(v0)
        e[j] = h[j]
        jac[:, j] = (
            res.layout.natural(res.layout.constrain(v0 + e))
            - res.layout.natural(res.layout.constrain(v0 - e))
        ) / (2 * h[j])
    res.natural_standard_errors = np.sqrt(np.clip(np.diag(jac @ cov @ jac.T), 0, None))


# ---------------------------------------------------------------------------
# direct maximisation
# ---------------------------------------------------------------------------


def _simplex(obj: _Objective, v0, tol: float, max_restarts: int, maxfev: int):
    p = v0.shape[0]
    v = np.array(v0, dtype=float)
    fv = obj(v)
    trace = [-fv]
    nit = 0
    converged = False
    step = 0.25
    for _ in range(max_restarts):
        simplex = np.vstack([v] + [v + step * np.eye(p)[j] for j in range(p)])
        res = optimize.minimize(
            obj,
            v,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": 1e-8,
                "fatol": 1e-10,
                "maxfev": maxfev,
                "adaptive": p > 4,
            },
        )
        nit += res.nit
        improvement = fv - res.fun
        if res.fun < fv:
            v, fv = res.x, res.fun
        trace.append(-fv)
        if improvement < tol and res.success:
            converged = True
            break
        step = 0.05
    return v, fv, nit, converged, trace


def _quasi_newton(obj: _Objective, v0, tol: float, maxfev: int):
    res = optimize.minimize(obj, v0, method="BFGS", options={"gtol": 1e-6, "maxiter": maxfev})
    v, fv = res.x, res.fun
    # polish with a simplex cycle so the stopping rule matches the default path
    v, fv, nit, converged, trace = _simplex(obj, v, tol, 3, maxfev)
    return v, fv, res.nit + nit, converged, [-obj(v0)] + trace


def fit_mle(
    y,
    init: ModelSpec | str | None = None,
    m: int | None = None,
    *,
    slopes: str = "free",
    sigma: str | None = None,
    method: str = "simplex",
    starts: int = 10,
    seed: int = 0,
    information: bool = True,
    tol: float = 1e-8,
    max_restarts: int = 20,
    maxfev: int | None = None,
) -> FitResult:
    """Maximise the exact log-likelihood over all parameters.

    ``init`` is a starting ``ModelSpec``, ``"multistart"`` (``starts`` seeded
    random starts plus the data-driven one), or ``None`` (data-driven
    start).  The best local maximum is returned with canonical labels.
    """
    y = np.ascontiguousarray(y, dtype=float)
    if isinstance(init, ModelSpec):
        m = init.m if m is None else m
        if sigma is None:
            sigma = "regime" if init.noise.per_regime else "shared"
    if m is None:
        raise DomainError("pass m or a starting ModelSpec")
    layout = ParamLayout(m, slopes, sigma or "shared")
    notes = []
    if y.shape[0] - 1 < 10 * layout.size:
        msg = f"only {y.shape[0] - 1} observations for {layout.size} parameters"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    if isinstance(init, ModelSpec):
        starts_list = [_coerce_start(init, layout)]
    elif init == "multistart":
        rng = np.random.default_rng(seed)
        starts_list = [default_start(y, layout)] + [
            random_start(y, layout, rng) for _ in range(starts)
        ]
    elif init is None:
        starts_list = [default_start(y, layout)]
    else:
        raise DomainError(f"init must be a ModelSpec, 'multistart' or None, got {init!r}")
    if method not in ("simplex", "bfgs"):
        raise DomainError(f"unknown method {method!r}")
    maxfev = maxfev or 400 * layout.size

    obj = _Objective(y, layout)
    best = None
    for start in starts_list:
        v0 = layout.clip(layout.unconstrain(start))[0]
        f0 = obj(v0)
        if f0 >= 1e300:
            continue
        if method == "simplex":
            v, fv, nit, conv, trace = _simplex(obj, v0, tol, max_restarts, maxfev)
        else:
            v, fv, nit, conv, trace = _quasi_newton(obj, v0, tol, maxfev)
        if best is None or fv < best[1]:
            best = (v, fv, nit, conv, trace, -f0)
    if best is None or best[1] >= 1e300:
        raise OptimizationError("no starting point gave a finite likelihood")
    v, fv, nit, conv, trace, ll0 = best
    v, _ = layout.clip(v)
    return _finish(y, layout, v, -fv, method, nit, obj.nfev, conv, trace, ll0, obj.clipped, notes, information)


def _finish(y, layout, v, ll, method, nit, nfev, conv, trace, ll0, clipped, notes, information):
    spec_hat, perm = canonicalize_labels(layout.constrain(v))
    params = layout.unconstrain(spec_hat)
    res = FitResult(
        spec=spec_hat,
        loglik=float(ll),
        layout=layout,
        params=params,
        n_obs=y.shape[0] - 1,
        method=method,
        iterations=int(nit),
        n_fev=int(nfev),
        converged=bool(conv),
        permutation=perm,
        trace=[float(t) for t in trace],
        data_digest=data_digest(y),
        initial_loglik=float(ll0),
        clipped=bool(clipped),
        warnings=list(notes),
    )
    lsig = params[-layout.n_sigma :]
    if np.any(np.abs(lsig) >= LOG_SIGMA_CLIP - 1e-9):
        msg = "log sigma reached its clip bound (degenerate data?)"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        res.warnings.append(msg)
    if clipped:
        res.warnings.append("compactness clip was active during optimisation")
    if information:
        _attach_information(res, y)
    return res


# ---------------------------------------------------------------------------
# EM
# ---------------------------------------------------------------------------


def _transition_objective(counts, first):
    """Expected complete-data log-likelihood terms that involve ``A``."""

    def q(A):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(counts > 0, counts * np.log(A), 0.0).sum()
            mu = _stationary(A)
            t += np.where(first > 0, first * np.log(mu), 0.0).sum()
        return t if np.isfinite(t) else -math.inf

    return q


def _m_step_transition(A_old, counts, first):
    m = A_old.shape[0]
    if m == 1:
        return A_old
    q = _transition_objective(counts, first)
    A_counts = counts / counts.sum(axis=1, keepdims=True)
    def to_A(z):
        full = np.concatenate([np.clip(z.reshape(m, m - 1), -LOGIT_CLIP, LOGIT_CLIP), np.zeros((m, 1))], axis=1)
        full -= full.max(axis=1, keepdims=True)
        A = np.exp(full)
        return A / A.sum(axis=1, keepdims=True)

    def z_of(A):
        with np.errstate(divide="ignore"):
            z = np.log(A[:, :-1]) - np.log(A[:, -1:])
        return np.clip(z, -LOGIT_CLIP, LOGIT_CLIP).ravel()

    res = optimize.minimize(lambda z: -q(to_A(z)), z_of(A_counts), method="BFGS", options={"gtol": 1e-10})
    cands = [A_old, A_counts, to_A(res.x)]
    vals = [q(A) for A in cands]
    return cands[int(np.argmax(vals))]


def em_fit(
    y,
    init: ModelSpec | None = None,
    m: int | None = None,
    *,
    slopes: str = "free",
    max_iter: int = 5000,
    tol: float = 1e-8,
    information: bool = True,
) -> FitResult:
    """Expectation-conditional-maximisation for the linear Gaussian family.

    Each iteration smooths the regimes, then updates in turn the regression
    coefficients (weighted least squares at the current scales), the scales,
    and the transition matrix (exact maximisation including the stationary
    law of the first regime).  Every update is a conditional maximiser of
    the expected complete-data log-likelihood, so ``l_n`` never decreases.
    """
    y = np.ascontiguousarray(y, dtype=float)
    if init is None:
        if m is None:
            raise DomainError("pass m or a starting ModelSpec")
        init = default_start(y, ParamLayout(m, slopes))
    if not init.is_linear_gaussian:
        raise DomainError("EM is only available for the linear Gaussian family")
    layout = ParamLayout.for_spec(init, slopes)
    spec = _coerce_start(init, layout)
    spec = ModelSpec.linear(spec.A, spec.b, spec.rho, spec.noise.sigma)
    n = y.shape[0] - 1
    yp, yn = y[:-1], y[1:]
    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ll, G, xi = forward_backward(spec, y)
        if trace:
            slack = max(1e-10, 1e-14 * abs(ll))
            if ll < trace[-1] - slack:
                raise NumericError(f"EM log-likelihood decreased at iteration {it}: {trace[-1]!r} -> {ll!r}")
            if ll - trace[-1] < tol:
                trace.append(ll)
                converged = True
                break
        trace.append(ll)
        S = G.sum(axis=0)
        if np.any(S < 1e-8):
            raise DegenerateRegimeError(
                f"regime {int(np.argmin(S))} has total weight {S.min():.3g}; try fewer regimes"
            )
        Sx, Sy = G.T @ yp, G.T @ yn
        Sxx, Sxy = G.T @ (yp * yp), G.T @ (yp * yn)
        w = 1.0 / spec.sigma**2
        cxx = Sxx - Sx**2 / S
        cxy = Sxy - Sx * Sy / S
        if layout.slopes == "free":
            rho = np.where(cxx > 0, cxy / np.where(cxx > 0, cxx, 1.0), 0.0)
        elif layout.slopes == "shared":
            den = float(np.dot(w, cxx))
            rho = np.full(layout.m, float(np.dot(w, cxy)) / den if den > 0 else 0.0)
        else:
            rho = np.zeros(layout.m)
        b = (Sy - rho * Sx) / S
        resid = yn[:, None] - rho[None, :] * yp[:, None] - b[None, :]
        ss = (G * resid**2).sum(axis=0)
        if layout.sigma == "shared":
            sigma = np.array([math.sqrt(max(ss.sum() / n, 0.0))])
        else:
            sigma = np.sqrt(np.maximum(ss / S, 0.0))
        sigma = np.clip(sigma, math.exp(-LOG_SIGMA_CLIP), math.exp(LOG_SIGMA_CLIP))
        A = _m_step_transition(spec.A, xi, G[0])
        spec = ModelSpec.linear(A, b, rho, sigma)
    else:
        trace.append(log_likelihood(spec, y))
    v = layout.clip(layout.unconstrain(spec))[0]
    ll = log_likelihood(layout.constrain(v), y)
    return _finish(y, layout, v, ll, "em", it, it, converged, trace, trace[0], False, [], information)


# ---------------------------------------------------------------------------
# likelihood ratio test
# ---------------------------------------------------------------------------


def lrt_statistic(y, fit_full: FitResult, fit_null: FitResult) -> float:
    """``-2 (l_null - l_full)``, clamped at 0.

    Negative values inside the optimiser slack (1e-6) are clamped silently;
    larger negative values are clamped with a warning.
    """
    d = data_digest(y)
    if fit_full.data_digest != d or fit_null.data_digest != d:
        raise DomainError("both fits must be computed on the supplied data")
    stat = -2.0 * (fit_null.loglik - fit_full.loglik)
    if stat < 0:
        if stat < -1e-6:
            warnings.warn(f"negative LRT statistic {stat:.3g} clamped to 0", RuntimeWarning, stacklevel=2)
        stat = 0.0
    return float(stat)


@dataclass
class LRTResult:
    statistic: float
    df: int
    pvalue: float
    full: FitResult
    null: FitResult

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "pvalue": self.pvalue,
            "critical_values": {str(a): float(stats.chi2.ppf(1 - a, self.df)) for a in (0.10, 0.05, 0.01)},
            "loglik_full": self.full.loglik,
            "loglik_null": self.null.loglik,
            "full": self.full.to_dict(),
            "null": self.null.to_dict(),
        }


def likelihood_ratio_test(
    y,
    m: int = 2,
    *,
    slopes: str = "shared",
    null_init: ModelSpec | None = None,
    method: str = "simplex",
    information: bool = False,
) -> LRTResult:
    """Test ``rho = 0`` against the model with ``slopes`` free parameters.

    The null (a Gaussian hidden Markov model) is fitted first; the full fit
    starts from the null estimate with zero slope(s), so the two maxima are
    nested.
    """
    if slopes == "zero":
        raise DomainError("the alternative must have free or shared slopes")
    y = np.ascontiguousarray(y, dtype=float)
    if null_init is None:
        null_init = default_start(y, ParamLayout(m, "zero"))
    null = fit_mle(y, null_init, slopes="zero", method=method, information=information)
    start = null.spec
    full = fit_mle(y, start, slopes=slopes, method=method, information=information)
    stat = lrt_statistic(y, full, null)
    df = 1 if slopes == "shared" else m
    return LRTResult(stat, df, float(stats.chi2.sf(stat, df)), full, null)
