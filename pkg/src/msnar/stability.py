"""Stationarity and moment checks for linear (or sublinear) switching AR models.

The checklist follows the classical sufficient conditions for a unique
geometrically ergodic stationary solution of a sublinear switching AR
process (``|r(y, theta_i)| <= rho_i |y| + b_i``):

* E1 the regime chain is irreducible (so positive recurrent, with law ``mu``);
* E2 the mean maps are continuous;
* E3 the sublinearity constants exist;
* E4 the Lyapunov exponent ``gamma = sum_i mu_i log rho_i`` is negative;
* E5-E7 the innovations have an ``s``-th moment and a density bounded away
  from zero on a compact set.

A finite ``s``-th moment of ``y`` additionally follows when the spectral
radius of ``Q_s = (rho_j^s a_ij)`` is below one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from ._core import kernels
from .errors import AmbiguityError, ConvergenceError, DomainError
from .model import ModelSpec, TransitionMatrix

SUPPORT_EPS = 1e-15
STATIONARY_RESIDUAL_TOL = 1e-10
POWER_SHIFT = 1e-8
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000

PASS, FAIL, UNCHECKABLE = "pass", "fail", "not-checkable"


def _entries(A) -> np.ndarray:
    if isinstance(A, TransitionMatrix):
        return A.entries
    return np.asarray(A, dtype=float)


def is_irreducible(A) -> bool:
    """Strong connectivity of the support graph (entries above 1e-15)."""
    A = _entries(A)
    if A.shape[0] == 1:
        return True
    n_comp, _ = connected_components(A > SUPPORT_EPS, directed=True, connection="strong")
    return n_comp == 1


def stationary_distribution(A) -> np.ndarray:
    """Invariant law ``mu`` with ``mu A = mu`` of an irreducible chain."""
    A = _entries(A)
    m = A.shape[0]
    if m == 1:
        return np.ones(1)
    if not is_irreducible(A):
        raise AmbiguityError(
            "transition matrix is reducible: the stationary distribution is not unique"
        )
    # replace one balance equation by the normalisation constraint
    M = A.T - np.eye(m)
    M[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    mu = np.linalg.solve(M, rhs)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    resid = np.abs(mu @ A - mu).max()
    if resid > STATIONARY_RESIDUAL_TOL:
        raise AmbiguityError(f"stationary solve residual {resid:.3g} exceeds tolerance")
    return mu


def lyapunov_gamma(rho, mu) -> float:
    """``sum_i mu_i log rho_i``; requires every ``rho_i > 0``."""
    rho = np.asarray(rho, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("Lyapunov exponent needs strictly positive contraction constants")
    return float(np.dot(mu, np.log(rho)))


def q_matrix(A, rho, s: float) -> np.ndarray:
    A = _entries(A)
    rho = np.asarray(rho, dtype=float)
    return A * (rho ** s)[None, :]


def spectral_radius_Qs(A, rho, s: float) -> float:
    """Perron root of ``Q_s[i, j] = rho_j**s * a_ij`` by shifted power iteration."""
    if s < 1:
        raise DomainError("moment order s must be >= 1")
    Q = np.ascontiguousarray(q_matrix(A, rho, s))
    if np.any(Q < 0):
        raise DomainError("Q_s must be nonnegative")
    est, iters, converged = kernels.perron_root(Q, POWER_SHIFT, POWER_TOL, POWER_MAX_ITER)
    if not converged:
        raise ConvergenceError(
            f"power iteration did not converge in {iters} iterations", estimate=est, iterations=iters
        )
    return float(est)


@dataclass
class StabilityReport:
    mu: list[float]
    gamma: float
    moment_order: float
    spectral_radius: float | None
    verdicts: dict[str, str]
    stable: bool
    notes: list[str] = field(default_factory=list)
    power_shift: float = POWER_SHIFT

    def to_dict(self) -> dict:
        return asdict(self)


def check_stability(spec: ModelSpec, s: float = 1.0, sublinear_constants=None) -> StabilityReport:
    """Run the E1-E7 checklist and the ``Q_s`` moment criterion.

    For the linear family the sublinearity constants are ``|rho_i|`` and
    ``|b_i|``.  Custom mean families must pass ``sublinear_constants`` as a
    ``(rho, b)`` pair; there is no general way to derive them.
    """
    notes = []
    verdicts = {}
    mu = stationary_distribution(spec.transition)
    resid = float(np.abs(mu @ spec.A - mu).max())
    verdicts["E1"] = PASS if resid <= STATIONARY_RESIDUAL_TOL else FAIL

    if spec.regimes.family == "linear":
        verdicts["E2"] = PASS
        rho = np.abs(spec.rho)
        verdicts["E3"] = PASS
    elif sublinear_constants is not None:
        verdicts["E2"] = UNCHECKABLE
        rho = np.abs(np.asarray(sublinear_constants[0], dtype=float))
        verdicts["E3"] = PASS
        notes.append("E2/E3 rely on user-supplied sublinearity constants")
    else:
        raise DomainError(
            f"family {spec.regimes.family!r} needs explicit sublinearity constants"
        )

    if np.any(rho == 0):
        # log 0 = -inf: any positive constant small enough makes gamma negative
        gamma = -math.inf
        notes.append("zero slope: Lyapunov exponent is -inf")
    else:
        gamma = lyapunov_gamma(rho, mu)
    verdicts["E4"] = PASS if gamma < 0 else FAIL

    gaussian = spec.noise.family == "gaussian"
    for key in ("E5", "E6", "E7"):
        verdicts[key] = PASS if gaussian else UNCHECKABLE
    if not gaussian:
        notes.append("E5-E7 are not checkable for a registered noise family")

    radius = spectral_radius_Qs(spec.transition, rho, s)
    verdicts["moment"] = PASS if radius < 1.0 else FAIL
    stable = all(verdicts[k] == PASS for k in ("E1", "E3", "E4", "moment")) and all(
        verdicts[k] != FAIL for k in verdicts
    )
    return StabilityReport(
        mu=mu.tolist(),
        gamma=gamma,
        moment_order=float(s),
        spectral_radius=radius,
        verdicts=verdicts,
        stable=stable,
        notes=notes,
    )
