"""Domain types for Markov-switching autoregressive models.

A model is ``y_k = r(y_{k-1}, theta[x_k]) + e_k`` where ``x`` is a hidden
homogeneous Markov chain on ``{0, ..., m-1}`` and ``e_k`` are i.i.d. with a
density from a registered noise family (scaled by ``sigma``).  The linear
family ``r(y, (b, rho)) = rho * y + b`` is the default and the only one the
estimators support; other mean functions can be registered for simulation
and filtering.

Regimes are indexed from 0 throughout the Python API.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, NumericError

ROW_SUM_TOL = 1e-12
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# registries
# ---------------------------------------------------------------------------


class MeanFamily(NamedTuple):
    """Vectorised mean map ``fn(y_prev, theta_i) -> r(y_prev, theta_i)``."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int


class NoiseFamily(NamedTuple):
    """Standardised innovation law; ``logpdf(z)`` and ``sample(rng, size)``."""

    logpdf: Callable[[np.ndarray], np.ndarray]
    sample: Callable[[np.random.Generator, int], np.ndarray]


def _linear_mean(y_prev, theta):
    return theta[1] * y_prev + theta[0]


def _gaussian_logpdf(z):
    return -LOG_SQRT_2PI - 0.5 * np.square(z)


def _gaussian_sample(rng, size):
    return rng.standard_normal(size)


MEAN_FAMILIES: dict[str, MeanFamily] = {"linear": MeanFamily(_linear_mean, 2)}
NOISE_FAMILIES: dict[str, NoiseFamily] = {
    "gaussian": NoiseFamily(_gaussian_logpdf, _gaussian_sample)
}


def register_mean_family(name: str, fn, dim: int) -> None:
    """Register a custom regime mean map usable in simulation and filtering.

    ``fn(y_prev, theta_i)`` must accept an array ``y_prev`` and the parameter
    row of one regime (length ``dim``) and return an array of means.
    """
    if name == "linear":
        raise ValueError("the linear family is built in")
    MEAN_FAMILIES[name] = MeanFamily(fn, int(dim))


def register_noise_family(name: str, logpdf, sample) -> None:
    """Register a standardised innovation density.

    The density must be strictly positive on compact sets; scaled residuals
    ``(y - mean) / sigma`` are passed to ``logpdf``.
    """
    NOISE_FAMILIES[name] = NoiseFamily(logpdf, sample)


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64, ndmin=ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic ``m x m`` matrix with ``a[i, j] = P(x_k = j | x_{k-1} = i)``."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries, 2))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def delta(self) -> float:
        """Smallest transition probability."""
        return float(self.entries.min())


@dataclass(frozen=True, eq=False)
class RegimeParams:
    """Per-regime parameter rows; for the linear family each row is ``(b, rho)``."""

    theta: np.ndarray
    family: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(self.theta, 2))

    @property
    def m(self) -> int:
        return self.theta.shape[0]

    @property
    def b(self) -> np.ndarray:
        self._require_linear()
        return self.theta[:, 0]

    @property
    def rho(self) -> np.ndarray:
        self._require_linear()
        return self.theta[:, 1]

    def _require_linear(self):
        if self.family != "linear":
            raise DomainError(f"family {self.family!r} has no (b, rho) layout")


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Innovation family and scale: one shared ``sigma`` or one per regime."""

    sigma: np.ndarray
    family: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "sigma", _frozen(self.sigma, 1))

    @property
    def per_regime(self) -> bool:
        return self.sigma.shape[0] > 1

    def scales(self, m: int) -> np.ndarray:
        if self.sigma.shape[0] == 1:
            return np.full(m, self.sigma[0])
        return np.array(self.sigma)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Full parameter ``psi = (theta, A)`` plus noise and initial regime law.

    ``initial=None`` means the stationary distribution of the chain.
    """

    transition: TransitionMatrix
    regimes: RegimeParams
    noise: NoiseSpec
    initial: np.ndarray | None = None
    _mu: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.initial is not None:
            object.__setattr__(self, "initial", _frozen(self.initial, 1))

    @classmethod
    def linear(cls, transition, b, rho, sigma=1.0, initial=None, noise="gaussian"):
        b = np.atleast_1d(np.asarray(b, dtype=float))
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        return cls(
            TransitionMatrix(transition),
            RegimeParams(np.column_stack([b, rho])),
            NoiseSpec(np.atleast_1d(np.asarray(sigma, dtype=float)), noise),
            initial,
        )

    @property
    def m(self) -> int:
        return self.transition.m

    @property
    def A(self) -> np.ndarray:
        return self.transition.entries

    @property
    def b(self) -> np.ndarray:
        return self.regimes.b

    @property
    def rho(self) -> np.ndarray:
        return self.regimes.rho

    @property
    def sigma(self) -> np.ndarray:
        """Per-regime scale vector of length ``m``."""
        return self.noise.scales(self.m)

    @property
    def is_linear_gaussian(self) -> bool:
        return self.regimes.family == "linear" and self.noise.family == "gaussian"

    @property
    def initial_distribution(self) -> np.ndarray:
        if self.initial is not None:
            return self.initial
        if not self._mu:
            from .stability import stationary_distribution

            self._mu.append(stationary_distribution(self.transition))
        return self._mu[0]

    def replace(self, **changes) -> "ModelSpec":
        fields = {
            "transition": self.transition,
            "regimes": self.regimes,
            "noise": self.noise,
            "initial": self.initial,
        }
        fields.update(changes)
        return ModelSpec(**fields)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "model is valid"
        return "invalid model:\n" + "\n".join(f"  - {v}" for v in self.violations)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def validate_model(spec: ModelSpec) -> ValidationReport:
    """List every violated invariant of ``spec``; never raises."""
    out = []
    A = spec.transition.entries
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        out.append(f"transition matrix must be square with m >= 1, got shape {A.shape}")
        return ValidationReport(out)
    m = A.shape[0]
    if not np.all(np.isfinite(A)):
        out.append("transition matrix has non-finite entries")
    bad = np.argwhere((A < 0) | (A > 1))
    for i, j in bad:
        out.append(f"transition entry ({i}, {j}) = {A[i, j]!r} outside [0, 1]")
    for i, s in enumerate(A.sum(axis=1)):
        if abs(s - 1.0) > ROW_SUM_TOL:
            out.append(f"row {i} sums to {s:.15g}")
    if spec.regimes.m != m:
        out.append(f"{spec.regimes.m} regime parameter rows for m = {m}")
    fam = MEAN_FAMILIES.get(spec.regimes.family)
    if fam is None:
        out.append(f"unknown mean family {spec.regimes.family!r}")
    elif spec.regimes.theta.shape[1] != fam.dim:
        out.append(
            f"family {spec.regimes.family!r} needs {fam.dim} parameters per regime, "
            f"got {spec.regimes.theta.shape[1]}"
        )
    if not np.all(np.isfinite(spec.regimes.theta)):
        out.append("regime parameters must be finite")
    if spec.noise.family not in NOISE_FAMILIES:
        out.append(f"unknown noise family {spec.noise.family!r}")
    sig = spec.noise.sigma
    if sig.shape[0] not in (1, m):
        out.append(f"sigma must have length 1 or m = {m}, got {sig.shape[0]}")
    if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
        out.append("noise scale must be positive")
    if spec.initial is not None:
        p = spec.initial
        if p.shape != (m,):
            out.append(f"initial distribution must have length {m}")
        elif np.any(p < 0) or abs(p.sum() - 1.0) > ROW_SUM_TOL:
            out.append(f"initial distribution is not a probability vector (sum {p.sum():.15g})")
    return ValidationReport(out)


def _check_regime(regime, m):
    if not 0 <= regime < m:
        raise IndexError(f"regime {regime} out of range for m = {m}")


def regime_mean(y_prev: float, regime: int, spec: ModelSpec) -> float:
    """``r(y_prev, theta[regime])``."""
    _check_regime(regime, spec.m)
    fam = MEAN_FAMILIES[spec.regimes.family]
    return float(fam.fn(np.float64(y_prev), spec.regimes.theta[regime]))


def emission_logdensity(y: float, y_prev: float, regime: int, spec: ModelSpec) -> float:
    """Log density of ``y_k = y`` given ``y_{k-1} = y_prev`` and ``x_k = regime``."""
    mean = regime_mean(y_prev, regime, spec)
    s = float(spec.sigma[regime])
    val = float(NOISE_FAMILIES[spec.noise.family].logpdf(np.float64((y - mean) / s))) - math.log(s)
    if math.isnan(val):
        raise NumericError(f"noise density returned NaN at y={y!r}, y_prev={y_prev!r}")
    return val


def regime_means(spec: ModelSpec, y_prev) -> np.ndarray:
    """Means for every lagged value (rows) and regime (columns)."""
    y_prev = np.asarray(y_prev, dtype=float)
    theta = spec.regimes.theta
    if spec.regimes.family == "linear":
        return y_prev[:, None] * theta[None, :, 1] + theta[None, :, 0]
    fn = MEAN_FAMILIES[spec.regimes.family].fn
    return np.column_stack([np.asarray(fn(y_prev, theta[i]), dtype=float) for i in range(spec.m)])


def emission_logdensities(spec: ModelSpec, y) -> np.ndarray:
    """``(n, m)`` table of log emission densities for observations ``y_1..y_n``."""
    y = np.asarray(y, dtype=float)
    sigma = spec.sigma
    z = (y[1:, None] - regime_means(spec, y[:-1])) / sigma[None, :]
    out = NOISE_FAMILIES[spec.noise.family].logpdf(z) - np.log(sigma)[None, :]
    out = np.ascontiguousarray(out, dtype=np.float64)
    if np.isnan(out).any():
        k = int(np.argwhere(np.isnan(out))[0, 0]) + 1
        raise NumericError(f"noise density returned NaN at observation {k}")
    return out


def permute_regimes(spec: ModelSpec, perm) -> ModelSpec:
    """Relabel so that new regime ``j`` is old regime ``perm[j]``."""
    perm = np.asarray(perm, dtype=int)
    A = spec.A[np.ix_(perm, perm)]
    sigma = spec.noise.sigma if not spec.noise.per_regime else spec.noise.sigma[perm]
    return ModelSpec(
        TransitionMatrix(A),
        RegimeParams(spec.regimes.theta[perm], spec.regimes.family),
        NoiseSpec(sigma, spec.noise.family),
        None if spec.initial is None else spec.initial[perm],
    )


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def spec_to_dict(spec: ModelSpec) -> dict:
    if spec.regimes.family != "linear":
        raise DomainError("only linear-family specs serialise to JSON")
    sig = spec.noise.sigma
    return {
        "m": spec.m,
        "transition": spec.A.tolist(),
        "regimes": [{"b": float(b), "rho": float(r)} for b, r in spec.regimes.theta],
        "sigma": float(sig[0]) if sig.shape[0] == 1 else sig.tolist(),
        "initial": None if spec.initial is None else spec.initial.tolist(),
    }


def spec_from_dict(d: dict) -> ModelSpec:
    try:
        m = int(d["m"])
        regimes = d["regimes"]
        b = [float(r["b"]) for r in regimes]
        rho = [float(r["rho"]) for r in regimes]
        A = np.array(d["transition"], dtype=float)
        sigma = d.get("sigma", 1.0)
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed model document: {exc}") from exc
    if len(regimes) != m or A.shape != (m, m):
        raise DomainError(f"model document declares m = {m} but components disagree")
    initial = d.get("initial")
    return ModelSpec.linear(A, b, rho, sigma, None if initial is None else initial)


def load_spec(path) -> ModelSpec:
    return spec_from_dict(json.loads(Path(path).read_text()))


def save_spec(spec: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")
