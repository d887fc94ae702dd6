"""Seeded path simulation and CSV path I/O.

Every path is drawn from a ``numpy.random.Generator`` over a Philox
(counter-based) bit generator keyed by the seed material, so replicate
``r`` of an experiment gets the independent stream ``replicate_rng(seed, r)``.
Regimes are drawn first (one uniform per step, inverse CDF), then the
innovations, then the recursion is applied.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from ._core import kernels
from .errors import DomainError
from .model import MEAN_FAMILIES, NOISE_FAMILIES, ModelSpec

DEFAULT_BURN_IN = 500


def make_rng(seed) -> np.random.Generator:
    """Generator for an int seed or a sequence of ints (seed material)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def replicate_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``(seed, *keys)``, e.g. ``(master, replicate)``."""
    return make_rng([int(seed), *[int(k) for k in keys]])


@dataclass(frozen=True, eq=False)
class Path:
    """Observed series ``y_0..y_n`` with optional regimes ``x_1..x_n``."""

    y: np.ndarray
    x: np.ndarray | None = None
    seed: object = None
    burn_in: int = 0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.shape[0] < 1:
            raise ValueError("y must be a non-empty 1-d series")
        object.__setattr__(self, "y", y)
        if self.x is not None:
            x = np.asarray(self.x, dtype=np.intp)
            if x.shape[0] != y.shape[0] - 1:
                raise ValueError(f"x has length {x.shape[0]}, expected {y.shape[0] - 1}")
            object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.shape[0] - 1


def _cumulative(p):
    c = np.cumsum(np.asarray(p, dtype=float), axis=-1)
    c[..., -1] = 1.0
    return np.ascontiguousarray(c)


def simulate_regimes(A, initial, n: int, rng) -> np.ndarray:
    u = rng.random(n)
    return kernels.simulate_chain(_cumulative(A), _cumulative(initial), u)


def simulate_path(
    spec: ModelSpec,
    n: int,
    y0: float | str = "stationary",
    seed=0,
    burn_in: int = DEFAULT_BURN_IN,
) -> Path:
    """Draw ``(x_{1:n}, y_{0:n})`` from ``spec``.

    With ``y0="stationary"`` the recursion starts from ``y = 0`` and the
    first ``burn_in`` steps are discarded; otherwise ``y_0 = y0`` and no
    burn-in is run.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed)
    if isinstance(y0, str):
        if y0 != "stationary":
            raise DomainError(f"y0 must be a number or 'stationary', got {y0!r}")
        start, burn = 0.0, int(burn_in)
    else:
        start, burn = float(y0), 0
    total = n + burn
    x = simulate_regimes(spec.A, spec.initial_distribution, total, rng)
    e = np.ascontiguousarray(NOISE_FAMILIES[spec.noise.family].sample(rng, total), dtype=float)
    sigma = np.ascontiguousarray(spec.sigma)
    if spec.regimes.family == "linear":
        y = kernels.linear_recursion(
            x, np.ascontiguousarray(spec.b), np.ascontiguousarray(spec.rho), sigma, e, start
        )
    else:
        fn = MEAN_FAMILIES[spec.regimes.family].fn
        theta = spec.regimes.theta
        y = np.empty(total + 1)
        y[0] = start
        for k in range(total):
            r = x[k]
            y[k + 1] = float(fn(np.float64(y[k]), theta[r])) + sigma[r] * e[k]
    if burn:
        y = y[burn:]
        x = x[burn:]
    return Path(y=np.array(y), x=np.array(x), seed=seed, burn_in=burn)


def simulate_andrews(rho: float, q: float, n: int, seed=0, m: int = 2) -> Path:
    """Non-mixing switching AR: all regimes share slope ``rho``, zero intercept,
    Bernoulli(``q``) innovations and ``y_0 = 0``.

    The regimes follow a uniform ``m``-state chain but do not affect ``y``.
    """
    if not 0.0 < rho <= 0.5:
        raise DomainError("rho must lie in (0, 1/2]")
    if not 0.0 <= q <= 1.0:
        raise DomainError("q must lie in [0, 1]")
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed)
    A = np.full((m, m), 1.0 / m)
    x = simulate_regimes(A, np.full(m, 1.0 / m), n, rng)
    e = (rng.random(n) < q).astype(float)
    return andrews_from_innovations(rho, e, x=x, seed=seed)


def andrews_from_innovations(rho: float, e: Sequence[float], x=None, seed=None) -> Path:
    e = np.ascontiguousarray(e, dtype=float)
    n = e.shape[0]
    if x is None:
        x = np.zeros(n, dtype=np.intp)
    k = int(np.max(x)) + 1 if n else 1
    y = kernels.linear_recursion(
        np.ascontiguousarray(x, dtype=np.intp), np.zeros(k), np.full(k, float(rho)), np.ones(k), e, 0.0
    )
    return Path(y=y, x=x, seed=seed)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_path_csv(path: Path, dest, include_regimes: bool = True) -> None:
    """Columns ``index,y,x``; ``x`` is empty at index 0 or when withheld."""
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "y", "x"])
        for k, yk in enumerate(path.y):
            xk = ""
            if include_regimes and path.x is not None and k > 0:
                xk = str(int(path.x[k - 1]))
            w.writerow([k, format(float(yk), ".17g"), xk])


def read_path_csv(src) -> Path:
    ys, xs = [], []
    with open(src, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "y" not in reader.fieldnames:
            raise DomainError(f"{src}: expected a header with a 'y' column")
        for row in reader:
            ys.append(float(row["y"]))
            xs.append(row.get("x") or "")
    x = None
    if len(xs) > 1 and all(v != "" for v in xs[1:]):
        x = np.array([int(v) for v in xs[1:]], dtype=np.intp)
    return Path(y=np.array(ys), x=x, seed=str(FsPath(src)))
