"""Monte Carlo experiments for the large-sample behaviour of the MLE.

Experiments are deterministic functions of their :class:`ExperimentConfig`:
replicate ``r`` at sample size ``n`` draws from the stream
``replicate_rng(seed, n, r)``, so results do not depend on thread count or
scheduling.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np
from scipy import stats

from . import __version__
from ._core import BACKEND
from .errors import DomainError, ExperimentError, MSNARError
from .estimate import (
    ParamLayout,
    canonicalize_labels,
    fit_mle,
    em_fit,
    likelihood_ratio_test,
)
from .filter import step_terms
from .model import ModelSpec, spec_from_dict, spec_to_dict
from .simulate import Path, replicate_rng, simulate_andrews, simulate_path
from .stability import check_stability

KINDS = ("consistency", "normality", "lrt-calibration", "loglik-convergence", "mixing-probe")
CHI2_1_CUTOFFS = {0.90: 2.706, 0.95: 3.841, 0.99: 6.635}
MAX_FAIL_FRACTION = 0.2
COND_LIMIT = 1e10


@dataclass
class ExperimentConfig:
    kind: str
    model: ModelSpec
    sizes: list[int]
    replicates: int = 2
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}")
        if self.replicates < 2:
            raise DomainError("need at least two replicates")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])) or not self.sizes:
            raise DomainError("sizes must be non-empty and strictly increasing")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            kind=d["kind"],
            model=spec_from_dict(d["model"]),
            sizes=[int(n) for n in d["sizes"]],
            replicates=int(d.get("replicates", 2)),
            seed=int(d.get("seed", 0)),
            options=dict(d.get("options", {})),
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "model": spec_to_dict(self.model),
            "sizes": list(self.sizes),
            "replicates": self.replicates,
            "seed": self.seed,
            "options": dict(self.options),
        }


@dataclass
class ExperimentReport:
    kind: str
    records: list[dict]
    summary: dict
    metadata: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "summary": self.summary, "records": self.records, "metadata": self.metadata}

    def write_json(self, dest) -> None:
        FsPath(dest).write_text(json.dumps(self.to_dict(), indent=2, default=_jsonable) + "\n")

    def write_csv(self, dest) -> None:
        """One row per ``(n, replicate, coordinate)``."""
        rows = []
        for rec in self.records:
            coords = rec.get("coordinates")
            if coords is None:
                rows.append({"n": rec.get("n"), "replicate": rec.get("replicate"), "coordinate": rec.get("name", ""),
                             "value": rec.get("value", rec.get("statistic"))})
                continue
            for name, vals in coords.items():
                rows.append({"n": rec["n"], "replicate": rec["replicate"], "coordinate": name, **vals})
        keys = []
        for r in rows:
            for k in r:
                if k not in keys:
                    keys.append(k)
        with open(dest, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            w.writerows(rows)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _metadata(config: ExperimentConfig, t0: float, extra=None) -> dict:
    md = {
        "config": config.to_dict(),
        "version": __version__,
        "backend": BACKEND,
        "wall_time_s": time.perf_counter() - t0,
    }
    if extra:
        md.update(extra)
    return md


def _fit(y, start: ModelSpec, opts: dict, information: bool):
    method = opts.get("method", "simplex")
    slopes = opts.get("slopes", "free")
    if method == "em":
        return em_fit(y, start, slopes=slopes, information=information)
    return fit_mle(y, start, slopes=slopes, method=method, information=information)


def _require_stable(spec: ModelSpec):
    rep = check_stability(spec, 1.0)
    if not rep.stable:
        raise ExperimentError(f"true model is not stable: {rep.verdicts}")


def _fail_check(n_fail: int, total: int):
    if total and n_fail / total > MAX_FAIL_FRACTION:
        raise ExperimentError(f"{n_fail} of {total} fits failed")


# ---------------------------------------------------------------------------
# consistency
# ---------------------------------------------------------------------------


def run_consistency(config: ExperimentConfig) -> ExperimentReport:
    """Per-coordinate estimation error of the canonicalised MLE across sample sizes."""
    t0 = time.perf_counter()
    opts = config.options
    truth, _ = canonicalize_labels(config.model)
    _require_stable(truth)
    layout = ParamLayout.for_spec(truth, opts.get("slopes", "free"))
    names = layout.natural_names
    true_nat = layout.natural(truth)
    burn = int(opts.get("burn_in", 500))

    def one(job):
        n, r = job
        path = simulate_path(truth, n, "stationary", replicate_rng(config.seed, n, r), burn)
        try:
            fit = _fit(path.y, truth, opts, information=False)
        except MSNARError as exc:
            return {"n": n, "replicate": r, "failed": True, "error": str(exc)}
        est = fit.natural_params
        return {
            "n": n,
            "replicate": r,
            "failed": False,
            "loglik": fit.loglik,
            "converged": fit.converged,
            "coordinates": {
                nm: {"estimate": float(e), "truth": float(t), "error": float(abs(e - t))}
                for nm, e, t in zip(names, est, true_nat)
            },
        }

    jobs = [(n, r) for n in config.sizes for r in range(config.replicates)]
    records = _map(one, jobs, int(opts.get("threads", 1)))
    n_fail = sum(rec["failed"] for rec in records)
    _fail_check(n_fail, len(records))
    medians = {}
    for n in config.sizes:
        ok = [rec for rec in records if rec["n"] == n and not rec["failed"]]
        medians[n] = {nm: float(np.median([rec["coordinates"][nm]["error"] for rec in ok])) for nm in names}
    ratios = {}
    for a, b in zip(config.sizes, config.sizes[1:]):
        ratios[f"{b}/{a}"] = {
            nm: medians[b][nm] / medians[a][nm] if medians[a][nm] > 0 else math.nan for nm in names
        }
        ratios[f"{b}/{a}"]["sqrt_n_benchmark"] = math.sqrt(a / b)
    summary = {
        "coordinates": names,
        "median_error": {str(n): v for n, v in medians.items()},
        "error_ratio": ratios,
        "decreasing": {
            nm: all(medians[b][nm] < medians[a][nm] for a, b in zip(config.sizes, config.sizes[1:]))
            for nm in names
        },
        "failed": n_fail,
        "included": len(records) - n_fail,
        "total": len(records),
    }
    return ExperimentReport("consistency", records, summary, _metadata(config, t0))


# ---------------------------------------------------------------------------
# normality
# ---------------------------------------------------------------------------


def sym_sqrt(J: np.ndarray) -> np.ndarray:
    """Symmetric square root by eigendecomposition."""
    w, V = np.linalg.eigh(0.5 * (J + J.T))
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.T


def ks_distance(z) -> float:
    """Sup distance between the empirical CDF of ``z`` and the standard normal CDF."""
    return float(stats.kstest(np.asarray(z, dtype=float), "norm").statistic)


def run_normality(config: ExperimentConfig) -> ExperimentReport:
    """Standardised estimates ``sqrt(n) J^{1/2} (v_hat - v*)`` in unconstrained coordinates.

    ``J`` is the negative Hessian of ``l_n / n`` at the estimate.  Replicates
    whose ``J`` has condition number above 1e10 (or is not positive
    definite) are excluded and counted.
    """
    t0 = time.perf_counter()
    opts = config.options
    truth, _ = canonicalize_labels(config.model)
    _require_stable(truth)
    layout = ParamLayout.for_spec(truth, opts.get("slopes", "free"))
    names = layout.names
    v_true = layout.unconstrain(truth)
    n = config.sizes[-1]
    burn = int(opts.get("burn_in", 500))

    def one(r):
        path = simulate_path(truth, n, "stationary", replicate_rng(config.seed, n, r), burn)
        try:
            fit = _fit(path.y, truth, opts, information=True)
        except MSNARError as exc:
            return {"n": n, "replicate": r, "failed": True, "excluded": False, "error": str(exc)}
        J = fit.information
        eig = np.linalg.eigvalsh(J)
        cond = eig.max() / eig.min() if eig.min() > 0 else math.inf
        rec = {"n": n, "replicate": r, "failed": False, "condition": float(cond), "loglik": fit.loglik}
        if not cond <= COND_LIMIT:
            rec["excluded"] = True
            return rec
        z = math.sqrt(n) * sym_sqrt(J) @ (fit.params - v_true)
        rec["excluded"] = False
        rec["coordinates"] = {
            nm: {"estimate": float(e), "truth": float(t), "z": float(zz)}
            for nm, e, t, zz in zip(names, fit.params, v_true, z)
        }
        return rec

    records = _map(one, list(range(config.replicates)), int(opts.get("threads", 1)))
    n_fail = sum(rec["failed"] for rec in records)
    _fail_check(n_fail, len(records))
    used = [rec for rec in records if not rec["failed"] and not rec["excluded"]]
    excluded = sum(1 for rec in records if not rec["failed"] and rec["excluded"])
    per = {}
    for nm in names:
        z = np.array([rec["coordinates"][nm]["z"] for rec in used])
        per[nm] = {
            "sup_distance": ks_distance(z),
            "mean": float(z.mean()),
            "std": float(z.std(ddof=1)),
            "skewness": float(stats.skew(z)),
            "excess_kurtosis": float(stats.kurtosis(z)),
        }
    summary = {
        "n": n,
        "coordinates": names,
        "per_coordinate": per,
        "max_sup_distance": max(v["sup_distance"] for v in per.values()),
        "included": len(used),
        "excluded": excluded,
        "failed": n_fail,
        "total": len(records),
        "excluded_fraction": excluded / len(records),
    }
    return ExperimentReport("normality", records, summary, _metadata(config, t0))


# ---------------------------------------------------------------------------
# likelihood ratio calibration
# ---------------------------------------------------------------------------


def run_lrt_calibration(config: ExperimentConfig) -> ExperimentReport:
    """Null distribution (or power) of the slope likelihood-ratio statistic.

    Option ``slopes`` picks the alternative (``"shared"``: one slope, one
    degree of freedom; ``"free"``: one slope per regime).  Option
    ``expect_null`` (default true) requires every true slope to be 0.
    """
    t0 = time.perf_counter()
    opts = config.options
    truth = config.model
    slopes = opts.get("slopes", "shared")
    if opts.get("expect_null", True) and np.any(truth.rho != 0):
        raise ExperimentError("LRT calibration needs a true model with all slopes 0")
    _require_stable(truth)
    n = config.sizes[-1]
    burn = int(opts.get("burn_in", 500))
    null_start = truth.replace(regimes=type(truth.regimes)(np.column_stack([truth.b, np.zeros(truth.m)])))

    def one(r):
        path = simulate_path(truth, n, "stationary", replicate_rng(config.seed, n, r), burn)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = likelihood_ratio_test(path.y, truth.m, slopes=slopes, null_init=null_start,
                                            method=opts.get("method", "simplex"))
        except MSNARError as exc:
            return {"n": n, "replicate": r, "failed": True, "error": str(exc)}
        return {
            "n": n,
            "replicate": r,
            "failed": False,
            "name": "lrt",
            "statistic": res.statistic,
            "df": res.df,
            "loglik_full": res.full.loglik,
            "loglik_null": res.null.loglik,
        }

    records = _map(one, list(range(config.replicates)), int(opts.get("threads", 1)))
    n_fail = sum(rec["failed"] for rec in records)
    _fail_check(n_fail, len(records))
    ok = [rec for rec in records if not rec["failed"]]
    stat = np.array([rec["statistic"] for rec in ok])
    df = ok[0]["df"] if ok else 1
    probs = np.array([0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99])
    cutoffs = CHI2_1_CUTOFFS if df == 1 else {1 - a: float(stats.chi2.ppf(1 - a, df)) for a in (0.10, 0.05, 0.01)}
    summary = {
        "n": n,
        "df": df,
        "exceedance": {f"{lvl:.2f}": float(np.mean(stat > c)) for lvl, c in cutoffs.items()},
        "cutoffs": {f"{lvl:.2f}": c for lvl, c in cutoffs.items()},
        "qq": [
            {"p": float(p), "empirical": float(np.quantile(stat, p)), "chi2": float(stats.chi2.ppf(p, df))}
            for p in probs
        ],
        "min_statistic": float(stat.min()),
        "failed": n_fail,
        "included": len(ok),
        "total": len(records),
    }
    return ExperimentReport("lrt-calibration", records, summary, _metadata(config, t0))


# ---------------------------------------------------------------------------
# log-likelihood convergence
# ---------------------------------------------------------------------------


def running_average_loglik(spec: ModelSpec, y, grid) -> np.ndarray:
    """``l_n(spec) / n`` at each ``n`` in ``grid`` along one path."""
    cum = np.cumsum(step_terms(spec, y))
    grid = np.asarray(grid, dtype=int)
    return cum[grid - 1] / grid


def run_loglik_convergence(config: ExperimentConfig) -> ExperimentReport:
    """Running averages ``n^{-1} l_n(psi)`` along one long path per seed.

    ``sizes`` is the evaluation grid; tail oscillation is max - min over the
    last half of the grid.  Option ``eval_points`` adds model documents to
    evaluate besides the truth; option ``seeds`` (default ``[seed]``)
    repeats the path with other seeds.
    """
    t0 = time.perf_counter()
    opts = config.options
    truth = config.model
    grid = np.asarray(config.sizes, dtype=int)
    points = {"truth": truth}
    for i, d in enumerate(opts.get("eval_points", [])):
        points[f"point{i}"] = spec_from_dict(d)
    seeds = [int(s) for s in opts.get("seeds", [config.seed])]
    burn = int(opts.get("burn_in", 500))
    half = grid[len(grid) // 2 :]
    records = []
    summary = {"grid": grid.tolist(), "tail_grid": half.tolist(), "points": {}}
    for s in seeds:
        path = simulate_path(truth, int(grid[-1]), "stationary", replicate_rng(s, 0), burn)
        for name, spec in points.items():
            avg = running_average_loglik(spec, path.y, grid)
            tail = avg[len(grid) // 2 :]
            records.append({"seed": s, "name": name, "n": grid.tolist(), "average": avg.tolist()})
            summary["points"].setdefault(name, {})[str(s)] = {
                "final": float(avg[-1]),
                "tail_oscillation": float(tail.max() - tail.min()),
            }
    finals = {name: [v["final"] for v in d.values()] for name, d in summary["points"].items()}
    summary["seed_spread"] = {name: float(max(v) - min(v)) for name, v in finals.items()}
    return ExperimentReport("loglik-convergence", records, summary, _metadata(config, t0))


# ---------------------------------------------------------------------------
# long-run variance and mixing probe
# ---------------------------------------------------------------------------


def autocovariances(x, max_lag: int) -> np.ndarray:
    """Biased sample autocovariances ``gamma_0..gamma_max_lag`` (divisor ``len``)."""
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    N = xc.shape[0]
    return np.array([np.dot(xc[: N - k], xc[k:]) / N for k in range(max_lag + 1)])


def long_run_variance(series, bandwidth: int | str = "auto") -> float:
    """Bartlett-weighted long-run variance ``g0 + 2 sum_k (1 - k/(B+1)) g_k``.

    ``"auto"`` uses ``B = floor(1.3 * len**(1/3))``.  Non-positive results
    are returned with a ``RuntimeWarning``.
    """
    x = np.asarray(series, dtype=float)
    N = x.shape[0]
    B = int(math.floor(1.3 * N ** (1 / 3))) if bandwidth == "auto" else int(bandwidth)
    if B < 0:
        raise DomainError("bandwidth must be >= 0")
    if N < 10 * max(B, 1):
        raise DomainError(f"series of length {N} too short for bandwidth {B}")
    g = autocovariances(x, B)
    w = 1.0 - np.arange(1, B + 1) / (B + 1)
    val = float(g[0] + 2.0 * np.dot(w, g[1:]))
    if val <= 0:
        warnings.warn(f"long-run variance estimate {val:.3g} is not positive", RuntimeWarning, stacklevel=2)
    return val


def dyadic_unwind(y, lag: int) -> np.ndarray:
    """``2 * frac(2**(lag-1) * y)``: for a slope-1/2 Bernoulli recursion this
    recovers ``y_t`` from ``y_{t+lag}`` exactly (a measurable map of the later value)."""
    z = np.ldexp(np.asarray(y, dtype=float), lag - 1)
    return 2.0 * (z - np.floor(z))


def mixing_probe(path, lag: int, threshold_grid=None, dyadic: bool = False) -> float:
    """Lower bound on the alpha-mixing coefficient at ``lag``.

    Maximum absolute empirical covariance between ``1{y_t <= a}`` and
    ``1{g(y_{t+lag}) <= b}`` over ``a, b`` in ``threshold_grid``, with ``g``
    the identity and, if ``dyadic``, also :func:`dyadic_unwind`.  Every such
    pair of events is admissible in the supremum defining alpha, so the
    value is a lower bound (up to sampling error).
    """
    y = path.y if isinstance(path, Path) else np.asarray(path, dtype=float)
    N = y.shape[0]
    if lag < 1:
        raise DomainError("lag must be >= 1")
    if N < 100 * lag:
        raise DomainError(f"path of length {N} too short for lag {lag}")
    if threshold_grid is None:
        threshold_grid = np.quantile(y, np.linspace(0.1, 0.9, 9))
    grid = np.asarray(threshold_grid, dtype=float)
    early = y[: N - lag]
    late = [y[lag:]]
    if dyadic:
        late.append(dyadic_unwind(y[lag:], lag))
    I = (early[:, None] <= grid[None, :]).astype(float)
    pI = I.mean(axis=0)
    best = 0.0
    for z in late:
        Jm = (z[:, None] <= grid[None, :]).astype(float)
        cov = I.T @ Jm / I.shape[0] - np.outer(pI, Jm.mean(axis=0))
        best = max(best, float(np.abs(cov).max()))
    return best


def run_mixing_probe(config: ExperimentConfig) -> ExperimentReport:
    """Probe values across lags for the model path (and optionally an Andrews path).

    Options: ``lags`` (default ``[1, 5, 10, 20]``), ``thresholds``,
    ``dyadic`` (bool), ``andrews`` (``{"rho": .5, "q": .5}``) to add the
    non-mixing comparison path.
    """
    t0 = time.perf_counter()
    opts = config.options
    n = config.sizes[-1]
    lags = [int(v) for v in opts.get("lags", [1, 5, 10, 20])]
    grid = opts.get("thresholds")
    dyadic = bool(opts.get("dyadic", False))
    paths = {"model": simulate_path(config.model, n, "stationary", replicate_rng(config.seed, 0),
                                    int(opts.get("burn_in", 500)))}
    if "andrews" in opts:
        a = opts["andrews"]
        paths["andrews"] = simulate_andrews(float(a.get("rho", 0.5)), float(a.get("q", 0.5)), n,
                                            replicate_rng(config.seed, 1))
    records = []
    summary = {}
    for name, p in paths.items():
        vals = {}
        for lag in lags:
            v = mixing_probe(p, lag, grid, dyadic)
            vals[str(lag)] = v
            records.append({"n": n, "replicate": 0, "name": f"{name}@{lag}", "value": v})
        summary[name] = vals
    return ExperimentReport("mixing-probe", records, summary, _metadata(config, t0, {"dyadic": dyadic}))


RUNNERS = {
    "consistency": run_consistency,
    "normality": run_normality,
    "lrt-calibration": run_lrt_calibration,
    "loglik-convergence": run_loglik_convergence,
    "mixing-probe": run_mixing_probe,
}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    return RUNNERS[config.kind](config)
