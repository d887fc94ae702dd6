import json
import warnings

import numpy as np
import pytest

from msnar import (
    ExperimentConfig,
    ModelSpec,
    long_run_variance,
    mixing_probe,
    run_consistency,
    run_experiment,
    run_loglik_convergence,
    run_lrt_calibration,
    run_normality,
    simulate_andrews,
    simulate_path,
)
from msnar.asymptotics import autocovariances, dyadic_unwind, sym_sqrt
from msnar.errors import DomainError, ExperimentError
from msnar.simulate import replicate_rng


@pytest.fixture
def ar1():
    return ModelSpec.linear([[1.0]], [1.0], [0.5], 1.0)


def test_config_invariants(ar1):
    with pytest.raises(DomainError):
        ExperimentConfig("consistency", ar1, [500, 200], 5)
    with pytest.raises(DomainError):
        ExperimentConfig("consistency", ar1, [500], 1)
    with pytest.raises(DomainError):
        ExperimentConfig("bogus", ar1, [500], 5)
    cfg = ExperimentConfig("normality", ar1, [300], 4, seed=3, options={"slopes": "free"})
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))).to_dict() == cfg.to_dict()


def test_consistency_ar1_rate(ar1):
    rep = run_consistency(ExperimentConfig("consistency", ar1, [500, 2000], 40, seed=1))
    ratio = rep.summary["error_ratio"]["2000/500"]["rho[0]"]
    assert 0.4 <= ratio <= 0.7
    assert rep.summary["included"] + rep.summary["failed"] == 80


def test_consistency_deterministic(ar1, tmp_path):
    cfg = ExperimentConfig("consistency", ar1, [200, 400], 2, seed=9)
    a, b = run_consistency(cfg), run_consistency(cfg)
    assert a.records == b.records
    cfg.options["threads"] = 2
    assert run_consistency(cfg).records == a.records
    a.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 3
    a.write_json(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["kind"] == "consistency"


def test_unstable_truth_rejected():
    spec = ModelSpec.linear([[0.5, 0.5], [0.5, 0.5]], [0, 1], [1.1, 1.3], 1.0)
    with pytest.raises(ExperimentError):
        run_consistency(ExperimentConfig("consistency", spec, [100], 2))


def test_normality_small(ar1):
    rep = run_normality(ExperimentConfig("normality", ar1, [1000], 60, seed=2))
    s = rep.summary
    assert s["included"] + s["excluded"] + s["failed"] == 60
    assert set(s["per_coordinate"]) == {"b[0]", "rho[0]", "log_sigma"}
    for v in s["per_coordinate"].values():
        assert v["sup_distance"] < 0.25


def test_normality_relabel_equivariant(ref_model):
    cfg = ExperimentConfig("normality", ref_model, [400], 3, seed=4, options={"method": "em"})
    swapped = ExperimentConfig("normality", ModelSpec.linear([[0.8, 0.2], [0.1, 0.9]], [1, -1], [0.9, 0.2], 1.0),
                               [400], 3, seed=4, options={"method": "em"})
    a, b = run_normality(cfg), run_normality(swapped)
    # the truth is canonicalised before simulation, so relabelling changes nothing
    assert a.records == b.records


def test_sym_sqrt():
    M = np.array([[4.0, 1.0], [1.0, 3.0]])
    R = sym_sqrt(M)
    assert np.allclose(R @ R, M) and np.allclose(R, R.T)


def test_lrt_needs_null(ref_model):
    with pytest.raises(ExperimentError):
        run_lrt_calibration(ExperimentConfig("lrt-calibration", ref_model, [300], 2))


def test_lrt_small_nonnegative():
    null = ModelSpec.linear([[0.9, 0.1], [0.2, 0.8]], [-1, 1], [0, 0], 1.0)
    rep = run_lrt_calibration(ExperimentConfig("lrt-calibration", null, [500], 12, seed=5))
    assert all(r["statistic"] >= 0 for r in rep.records)
    assert set(rep.summary["exceedance"]) == {"0.90", "0.95", "0.99"}
    assert rep.summary["cutoffs"]["0.95"] == 3.841


def test_loglik_convergence(ref_model):
    far = {"m": 2, "transition": [[0.5, 0.5], [0.5, 0.5]], "regimes": [{"b": 0, "rho": 0}, {"b": 2, "rho": 0.5}],
           "sigma": 2.0, "initial": None}
    cfg = ExperimentConfig("loglik-convergence", ref_model, list(range(5000, 50001, 5000)), 2, seed=1,
                           options={"eval_points": [far], "seeds": [1, 2]})
    rep = run_loglik_convergence(cfg)
    pts = rep.summary["points"]
    for s in ("1", "2"):
        assert pts["truth"][s]["final"] >= pts["point0"][s]["final"] - 0.05
        assert pts["truth"][s]["tail_oscillation"] < 0.05


def test_lrv_iid_and_constant():
    x = replicate_rng(0, 1).standard_normal(100000)
    assert long_run_variance(x) == pytest.approx(1.0, abs=0.05)
    with pytest.warns(RuntimeWarning):
        assert long_run_variance(np.full(1000, 3.0)) == 0.0


def test_lrv_ar1():
    g = replicate_rng(0, 2)
    e = g.standard_normal(200000)
    y = np.empty_like(e)
    y[0] = e[0]
    for k in range(1, len(e)):
        y[k] = 0.5 * y[k - 1] + e[k]
    assert long_run_variance(y, 60) == pytest.approx(4.0, rel=0.1)


def test_lrv_errors_and_warning():
    with pytest.raises(DomainError):
        long_run_variance(np.zeros(50), 10)
    # Bartlett weights keep the estimate >= 0; only exact zero is flagged
    with pytest.warns(RuntimeWarning):
        long_run_variance(np.ones(100), 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert long_run_variance(np.tile([1.0, -1.0], 50), 1) > 0


def test_autocovariance_lag0():
    x = np.arange(10.0)
    assert autocovariances(x, 0)[0] == pytest.approx(np.var(x))


def test_probe_iid_and_decay(ref_model):
    y = replicate_rng(0, 3).standard_normal(100000)
    assert mixing_probe(y, 5) < 0.02
    p = simulate_path(ref_model, 100000, seed=8)
    assert mixing_probe(p, 20) < mixing_probe(p, 1)


def test_probe_andrews_dyadic():
    p = simulate_andrews(0.5, 0.5, 100000, seed=9)
    assert mixing_probe(p, 10, dyadic=True) > 0.05
    # y_t is recovered exactly from y_{t+lag} (up to the dyadic digits that fit in a double)
    z = dyadic_unwind(p.y[10:], 10)
    assert np.abs(z[60:] - p.y[:-10][60:]).max() < 1e-6


def test_probe_length_guard():
    with pytest.raises(DomainError):
        mixing_probe(np.zeros(500), 10)


def test_run_mixing_experiment(ref_model):
    cfg = ExperimentConfig("mixing-probe", ref_model, [20000], 2, seed=1,
                           options={"lags": [1, 10], "dyadic": True, "andrews": {"rho": 0.5, "q": 0.5}})
    rep = run_experiment(cfg)
    assert rep.summary["andrews"]["10"] > 0.05
    assert rep.summary["model"]["10"] < rep.summary["model"]["1"]
