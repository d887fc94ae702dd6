import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msnar import (
    ModelSpec,
    emission_logdensity,
    load_spec,
    permute_regimes,
    regime_mean,
    register_mean_family,
    save_spec,
    spec_from_dict,
    spec_to_dict,
    validate_model,
)
from msnar.errors import DomainError, NumericError
from msnar.model import RegimeParams, emission_logdensities

LOG_PHI0 = -0.5 * math.log(2 * math.pi)


def test_clean_report(stab_model):
    rep = validate_model(stab_model)
    assert rep.ok and rep.violations == []


def test_row_sum_violation():
    spec = ModelSpec.linear([[0.9, 0.2], [0.2, 0.8]], [0, 0], [0.5, 1.2], 1.0)
    rep = validate_model(spec)
    assert not rep.ok
    assert any("row 0 sums to 1.1" in v for v in rep.violations)


def test_zero_sigma_violation():
    spec = ModelSpec.linear([[0.9, 0.1], [0.2, 0.8]], [0, 0], [0.5, 1.2], 0.0)
    assert "noise scale must be positive" in validate_model(spec).violations


def test_reports_every_violation():
    spec = ModelSpec.linear([[1.2, -0.2], [0.5, 0.6]], [0, 0], [0.5, 1.2], -1.0, initial=[0.7, 0.7])
    v = validate_model(spec).violations
    assert len(v) >= 4


def test_dimension_mismatch():
    spec = ModelSpec.linear([[1.0]], [0.0, 1.0], [0.5, 0.5], 1.0)
    assert not validate_model(spec).ok


@pytest.mark.parametrize("y_prev,regime,expected", [(2.0, 0, 2.0), (0.0, 1, 3.0), (-1.0, 2, -1.2)])
def test_regime_mean(y_prev, regime, expected):
    spec = ModelSpec.linear(np.full((3, 3), 1 / 3), b=[1.0, 3.0, 0.0], rho=[0.5, 7.0, 1.2])
    assert regime_mean(y_prev, regime, spec) == pytest.approx(expected, abs=1e-15)


def test_regime_out_of_range(stab_model):
    with pytest.raises(IndexError):
        regime_mean(0.0, 2, stab_model)
    with pytest.raises(IndexError):
        emission_logdensity(0.0, 0.0, -1, stab_model)


def test_emission_at_mean_and_one_sigma(stab_model):
    assert emission_logdensity(1.0, 2.0, 0, stab_model) == pytest.approx(LOG_PHI0, abs=1e-15)
    assert emission_logdensity(2.0, 2.0, 0, stab_model) == pytest.approx(LOG_PHI0 - 0.5, abs=1e-15)
    wide = stab_model.replace(noise=type(stab_model.noise)(np.array([2.0])))
    assert emission_logdensity(1.0 + 2.0, 2.0, 0, wide) == pytest.approx(LOG_PHI0 - 0.5 - math.log(2), abs=1e-15)


def test_emission_sum_is_ar1_loglik(rng):
    b, rho, s = 0.3, 0.6, 1.7
    spec = ModelSpec.linear([[1.0]], [b], [rho], s)
    y = rng.normal(size=40)
    total = sum(emission_logdensity(y[k], y[k - 1], 0, spec) for k in range(1, 40))
    r = y[1:] - rho * y[:-1] - b
    closed = -0.5 * len(r) * math.log(2 * math.pi * s * s) - (r @ r) / (2 * s * s)
    assert total == pytest.approx(closed, rel=1e-13)


def test_table_matches_scalar(stab_model, rng):
    y = rng.normal(size=12)
    tab = emission_logdensities(stab_model, y)
    for k in range(11):
        for i in range(2):
            assert tab[k, i] == pytest.approx(emission_logdensity(y[k + 1], y[k], i, stab_model), abs=1e-13)


def test_custom_family_and_nan():
    register_mean_family("tanh", lambda y, th: th[0] + th[1] * np.tanh(y), 2)
    spec = ModelSpec(
        ModelSpec.linear([[1.0]], [0.0], [0.0]).transition,
        RegimeParams(np.array([[0.5, 2.0]]), "tanh"),
        ModelSpec.linear([[1.0]], [0.0], [0.0]).noise,
    )
    assert validate_model(spec).ok
    assert regime_mean(0.0, 0, spec) == pytest.approx(0.5)
    with pytest.raises(NumericError):
        emission_logdensity(float("nan"), 0.0, 0, spec)
    with pytest.raises(DomainError):
        spec.rho


def test_per_regime_sigma_and_stationary_initial(stab_model):
    spec = ModelSpec.linear(stab_model.A, [0, 0], [0.5, 1.2], [1.0, 2.0])
    assert np.allclose(spec.sigma, [1.0, 2.0])
    assert np.allclose(stab_model.initial_distribution, [2 / 3, 1 / 3], atol=1e-12)


def test_json_round_trip(tmp_path, stab_model):
    p = tmp_path / "m.json"
    save_spec(stab_model, p)
    back = load_spec(p)
    assert np.array_equal(back.A, stab_model.A)
    assert np.array_equal(back.regimes.theta, stab_model.regimes.theta)
    assert json.loads(p.read_text())["initial"] is None


def test_malformed_document():
    with pytest.raises(DomainError):
        spec_from_dict({"m": 2, "transition": [[1.0]], "regimes": [{"b": 0, "rho": 0}]})
    with pytest.raises(DomainError):
        spec_from_dict({"m": 1})


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.randoms(use_true_random=False))
def test_permutation_round_trip(m, r):
    g = np.random.default_rng(r.randint(0, 2**31))
    spec = ModelSpec.linear(g.dirichlet(np.ones(m), size=m), g.normal(size=m), g.normal(size=m), g.uniform(0.5, 2, m))
    perm = np.array(r.sample(range(m), m))
    back = permute_regimes(permute_regimes(spec, perm), np.argsort(perm))
    assert np.array_equal(back.A, spec.A)
    assert np.array_equal(back.regimes.theta, spec.regimes.theta)
    assert np.array_equal(back.sigma, spec.sigma)
    assert spec_to_dict(spec_from_dict(spec_to_dict(spec))) == spec_to_dict(spec)
