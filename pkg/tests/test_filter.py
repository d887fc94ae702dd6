import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_spec
from msnar import (
    ModelSpec,
    brute_force_loglik,
    filter_init,
    filter_step,
    forgetting_bound,
    forward_backward,
    log_likelihood,
    permute_regimes,
    run_filter,
    step_terms,
    windowed_step_terms,
)
from msnar.errors import DomainError, GuardError
from msnar.filter import brute_force_posterior, forgetting_sweep, smoothed_regime_probabilities
from msnar.model import emission_logdensity


def ar1_closed(y, b, rho, s):
    r = y[1:] - rho * y[:-1] - b
    return -0.5 * len(r) * math.log(2 * math.pi * s * s) - (r @ r) / (2 * s * s)


def test_init(stab_model):
    assert np.allclose(filter_init(stab_model).predictive, [2 / 3, 1 / 3])
    assert np.array_equal(filter_init(stab_model, [1.0, 0.0]).predictive, [1.0, 0.0])
    assert np.array_equal(filter_init(ModelSpec.linear([[1.0]], [0], [0])).predictive, [1.0])


def test_step_m1():
    spec = ModelSpec.linear([[1.0]], [0.5], [0.3], 1.3)
    st_, term = filter_step(filter_init(spec), 1.0, 2.0, spec)
    assert term == pytest.approx(emission_logdensity(2.0, 1.0, 0, spec), abs=1e-15)
    assert st_.k == 2


def test_step_two_term_arithmetic():
    spec = ModelSpec.linear([[0.5, 0.5], [0.5, 0.5]], [0.0, 1.0], [0.0, 0.0], 1.0)
    d = [math.exp(emission_logdensity(0.3, 0.0, i, spec)) for i in range(2)]
    st_, term = filter_step(filter_init(spec, [0.5, 0.5]), 0.0, 0.3, spec)
    assert term == pytest.approx(math.log(0.5 * d[0] + 0.5 * d[1]), abs=1e-14)
    assert np.allclose(st_.filtered, np.array(d) / sum(d), atol=1e-14)
    assert abs(st_.predictive.sum() - 1) < 1e-14


def test_step_accumulates_to_loglik(ref_model, rng):
    y = rng.normal(size=30)
    s = filter_init(ref_model)
    for k in range(1, 30):
        s, _ = filter_step(s, y[k - 1], y[k], ref_model)
    assert s.loglik == pytest.approx(log_likelihood(ref_model, y), rel=1e-12)


def test_m1_closed_form(rng):
    for _ in range(10):
        b, rho, s = rng.normal(), rng.uniform(-0.9, 0.9), rng.uniform(0.3, 2)
        y = rng.normal(size=200)
        spec = ModelSpec.linear([[1.0]], [b], [rho], s)
        assert log_likelihood(spec, y) == pytest.approx(ar1_closed(y, b, rho, s), rel=1e-12)


def test_brute_force_single_step(stab_model):
    y = np.array([0.4, 1.1])
    mu = stab_model.initial_distribution
    expected = math.log(sum(mu[i] * math.exp(emission_logdensity(1.1, 0.4, i, stab_model)) for i in range(2)))
    assert brute_force_loglik(stab_model, y) == pytest.approx(expected, rel=1e-14)


def test_brute_force_guard(stab_model):
    with pytest.raises(GuardError):
        brute_force_loglik(stab_model, np.zeros(25))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 3), st.integers(2, 7), st.integers(0, 2**31))
def test_filter_matches_oracle(m, n, seed):
    g = np.random.default_rng(seed)
    spec = random_spec(g, m)
    y = g.normal(0, 2, n + 1)
    bf = brute_force_loglik(spec, y)
    assert abs(log_likelihood(spec, y) - bf) <= 1e-10 * abs(bf)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**31))
def test_relabel_invariance(m, seed):
    g = np.random.default_rng(seed)
    spec = random_spec(g, m)
    y = g.normal(size=80)
    perm = g.permutation(m)
    assert log_likelihood(permute_regimes(spec, perm), y) == pytest.approx(log_likelihood(spec, y), abs=1e-12 * 80)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31))
def test_filter_laws_are_probabilities(m, seed):
    g = np.random.default_rng(seed)
    spec = random_spec(g, m)
    out = run_filter(spec, g.normal(size=50))
    for arr in (out.predictive, out.filtered):
        assert np.all(arr >= 0)
        assert np.abs(arr.sum(axis=1) - 1).max() <= 1e-10
    assert np.isfinite(out.loglik) and out.loglik == pytest.approx(out.terms.sum())


def test_extreme_observation_stays_finite(stab_model):
    y = np.array([0.0, 1.0, 60.0, -40.0, 0.5])
    assert np.isfinite(log_likelihood(stab_model, y))


def test_bound_value():
    assert forgetting_bound(0.5, 5, 1) == pytest.approx(0.5)


def test_windowed_terms(ref_model, rng):
    y = rng.normal(size=60)
    rec = windowed_step_terms(ref_model, y, 30, 0)
    assert rec.gap == 0.0
    rec = windowed_step_terms(ref_model, y, 40, 25)
    assert 0 <= rec.gap <= rec.bound
    assert rec.d_k0 == pytest.approx(step_terms(ref_model, y)[39], abs=1e-12)
    with pytest.raises(DomainError):
        windowed_step_terms(ref_model, y, 10, 10)


def test_uniform_chain_forgets_in_one_step(rng):
    spec = ModelSpec.linear(np.full((3, 3), 1 / 3), [0, 1, 2], [0.1, 0.2, 0.3], 1.0)
    y = rng.normal(size=30)
    for l in range(0, 20):
        for k in range(l + 2, 29):
            assert windowed_step_terms(spec, y, k, l).gap == pytest.approx(0.0, abs=1e-13)


def test_zero_delta_rejected(stab_model, rng):
    spec = ModelSpec.linear([[1.0, 0.0], [0.5, 0.5]], [0, 1], [0, 0], 1.0)
    with pytest.raises(DomainError, match="min a_ij > 0"):
        windowed_step_terms(spec, rng.normal(size=10), 5, 2)


def test_sweep_matches_pointwise(ref_model, rng):
    y = rng.normal(size=40)
    gaps, bounds = forgetting_sweep(ref_model, y, 10)
    for k, l in [(5, 2), (30, 21), (39, 38)]:
        assert gaps[k - 1, k - l - 1] == pytest.approx(windowed_step_terms(ref_model, y, k, l).gap, abs=1e-13)
    finite = np.isfinite(gaps)
    assert np.all(gaps[finite] <= bounds[finite])


def test_smoother_m1_and_last_row(ref_model, rng):
    y = rng.normal(size=40)
    sm = smoothed_regime_probabilities(ModelSpec.linear([[1.0]], [0], [0.5]), y)
    assert np.all(sm == 1.0)
    sm = smoothed_regime_probabilities(ref_model, y)
    assert np.allclose(sm[-1], run_filter(ref_model, y).filtered[-1], atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(2, 6), st.integers(0, 2**31))
def test_smoother_matches_oracle(m, n, seed):
    g = np.random.default_rng(seed)
    spec = random_spec(g, m)
    y = g.normal(0, 2, n + 1)
    assert np.abs(smoothed_regime_probabilities(spec, y) - brute_force_posterior(spec, y)).max() <= 1e-9


def test_transition_counts_sum(ref_model, rng):
    y = rng.normal(size=100)
    ll, sm, xi = forward_backward(ref_model, y)
    assert xi.sum() == pytest.approx(98, abs=1e-9)
    assert np.allclose(xi.sum(axis=1), sm[:-1].sum(axis=0), atol=1e-9)
