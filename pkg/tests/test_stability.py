import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msnar import (
    ModelSpec,
    check_stability,
    is_irreducible,
    lyapunov_gamma,
    q_matrix,
    spectral_radius_Qs,
    stationary_distribution,
)
from msnar.errors import AmbiguityError, DomainError

# closed forms, worked by hand for A=[[.9,.1],[.2,.8]], rho=(.5,1.2)
GAMMA_REF = (2 / 3) * math.log(0.5) + (1 / 3) * math.log(1.2)
RADIUS_REF = (1.41 + math.sqrt(1.41**2 - 4 * (0.45 * 0.96 - 0.12 * 0.10))) / 2


def eig2(Q):
    tr = Q[0, 0] + Q[1, 1]
    det = Q[0, 0] * Q[1, 1] - Q[0, 1] * Q[1, 0]
    return (tr + math.sqrt(tr * tr - 4 * det)) / 2


def test_stationary_two_state():
    mu = stationary_distribution([[0.9, 0.1], [0.2, 0.8]])
    assert np.allclose(mu, [2 / 3, 1 / 3], atol=1e-12)


def test_identity_is_ambiguous():
    with pytest.raises(AmbiguityError):
        stationary_distribution(np.eye(2))
    assert not is_irreducible(np.eye(2))


def test_rank_one_chain():
    v = np.array([0.2, 0.5, 0.3])
    assert np.allclose(stationary_distribution(np.tile(v, (3, 1))), v, atol=1e-12)


def test_gamma_values():
    assert lyapunov_gamma([0.5, 1.2], [2 / 3, 1 / 3]) == pytest.approx(GAMMA_REF, abs=1e-14)
    assert GAMMA_REF == pytest.approx(-0.401324, abs=1e-6)
    assert lyapunov_gamma([1.0, 1.0], [0.5, 0.5]) == 0.0
    assert lyapunov_gamma([math.e], [1.0]) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DomainError):
        lyapunov_gamma([0.5, -0.1], [0.5, 0.5])


def test_q_matrix_and_radius():
    A = [[0.9, 0.1], [0.2, 0.8]]
    assert np.allclose(q_matrix(A, [0.5, 1.2], 1.0), [[0.45, 0.12], [0.10, 0.96]])
    assert spectral_radius_Qs(A, [0.5, 1.2], 1.0) == pytest.approx(RADIUS_REF, abs=1e-10)
    assert RADIUS_REF == pytest.approx(0.98253, abs=1e-5)
    assert spectral_radius_Qs([[1.0]], [0.7], 2.0) == pytest.approx(0.49, abs=1e-12)
    assert spectral_radius_Qs(A, [1.0, 1.0], 1.0) == pytest.approx(1.0, abs=1e-12)


def test_radius_s3_closed_form():
    A = np.array([[0.9, 0.1], [0.2, 0.8]])
    Q = q_matrix(A, [0.5, 1.2], 3.0)
    assert spectral_radius_Qs(A, [0.5, 1.2], 3.0) == pytest.approx(eig2(Q), abs=1e-10)
    assert eig2(Q) > 1


def test_report_reference(stab_model):
    rep = check_stability(stab_model, 1.0)
    assert rep.stable
    assert rep.gamma == pytest.approx(-0.401, abs=5e-4)
    assert rep.spectral_radius == pytest.approx(0.9825, abs=5e-5)
    assert set(rep.verdicts) >= {"E1", "E3", "E4", "E5", "E6", "E7", "moment"}
    d = rep.to_dict()
    assert d["moment_order"] == 1.0


def test_report_explosive():
    spec = ModelSpec.linear([[0.9, 0.1], [0.2, 0.8]], [0, 0], [1.1, 1.2], 1.0)
    rep = check_stability(spec)
    assert rep.gamma > 0 and rep.verdicts["E4"] == "fail" and not rep.stable


def test_report_negative_and_zero_slopes():
    rep = check_stability(ModelSpec.linear([[0.5, 0.5], [0.5, 0.5]], [0, 0], [-0.5, 0.0], 1.0))
    assert rep.gamma == -math.inf and rep.stable


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.05, 2.0), st.floats(0.05, 2.0),
       st.sampled_from([1.0, 2.0, 3.5]))
def test_radius_matches_closed_form(p, q, r1, r2, s):
    A = np.array([[1 - p, p], [q, 1 - q]])
    Q = q_matrix(A, [r1, r2], s)
    assert spectral_radius_Qs(A, [r1, r2], s) == pytest.approx(eig2(Q), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_stationary_invariant(m, seed):
    g = np.random.default_rng(seed)
    A = g.dirichlet(np.ones(m), size=m)
    mu = stationary_distribution(A)
    assert np.abs(mu @ A - mu).max() <= 1e-10
    assert abs(mu.sum() - 1) <= 1e-12 and np.all(mu >= 0)
