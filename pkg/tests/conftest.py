import numpy as np
import pytest

from msnar import ModelSpec


@pytest.fixture
def stab_model():
    """Two regimes, one explosive slope, stable on average."""
    return ModelSpec.linear([[0.9, 0.1], [0.2, 0.8]], b=[0.0, 0.0], rho=[0.5, 1.2], sigma=1.0)


@pytest.fixture
def ref_model():
    return ModelSpec.linear([[0.9, 0.1], [0.2, 0.8]], b=[-1.0, 1.0], rho=[0.2, 0.9], sigma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spec(rng, m, delta_min=0.0):
    A = rng.dirichlet(np.ones(m), size=m)
    if delta_min > 0:
        A = delta_min + (1 - m * delta_min) * A
    return ModelSpec.linear(
        A,
        b=rng.normal(0, 1, m),
        rho=rng.uniform(-0.9, 0.9, m),
        sigma=rng.uniform(0.5, 1.5, m),
    )


# acceptance criteria report one line each; printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
