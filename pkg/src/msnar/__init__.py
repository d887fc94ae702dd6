"""Markov-switching autoregressive models: simulation, filtering, likelihood
fitting and large-sample diagnostics."""

__version__ = "0.1.0"

from ._core import BACKEND
from .errors import (
    AmbiguityError,
    ConvergenceError,
    DegenerateRegimeError,
    DomainError,
    ExperimentError,
    GuardError,
    LabelTieError,
    ModelValidationError,
    MSNARError,
    NumericError,
    OptimizationError,
)
from .model import (
    ModelSpec,
    NoiseSpec,
    RegimeParams,
    TransitionMatrix,
    ValidationReport,
    emission_logdensity,
    load_spec,
    permute_regimes,
    regime_mean,
    register_mean_family,
    register_noise_family,
    save_spec,
    spec_from_dict,
    spec_to_dict,
    validate_model,
)
from .stability import (
    StabilityReport,
    check_stability,
    is_irreducible,
    lyapunov_gamma,
    q_matrix,
    spectral_radius_Qs,
    stationary_distribution,
)
from .simulate import Path, read_path_csv, replicate_rng, simulate_andrews, simulate_path, write_path_csv
from .filter import (
    ForgettingRecord,
    brute_force_loglik,
    filter_init,
    filter_step,
    forgetting_bound,
    forward_backward,
    log_likelihood,
    run_filter,
    step_terms,
    windowed_step_terms,
)
from .estimate import (
    FitResult,
    LRTResult,
    ParamLayout,
    canonicalize_labels,
    em_fit,
    fit_mle,
    likelihood_ratio_test,
    lrt_statistic,
    score_and_information,
)
from .asymptotics import (
    ExperimentConfig,
    ExperimentReport,
    long_run_variance,
    mixing_probe,
    run_consistency,
    run_experiment,
    run_loglik_convergence,
    run_lrt_calibration,
    run_normality,
)

def reference_model() -> ModelSpec:
    """Two-regime model used throughout the docs and acceptance tests."""
    return ModelSpec.linear([[0.9, 0.1], [0.2, 0.8]], b=[-1.0, 1.0], rho=[0.2, 0.9], sigma=1.0)
