"""Trigonometric regression with Gaussian, log-normal and gamma-GLM responses."""

__version__ = "0.1.0"

from .design import (
    AmpPhase,
    DesignSpec,
    amp_phase_to_beta,
    basis_row,
    beta_to_amp_phase,
    design_matrix,
    equispaced_times,
    gram_matrix,
    nyquist_check,
)
from .experiments import MCConfig, MCReport, compare_orders, run_mc_bias
from .gensim import GGSpec, RngStream, simulate_dataset
from .models import FitResult, fit, fit_glm, fit_lognormal, fit_ols, predict
from .specfun import GGShape, c_zero, digamma, expected_log_gg, ln_gamma

__all__ = [
    "AmpPhase",
    "DesignSpec",
    "FitResult",
    "GGShape",
    "GGSpec",
    "MCConfig",
    "MCReport",
    "RngStream",
    "amp_phase_to_beta",
    "basis_row",
    "beta_to_amp_phase",
    "c_zero",
    "compare_orders",
    "design_matrix",
    "digamma",
    "equispaced_times",
    "expected_log_gg",
    "fit",
    "fit_glm",
    "fit_lognormal",
    "fit_ols",
    "gram_matrix",
    "ln_gamma",
    "nyquist_check",
    "predict",
    "run_mc_bias",
    "simulate_dataset",
]
