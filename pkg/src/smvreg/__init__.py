"""Bayesian semiparametric multivariate-response Gaussian regression.

Smooth means and log-variances through radial-basis expansions with
spike-slab selection, three correlation-matrix priors (common, clustered
correlations, clustered variables), a full MCMC sampler, posterior
summaries, and a simulation harness.
"""

__version__ = "0.1.0"

from .correlation import (
    COMMON,
    GROUPED_CORRELATIONS,
    GROUPED_VARIABLES,
    CorrelationModelSpec,
    fisher_z,
    inv_fisher_z,
    link_jacobian,
)
from .design import KnotGrid, TermSpec, build_designs, make_knots, radial_basis_row, standardize
from .likelihood import CovarianceFactors, compute_S, full_loglik, marginal_loglik
from .model import Dataset, GammaPrior, ModelSpec, PriorConfig, ScalePrior, Schedule
from .posterior import (
    correlation_summary,
    curve_summary,
    inclusion_probabilities,
    precision_threshold_probs,
)
from .sampler import ChainSamples, SamplerState, TuningState, run_chain
from .simharness import SimScenario, check_snr, gen_dataset, run_table

__all__ = [
    "COMMON",
    "GROUPED_CORRELATIONS",
    "GROUPED_VARIABLES",
    "ChainSamples",
    "CorrelationModelSpec",
    "CovarianceFactors",
    "Dataset",
    "GammaPrior",
    "KnotGrid",
    "ModelSpec",
    "PriorConfig",
    "SamplerState",
    "ScalePrior",
    "Schedule",
    "SimScenario",
    "TermSpec",
    "TuningState",
    "build_designs",
    "check_snr",
    "compute_S",
    "correlation_summary",
    "curve_summary",
    "fisher_z",
    "full_loglik",
    "gen_dataset",
    "inclusion_probabilities",
    "inv_fisher_z",
    "link_jacobian",
    "make_knots",
    "marginal_loglik",
    "precision_threshold_probs",
    "radial_basis_row",
    "run_chain",
    "run_table",
    "standardize",
]
