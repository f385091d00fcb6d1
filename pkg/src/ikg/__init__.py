"""Sequential sampling for selecting the best alternative per covariate.

The package implements a Bayesian ranking-and-selection loop in which
the performance of each of M alternatives varies with a covariate
vector. Gaussian-process posteriors over the response surfaces
(:mod:`ikg.gp`, :mod:`ikg.kernels`) feed an integrated knowledge-gradient
acquisition (:mod:`ikg.acquisition`) that is maximized per alternative by
projected stochastic gradient ascent with iterate averaging
(:mod:`ikg.sga`). Sampling policies and the budgeted simulation loop live
in :mod:`ikg.policies`; benchmark problems, the replication harness and
variance kriging in :mod:`ikg.experiments`; and a JSON-config command
line in :mod:`ikg.cli`.
"""

from .acquisition import (
    AcquisitionSample,
    BeliefState,
    ikg_gradient_batch,
    ikg_gradient_sample,
    ikg_quadrature_reference,
    kg_gain,
    log_ikg_estimate,
    pointwise_kg,
    posterior_mean_gap,
)
from .config import apply_overrides, default_config, load_config, normalize_config
from .exceptions import ConfigError, DegenerateStateError, NumericalError
from .experiments import (
    CovariateDensity,
    ExperimentResult,
    Problem,
    VarianceModel,
    estimate_oc,
    fit_variance_model,
    griewank_truth,
    latin_hypercube,
    make_problem,
    predict_variance,
    run_experiment,
    sample_covariates,
    write_csv,
    write_manifest,
)
from .gp import ConstantMean, GpPosterior, Observation
from .kernels import SUPPORTED_FAMILIES, Kernel
from .policies import (
    BsePolicy,
    BudgetLedger,
    IkgPolicy,
    IkgRandomCandidatePolicy,
    PolicyContext,
    PrsPolicy,
    RunRecord,
    SamplingDecision,
    ikg_decide,
    ikgwrc_decide,
    learned_decision_rule,
    prs_decide,
    run_budget_loop,
)
from .sga import BoxDomain, SgaConfig, SgaResult, optimize, optimize_saa

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AcquisitionSample",
    "BeliefState",
    "BoxDomain",
    "BsePolicy",
    "BudgetLedger",
    "ConfigError",
    "ConstantMean",
    "CovariateDensity",
    "DegenerateStateError",
    "ExperimentResult",
    "GpPosterior",
    "IkgPolicy",
    "IkgRandomCandidatePolicy",
    "Kernel",
    "NumericalError",
    "Observation",
    "PolicyContext",
    "PrsPolicy",
    "Problem",
    "RunRecord",
    "SamplingDecision",
    "SgaConfig",
    "SgaResult",
    "SUPPORTED_FAMILIES",
    "VarianceModel",
    "apply_overrides",
    "default_config",
    "estimate_oc",
    "fit_variance_model",
    "griewank_truth",
    "ikg_decide",
    "ikg_gradient_batch",
    "ikg_gradient_sample",
    "ikg_quadrature_reference",
    "ikgwrc_decide",
    "kg_gain",
    "latin_hypercube",
    "learned_decision_rule",
    "load_config",
    "log_ikg_estimate",
    "make_problem",
    "normalize_config",
    "optimize",
    "optimize_saa",
    "pointwise_kg",
    "posterior_mean_gap",
    "predict_variance",
    "prs_decide",
    "run_budget_loop",
    "run_experiment",
    "sample_covariates",
    "write_csv",
    "write_manifest",
]
