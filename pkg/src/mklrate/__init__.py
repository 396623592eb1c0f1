"""Elastic-net multiple kernel learning at desk scale.

Kernels with exactly controlled spectra, sparse synthetic truths, a block
coordinate descent solver for the group-penalized estimator, incoherence
diagnostics, and a sweep harness that measures empirical learning rates
against their closed-form reference exponents.
"""

from ._version import __version__
from .diagnostics import (
    DiagnosticsReport,
    FeasibilityProfile,
    MinimaxExponents,
    build_report,
    check_incoherence_bound,
    empirical_kappa_min,
    empirical_rho,
    entropy_exponent,
    lambda_star,
    minimax_reference,
    mixed_norm,
    plan_feasibility_profile,
    rate_exponent,
)
from .harness import (
    CellResult,
    ExperimentConfig,
    ProfileComparison,
    RateReport,
    compare_profiles,
    exact_l2_error,
    monte_carlo_l2_error,
    run_sweep,
)
from .kernels import (
    EigenGram,
    GramSet,
    SpectralKernel,
    apply_operator_power,
    assemble_gram,
    empirical_spectrum,
    evaluate_kernel,
    series_l2_norm_sq,
    series_rkhs_norm_sq,
)
from .solver import (
    MklSolution,
    RegularizationPlan,
    SolverError,
    block_update,
    compute_lambda_max,
    eta,
    objective,
    solve,
    theory_plan,
    xi_n,
    zero_block_test,
)
from .synthetic import (
    RegressionSample,
    TruthModel,
    build_truth,
    evaluate_truth,
    sample_data,
)

__all__ = [
    "__version__",
    "CellResult",
    "DiagnosticsReport",
    "EigenGram",
    "ExperimentConfig",
    "FeasibilityProfile",
    "GramSet",
    "MinimaxExponents",
    "MklSolution",
    "ProfileComparison",
    "RateReport",
    "RegressionSample",
    "RegularizationPlan",
    "SolverError",
    "SpectralKernel",
    "TruthModel",
    "apply_operator_power",
    "assemble_gram",
    "block_update",
    "build_report",
    "build_truth",
    "check_incoherence_bound",
    "compare_profiles",
    "compute_lambda_max",
    "empirical_kappa_min",
    "empirical_rho",
    "empirical_spectrum",
    "entropy_exponent",
    "eta",
    "evaluate_kernel",
    "evaluate_truth",
    "exact_l2_error",
    "lambda_star",
    "minimax_reference",
    "mixed_norm",
    "monte_carlo_l2_error",
    "objective",
    "plan_feasibility_profile",
    "rate_exponent",
    "run_sweep",
    "sample_data",
    "series_l2_norm_sq",
    "series_rkhs_norm_sq",
    "solve",
    "theory_plan",
    "xi_n",
    "zero_block_test",
]
