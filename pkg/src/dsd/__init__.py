"""Determinantal sampling designs on finite populations."""

from .constructions import (
    SchurHornState,
    ToeplitzRootSpec,
    averaged_kernel,
    etf63_kernel,
    laplacian_kernel,
    min_beta,
    poisson_kernel,
    schur_horn_projection,
    simple_feasibility,
    toeplitz_root_kernel,
    toeplitz_symbol_kernel,
)
from .estimation import (
    EstimationReport,
    Population,
    concentration_bound,
    ht_total,
    linear_total,
    mse_exact,
    perfect_estimation_check,
    var_estimate_ht,
    var_estimate_syg,
)
from .kernel import (
    InclusionProbs,
    Kernel,
    complement,
    inclusion_probs,
    is_projection,
    restrict,
    size_moments,
    stratification,
    validate,
)
from .optimizer import balanced_objective, greedy_rotations, ordered_projection, rank1_optimal, rotation_solve
from .sampler import Sample, exact_distribution, sample_general, sample_projection, size_law

__version__ = "0.1.0"

__all__ = [
    "EstimationReport",
    "InclusionProbs",
    "Kernel",
    "Population",
    "Sample",
    "SchurHornState",
    "ToeplitzRootSpec",
    "averaged_kernel",
    "balanced_objective",
    "complement",
    "concentration_bound",
    "etf63_kernel",
    "exact_distribution",
    "greedy_rotations",
    "ht_total",
    "inclusion_probs",
    "is_projection",
    "laplacian_kernel",
    "linear_total",
    "min_beta",
    "mse_exact",
    "ordered_projection",
    "perfect_estimation_check",
    "poisson_kernel",
    "rank1_optimal",
    "restrict",
    "rotation_solve",
    "sample_general",
    "sample_projection",
    "schur_horn_projection",
    "simple_feasibility",
    "size_law",
    "size_moments",
    "stratification",
    "toeplitz_root_kernel",
    "toeplitz_symbol_kernel",
    "validate",
    "var_estimate_ht",
    "var_estimate_syg",
]
