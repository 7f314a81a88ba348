"""Entrywise l_p low-rank approximation for 1 <= p < 2."""
from .core import (BudgetExceededError, FactorPair, InvalidInputError, NumericalError,
                   SeededRng, entrywise_norm, norm_1p, select_columns)
from .css import CssConfig, css_error, random_column_subset_selection
from .fpt import (FptBudget, guessing_additive_eps_approximation,
                  rounding_guessing_eps_approximation)
from .lewis import apply_sampling, lewis_weights, sampling_matrix
from .oracle import brute_force_opt, hard_instance, planted_instance, svd_baseline
from .rankreduce import (BlockEnumConfig, poly_k_error_and_rank, poly_k_not_bicriteria,
                         remove_bicriteria_rank)
from .sketch import med_p, median_abs, median_sketch_cost, quantile_abs, sample_p_stable
from .solvers import (best_left_factor, lp_regression, min_norm_with_median_constraint,
                      multi_response_regression)

__version__ = "0.1.0"

__all__ = [
    "BlockEnumConfig", "BudgetExceededError", "CssConfig", "FactorPair", "FptBudget",
    "InvalidInputError", "NumericalError", "SeededRng", "apply_sampling", "best_left_factor",
    "brute_force_opt", "css_error", "entrywise_norm", "guessing_additive_eps_approximation",
    "hard_instance", "lewis_weights", "lp_regression", "med_p", "median_abs",
    "median_sketch_cost", "min_norm_with_median_constraint", "multi_response_regression",
    "norm_1p", "planted_instance", "poly_k_error_and_rank", "poly_k_not_bicriteria",
    "quantile_abs", "random_column_subset_selection", "remove_bicriteria_rank",
    "rounding_guessing_eps_approximation", "sample_p_stable", "sampling_matrix",
    "select_columns", "svd_baseline",
]
