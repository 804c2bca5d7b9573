"""Dynamic programming with unbounded rewards via action-value fixed points."""

from .core import (AssumptionError, DynamicProgram, ModelError, check_assumption_one, feasible_pairs,
                   load_model, r_bar, r_hat, save_model)
from .models import (BuiltModel, ConfigError, CrraUtility, ModelConfig, build_job_search,
                     build_model, build_optimal_default, build_optimal_savings, build_portfolio,
                     build_rs_growth, build_savings_labor, load_config)
from .q_transform import (ConvergenceReport, apply_S, greedy_policy, measure_contraction,
                          recover_value, sigma_value, solve_fixed_point)
from .risk_sensitive import (RiskParams, apply_S_rs, apply_W, entropic_expectation, r_hat_rs,
                             sigma_value_rs, solve_fixed_point_rs, verify_monotone_assumptions)
from .stochastics import (MarkovChain, ShockQuadrature, compose_kernel, lognormal_quadrature,
                          project_to_grid)
from .weighted_norm import (CertificateError, WeightFunction, auto_weight_linear,
                            certify_assumption_three, kappa_hat, kappa_norm,
                            value_upper_bound, solve_fixed_point_weighted)

__all__ = [
    "BuiltModel", "ConfigError", "CrraUtility", "ModelConfig", "build_job_search", "build_model",
    "build_optimal_default", "build_optimal_savings", "build_portfolio", "build_rs_growth",
    "build_savings_labor", "value_upper_bound", "load_config",
    "AssumptionError", "CertificateError", "ConvergenceReport", "DynamicProgram", "MarkovChain",
    "ModelError", "RiskParams", "ShockQuadrature", "WeightFunction", "apply_S", "apply_S_rs",
    "apply_W", "auto_weight_linear", "certify_assumption_three", "check_assumption_one",
    "compose_kernel", "entropic_expectation", "feasible_pairs", "greedy_policy", "kappa_hat",
    "kappa_norm", "load_model", "lognormal_quadrature", "measure_contraction", "project_to_grid",
    "r_bar", "r_hat", "r_hat_rs", "recover_value", "save_model", "sigma_value", "sigma_value_rs",
    "solve_fixed_point", "solve_fixed_point_rs", "solve_fixed_point_weighted",
    "verify_monotone_assumptions",
]
