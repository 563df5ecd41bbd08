"""Nonconvex penalized regression paths with strong-rule screening.

Fits MCP, SCAD, lasso, Mnet, and group MCP/SCAD regularization paths for
gaussian, logistic, and Poisson models using targeted-cycling coordinate
descent; discarded variables are certified (and repaired) through the KKT
conditions at every point of the path.
"""

from .backends import BACKEND
from .cv import CVResult, LambdaPath, cross_validate, default_lambda_path, lambda_sequence
from .data import Dataset, StandardizedDesign, load_dataset, standardize, unstandardize
from .groups import (
    GroupDesign,
    GroupLayout,
    build_group_layout,
    fit_group_path,
    fit_group_path_standardized,
    group_lambda_max,
    group_orthonormalize,
    group_strong_set,
)
from .path import CoefPath, ViolationLog, fit_path, fit_path_standardized
from .penalties import PenaltySpec, penalty_derivative, penalty_value, slope_bound, threshold
from .screening import (
    ConvexityStatus,
    ScreenSets,
    basic_rules,
    kkt_check,
    lambda_max,
    local_convexity,
    strong_set,
)
from .simulate import SimDesign, gen_block_corr, gen_common_corr, violation_experiment
from .solver import ConvergenceError, SolverState, glm_outer, objective, solve_fixed_lambda

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CVResult",
    "CoefPath",
    "ConvergenceError",
    "ConvexityStatus",
    "Dataset",
    "GroupDesign",
    "GroupLayout",
    "LambdaPath",
    "PenaltySpec",
    "ScreenSets",
    "SimDesign",
    "SolverState",
    "StandardizedDesign",
    "ViolationLog",
    "basic_rules",
    "build_group_layout",
    "cross_validate",
    "default_lambda_path",
    "fit_group_path",
    "fit_group_path_standardized",
    "fit_path",
    "fit_path_standardized",
    "gen_block_corr",
    "gen_common_corr",
    "glm_outer",
    "group_lambda_max",
    "group_orthonormalize",
    "group_strong_set",
    "kkt_check",
    "lambda_max",
    "lambda_sequence",
    "load_dataset",
    "local_convexity",
    "objective",
    "penalty_derivative",
    "penalty_value",
    "slope_bound",
    "solve_fixed_lambda",
    "standardize",
    "strong_set",
    "threshold",
    "unstandardize",
    "violation_experiment",
]
