"""Weighted sharp-function and extrapolation experiments on dyadic grids."""

from .balls import BallFamily
from .czfs import (fefferman_stein_check, fit_levelset, generalized_fs_check, level_set_check,
                   stopping_time)
from .errors import WfsError
from .extrapolation import (RdFConfig, build_extrapolation_weight, calibrate_config, rubio_r,
                            rubio_r_dual, transfer_check)
from .lattice import Domain, DyadicLattice, GridFunction, build_lattice, validate_lattice
from .mixednorm import MixedNormSpec, lambda_scaled_sum, mixed_norm
from .operators import (ball_maximal, ball_sharp, check_comparison, check_hl_bound,
                        dyadic_maximal, dyadic_sharp)
from .pdecheck import (EstimateConfig, ModelOperator, apriori_ratio, differentiate,
                       estimate_suite, halfspace_extension, manufacture_rhs, symbol_ratio)
from .reports import RatioReport
from .weights import Weight, ap_characteristic, power_weight, product_weight, unit_weight

__all__ = [
    "BallFamily", "Domain", "DyadicLattice", "EstimateConfig", "GridFunction", "MixedNormSpec",
    "ModelOperator", "RatioReport", "RdFConfig", "Weight", "WfsError", "ap_characteristic",
    "apriori_ratio", "ball_maximal", "ball_sharp", "build_extrapolation_weight", "build_lattice",
    "calibrate_config", "check_comparison", "check_hl_bound", "differentiate", "dyadic_maximal",
    "dyadic_sharp", "estimate_suite", "fefferman_stein_check", "fit_levelset",
    "generalized_fs_check", "halfspace_extension", "lambda_scaled_sum", "level_set_check",
    "manufacture_rhs", "mixed_norm", "power_weight", "product_weight", "rubio_r", "rubio_r_dual",
    "stopping_time", "symbol_ratio", "transfer_check", "unit_weight", "validate_lattice",
]
