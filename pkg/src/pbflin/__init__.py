"""Linearizations of pseudo-Boolean functions: exact complexity measures,
IP formulations and the LABS application."""

from .complexity import (
    CoverResult,
    LcSearchBudget,
    lc_boolean,
    lc_monomials,
    lc_signed_products_exact,
    min_pss_cover,
    partial_sum_set,
    trivial_upper_bound,
)
from .errors import BridgeError, CapExceededError, InputError, PbfError
from .labs import LabsInstance, energy, exhaustive_solve, f_bern_poly, value_indicator_ip
from .milp import MilpModel, SolverBridgeConfig, fortet_model, model_stats, nogood_model, separate_nogood, write_lp
from .poly import (
    BooleanFn,
    LinearizationCertificate,
    MultilinearPoly,
    SignedProduct,
    evaluate,
    interpolate,
    nonlinear_part,
    verify_certificate,
)

__version__ = "0.1.0"

__all__ = [
    "BooleanFn", "BridgeError", "CapExceededError", "CoverResult", "InputError", "LabsInstance",
    "LcSearchBudget", "LinearizationCertificate", "MilpModel", "MultilinearPoly", "PbfError",
    "SignedProduct", "SolverBridgeConfig", "energy", "evaluate", "exhaustive_solve", "f_bern_poly",
    "fortet_model", "interpolate", "lc_boolean", "lc_monomials", "lc_signed_products_exact",
    "min_pss_cover", "model_stats", "nogood_model", "nonlinear_part", "partial_sum_set",
    "separate_nogood", "trivial_upper_bound", "value_indicator_ip", "verify_certificate", "write_lp",
]
