"""Survival analysis with missing failure indicators.

Cox regression and cumulative-hazard estimation when failure indicators
(or causes of death) are partially observed, including adaptively
weighted estimators, their variance estimators, and a reproducible
Monte Carlo harness.
"""

from .baseline import baseline_lambda1, baseline_lambda2, baseline_variance, breslow
from .cox import (
    Combined,
    FitResult,
    adaptive_fit,
    estimate_covariance_components,
    rho_hat,
    score,
    score_jacobian,
    sigma_of_D,
    solve,
    wald_test,
)
from .curves import BaselineCurve, HazardCurve, SurvivalCurve
from .data import (
    Dataset,
    FailureStatus,
    SurvivalRecord,
    Type2Status,
    counting_increments,
    read_csv,
    risk_set_size,
    validate,
)
from .hazard import (
    AuxiliaryFunctionals,
    adaptive_survival,
    alpha_star_hat,
    auxiliary_functionals,
    complete_case_survival,
    gamma_alpha_hat,
    ipw_product_limit,
    kaplan_meier,
    lambda1,
    lambda2,
    lambda_alpha,
    lo_estimator,
    nelson_aalen,
)
from .simulation import SimDesign, SimReport, calibrate_censoring, generate, run
from .type2 import (
    Type2Fit,
    baseline_phi,
    estimate_covariance_components_phi,
    fit_phi,
    one_sample_phi,
    score_phi,
    solve_phi,
    tau_hat,
)

__version__ = "0.1.0"

__all__ = [
    "AuxiliaryFunctionals", "BaselineCurve", "Combined", "Dataset",
    "FailureStatus", "FitResult", "HazardCurve", "SimDesign", "SimReport",
    "SurvivalCurve", "SurvivalRecord", "Type2Fit", "Type2Status",
    "adaptive_fit", "adaptive_survival", "alpha_star_hat",
    "auxiliary_functionals", "baseline_lambda1", "baseline_lambda2",
    "baseline_phi", "baseline_variance", "breslow", "calibrate_censoring",
    "complete_case_survival", "counting_increments",
    "estimate_covariance_components", "estimate_covariance_components_phi",
    "fit_phi", "gamma_alpha_hat", "generate", "ipw_product_limit",
    "kaplan_meier", "lambda1", "lambda2", "lambda_alpha", "lo_estimator",
    "nelson_aalen", "one_sample_phi", "read_csv", "rho_hat", "risk_set_size",
    "run", "score", "score_jacobian", "score_phi", "sigma_of_D", "solve",
    "solve_phi", "tau_hat", "validate", "wald_test",
]
