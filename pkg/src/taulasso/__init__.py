"""Robust sparse linear regression with the tau-Lasso and adaptive tau-Lasso."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .exceptions import (
    DegeneratePilotError,
    DegenerateScaleError,
    DegenerateWeightError,
    InconsistentSupportError,
    InvalidInputError,
    InvalidParameterError,
    InvalidSpecError,
    SingularExpectationError,
    SolverDivergenceError,
    TauLassoError,
    UndefinedMetricError,
)
from .influence import (
    ExpectationEngine,
    FunctionalValue,
    InfluenceReport,
    if_adaptive_tau_lasso,
    if_tau_lasso,
    influence_grid,
    sensitivity_curve,
)
from .pilot import PilotResult, fit_s_ridge, select_pilot_lambda
from .pipeline import fit_estimator, fit_oracle
from .preprocessing import (
    StandardizationMap,
    bisquare_location,
    bisquare_scale,
    destandardize_coefficients,
    standardize,
)
from .rho import (
    RhoFamily,
    TuningPair,
    asymptotic_variance_ratio,
    calibrate_breakdown,
    psi,
    psi_prime,
    psi_weight,
    rho,
    rho_inverse,
)
from .scale import ScaleEstimate, combined_psi_weight, m_scale, tau_scale
from .selection import CvResult, cross_validate, make_lambda_grid, select_adaptive_tau_lasso, select_tau_lasso
from .solver import (
    AdaptiveWeights,
    Dataset,
    FitResult,
    fit_adaptive_tau_lasso,
    fit_tau_lasso,
    fit_tau_path,
    lambda_max,
    objective,
)
