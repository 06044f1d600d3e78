"""End-to-end estimation: standardize, select penalties, refit, map back."""
from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError, InvalidParameterError
from .pilot import PILOT_KINDS, compute_pilot
from .preprocessing import destandardize_coefficients, standardize
from .rho import TuningPair
from .selection import DEFAULT_FOLDS, select_adaptive_tau_lasso, select_tau_lasso
from .solver import DEFAULT_STARTS, Dataset, FitResult, fit_tau_lasso

ESTIMATORS = ("tau-lasso", "adaptive", "oracle")


def fit_oracle(data: Dataset, support, tuning: TuningPair = TuningPair(), starts: int = DEFAULT_STARTS,
               seed: int = 0) -> FitResult:
    """Unpenalised tau-regression on the columns in ``support``; all others are zero."""
    support = np.asarray(support)
    if support.dtype == bool:
        support = np.flatnonzero(support)
    if support.size == 0:
        raise InvalidInputError("oracle support is empty")
    res = fit_tau_lasso(Dataset(data.y, data.X[:, support]), 0.0, tuning, starts=starts, seed=seed)
    beta = np.zeros(data.p)
    beta[support] = res.beta
    res.beta = beta
    return res


def fit_estimator(
    data: Dataset,
    estimator: str = "adaptive",
    pilot: str = "s-ridge",
    tuning: TuningPair = TuningPair(),
    gamma: float = 1.0,
    epsilon_floor=None,
    lam=None,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    starts: int = DEFAULT_STARTS,
    support=None,
    standardize_data: bool = True,
    n_jobs: int = 1,
) -> FitResult:
    """Fit one of the estimators with cross-validated penalties.

    With ``standardize_data`` the design is robustly standardized and the
    response centred first. The returned coefficients and intercept are on
    the original scale, so ``result.predict(X)`` works on raw predictors.
    For the adaptive estimator the pilot is computed on the full data and
    its weights stay fixed while the adaptive penalty is cross-validated.
    """
    if estimator not in ESTIMATORS:
        raise InvalidParameterError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    if pilot not in PILOT_KINDS:
        raise InvalidParameterError(f"unknown pilot kind {pilot!r}; expected one of {PILOT_KINDS}")
    if standardize_data:
        work, mapping = standardize(data)
    else:
        work, mapping = data, None

    pilot_beta = None
    if estimator == "tau-lasso":
        res = select_tau_lasso(work, tuning, folds, seed, lam=lam, starts=starts, n_jobs=n_jobs)
    elif estimator == "adaptive":
        pilot_beta = compute_pilot(work, pilot, tuning, folds, seed)
        res = select_adaptive_tau_lasso(work, pilot_beta, tuning, gamma, epsilon_floor, folds, seed, lam=lam,
                                        starts=starts, n_jobs=n_jobs)
    else:
        if support is None:
            raise InvalidInputError("the oracle estimator needs the true support")
        res = fit_oracle(work, support, tuning, starts, seed)

    if mapping is not None:
        res.beta = destandardize_coefficients(res.beta, mapping)
        res.intercept = mapping.intercept(res.beta)
    res.pilot = None if pilot_beta is None else (
        destandardize_coefficients(pilot_beta, mapping) if mapping is not None else pilot_beta)
    return res
