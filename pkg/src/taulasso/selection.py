"""Penalty grids and K-fold cross-validation scored by a tau-scale."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from .exceptions import InvalidInputError, InvalidParameterError, TauLassoError
from .rho import TuningPair
from .scale import tau_scale
from .solver import (
    DEFAULT_STARTS,
    Dataset,
    FitResult,
    adaptive_design,
    fit_tau_lasso,
    fit_tau_path,
    lambda_max,
)

log = logging.getLogger(__name__)

DEFAULT_FOLDS = 5
DEFAULT_N_LAMBDA = 30
DEFAULT_RATIO = 1e-3

PathEstimator = Callable[[Dataset, np.ndarray], np.ndarray]


@dataclass
class CvResult:
    lambda_grid: np.ndarray
    cv_scores: np.ndarray
    best_lambda: float
    fold_assignments: np.ndarray
    seed: int
    warnings: List[str] = field(default_factory=list)
    paths: np.ndarray = None  # full-data path, filled by the select_* helpers

    @property
    def best_index(self) -> int:
        return int(np.flatnonzero(self.lambda_grid == self.best_lambda)[0])


def make_lambda_grid(data: Dataset, tuning: TuningPair = TuningPair(), n_lambda: int = DEFAULT_N_LAMBDA,
                     ratio: float = DEFAULT_RATIO) -> np.ndarray:
    """Decreasing log-spaced grid from ``lambda_max`` to ``ratio * lambda_max``."""
    if n_lambda < 2:
        raise InvalidParameterError(f"n_lambda must be at least 2, got {n_lambda}")
    if not 0.0 < ratio < 1.0:
        raise InvalidParameterError(f"ratio must lie in (0, 1), got {ratio}")
    if not np.any(data.y != 0):
        raise InvalidInputError("response is identically zero")
    top = lambda_max(data, tuning)
    if not top > 0:
        raise InvalidInputError("lambda_max is zero: the null model is already stationary")
    return np.geomspace(top, top * ratio, n_lambda)


def fold_labels(n: int, folds: int, seed: int) -> np.ndarray:
    """Seeded balanced fold labels: a random permutation dealt round-robin."""
    if folds < 2:
        raise InvalidParameterError(f"folds must be at least 2, got {folds}")
    if n < folds:
        raise InvalidInputError(f"n = {n} is smaller than the number of folds ({folds})")
    labels = np.empty(n, dtype=np.int64)
    labels[np.random.default_rng(seed).permutation(n)] = np.arange(n) % folds
    return labels


def cv_score(residuals, tuning: TuningPair = TuningPair()) -> float:
    """Tau-scale of a residual vector; the cross-validation criterion."""
    return float(tau_scale(residuals, tuning.rho0, tuning.rho1, tuning.delta).tau)


def _fold_residuals(data, estimator, grid, labels, k):
    train, test = data.subset(labels != k), data.subset(labels == k)
    try:
        coefs = np.asarray(estimator(train, grid), dtype=float)
    except TauLassoError as exc:
        return None, f"fold {k}: estimator failed ({exc})"
    return test.y[None, :] - coefs @ test.X.T, None


def cross_validate(
    data: Dataset,
    estimator: PathEstimator,
    grid,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    tuning: TuningPair = TuningPair(),
    n_jobs: int = 1,
) -> CvResult:
    """K-fold CV over ``grid`` for a path estimator.

    ``estimator(train, grid)`` returns a ``(len(grid), p)`` coefficient array
    (NaN rows mark failed fits). Out-of-fold residuals from every fold are
    pooled and scored by one tau-scale per penalty. A penalty whose fit
    fails on any fold scores ``+inf``. Ties go to the largest penalty.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise InvalidParameterError("empty penalty grid")
    labels = fold_labels(data.n, folds, seed)

    if n_jobs == 1:
        parts = [_fold_residuals(data, estimator, grid, labels, k) for k in range(folds)]
    else:
        from joblib import Parallel, delayed

        parts = Parallel(n_jobs=n_jobs)(delayed(_fold_residuals)(data, estimator, grid, labels, k) for k in range(folds))

    notes = []
    pooled = np.empty((grid.size, data.n))
    failed = np.zeros(grid.size, dtype=bool)
    for k, (res, msg) in enumerate(parts):
        if res is None:
            failed[:] = True
            notes.append(msg)
            continue
        pooled[:, labels == k] = res
        bad = ~np.all(np.isfinite(res), axis=1)
        for i in np.flatnonzero(bad & ~failed):
            notes.append(f"fold {k}: fit failed at lambda={grid[i]:.6g}")
        failed |= bad

    scores = np.full(grid.size, np.inf)
    for i in np.flatnonzero(~failed):
        scores[i] = cv_score(pooled[i], tuning)
    for msg in notes:
        log.warning(msg)
    if np.all(np.isinf(scores)):
        best = float(np.max(grid))
    else:
        ties = np.flatnonzero(scores == np.min(scores))
        best = float(np.max(grid[ties]))
    return CvResult(grid, scores, best, labels, seed, notes)


def select_tau_lasso(
    data: Dataset,
    tuning: TuningPair = TuningPair(),
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    lam=None,
    grid=None,
    n_lambda: int = DEFAULT_N_LAMBDA,
    ratio: float = DEFAULT_RATIO,
    starts: int = DEFAULT_STARTS,
    n_jobs: int = 1,
):
    """Cross-validated tau-Lasso.

    The final fit uses ``starts`` starts, the first being the full-data path
    solution at the chosen penalty. Returns a FitResult with ``cv``
    attached as an attribute (``None`` when ``lam`` was given).
    """
    cv = None
    init = None
    if lam is None:
        grid = make_lambda_grid(data, tuning, n_lambda, ratio) if grid is None else np.sort(np.asarray(grid, float))[::-1]
        path_fn = lambda d, g: fit_tau_path(d, g, tuning)  # noqa: E731
        cv = cross_validate(data, path_fn, grid, folds, seed, tuning, n_jobs)
        lam = cv.best_lambda
        path = path_fn(data, grid)
        cv.paths = path
        row = path[cv.best_index]
        init = row if np.all(np.isfinite(row)) else None
    fit = fit_tau_lasso(data, lam, tuning, init=init, starts=starts, seed=seed)
    fit.cv = cv
    return fit


def select_adaptive_tau_lasso(
    data: Dataset,
    pilot,
    tuning: TuningPair = TuningPair(),
    gamma: float = 1.0,
    epsilon_floor=None,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    lam=None,
    grid=None,
    n_lambda: int = DEFAULT_N_LAMBDA,
    ratio: float = DEFAULT_RATIO,
    starts: int = DEFAULT_STARTS,
    n_jobs: int = 1,
):
    """Cross-validated adaptive tau-Lasso with penalty weights fixed from ``pilot``.

    Selection runs on the reweighted design, so the grid is relative to the
    adaptive problem's own ``lambda_max``.
    """
    weights, keep, scaled = adaptive_design(data, pilot, gamma, epsilon_floor)
    inner = select_tau_lasso(scaled, tuning, folds, seed, lam, grid, n_lambda, ratio, starts, n_jobs)
    beta = np.zeros(data.p)
    beta[keep] = inner.beta / weights.w[keep]
    inner.beta = beta
    inner.weights = weights.w
    return inner
