"""S-Ridge pilot estimator for the adaptive penalty weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .exceptions import InvalidParameterError, SolverDivergenceError
from .rho import TuningPair
from .solver import BETA_TOL, MAX_ITER, TOL, Dataset, elemental_start

PILOT_KINDS = ("s-ridge", "tau-lasso")


@dataclass
class PilotResult:
    beta: np.ndarray
    s: float
    lambda_ridge: float
    objective: float = float("nan")
    trace: np.ndarray = None
    converged: bool = True


def _run(Xt, y, lam, init, tuning, max_iter, tol, beta_tol):
    beta, s, obj, trace, it, status = kernels.s_ridge_irwls(
        Xt, y, float(lam), np.ascontiguousarray(init, dtype=float), tuning.c0, tuning.delta, max_iter, tol, beta_tol
    )
    return np.asarray(beta), float(s), float(obj), np.asarray(trace), int(status)


def fit_s_ridge(
    data: Dataset,
    lambda_ridge: float,
    tuning: TuningPair = TuningPair(),
    starts: int = 5,
    seed: int = 0,
    init=None,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
    beta_tol: float = BETA_TOL,
) -> PilotResult:
    """Local minimiser of ``s^2(y - X beta) + lambda_ridge * ||beta||_2^2``.

    Each IRWLS step solves the weighted ridge system
    ``(X' W X + lambda * D * I) beta = X' W y`` with ``W = psi0(t)/t`` and
    ``D = sum psi0(t) t``; the best of ``starts`` starts is returned.
    """
    if not lambda_ridge >= 0:
        raise InvalidParameterError(f"lambda_ridge must be non-negative, got {lambda_ridge}")
    Xt = np.ascontiguousarray(data.X.T)
    y = np.ascontiguousarray(data.y)
    rng = np.random.default_rng(seed)
    first = np.zeros(data.p) if init is None else np.asarray(init, dtype=float)
    inits = [first] + [elemental_start(data, rng) for _ in range(starts - 1)]
    best = None
    for b0 in inits:
        beta, s, obj, trace, status = _run(Xt, y, lambda_ridge, b0, tuning, max_iter, tol, beta_tol)
        if not np.isfinite(obj):
            continue
        if best is None or obj < best.objective:
            best = PilotResult(beta, s, float(lambda_ridge), obj, trace, status != kernels.STATUS_MAXITER)
    if best is None:
        raise SolverDivergenceError("S-Ridge objective non-finite from every start")
    return best


def s_ridge_path(data: Dataset, grid, tuning: TuningPair = TuningPair()) -> np.ndarray:
    """Warm-started S-Ridge fits from the largest to the smallest penalty.

    Rows follow the order of ``grid``.
    """
    grid = np.asarray(grid, dtype=float)
    order = np.argsort(-grid, kind="stable")
    Xt = np.ascontiguousarray(data.X.T)
    y = np.ascontiguousarray(data.y)
    beta = np.zeros(data.p)
    out = np.full((grid.size, data.p), np.nan)
    for k in order:
        b, s, obj, trace, status = _run(Xt, y, grid[k], beta, tuning, MAX_ITER, TOL, BETA_TOL)
        if np.isfinite(obj):
            out[k] = b
            beta = b
    return out


def make_ridge_grid(data: Dataset, n_lambda: int = 20, ratio: float = 1e-4) -> np.ndarray:
    """Log-spaced decreasing ridge penalties, from 10x the typical squared column size."""
    if n_lambda < 1 or not 0 < ratio < 1:
        raise InvalidParameterError("need n_lambda >= 1 and ratio in (0, 1)")
    # median of chi^2_1 is 0.4549; robust stand-in for the mean squared column entry
    size = float(np.mean(np.median(data.X**2, axis=0))) / 0.4549364231195724
    top = 10.0 * (size if size > 0 else 1.0)
    return np.geomspace(top, top * ratio, n_lambda)


def select_pilot_lambda(data: Dataset, grid=None, folds: int = 5, seed: int = 0, tuning: TuningPair = TuningPair()):
    """Ridge penalty minimising the tau-scale of pooled out-of-fold residuals."""
    from .selection import cross_validate

    grid = make_ridge_grid(data) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 1:
        return float(grid[0])
    cv = cross_validate(data, lambda d, g: s_ridge_path(d, g, tuning), grid, folds=folds, seed=seed, tuning=tuning)
    return cv.best_lambda


def compute_pilot(data: Dataset, kind: str = "s-ridge", tuning: TuningPair = TuningPair(), folds: int = 5,
                  seed: int = 0, lam=None):
    """Pilot coefficients of the requested kind with a cross-validated penalty.

    ``kind='tau-lasso'`` gives the pilot used for influence-function work.
    """
    if kind == "s-ridge":
        lam = select_pilot_lambda(data, folds=folds, seed=seed, tuning=tuning) if lam is None else lam
        return fit_s_ridge(data, lam, tuning, seed=seed).beta
    if kind == "tau-lasso":
        from .selection import select_tau_lasso

        return select_tau_lasso(data, tuning=tuning, folds=folds, seed=seed, lam=lam).beta
    raise InvalidParameterError(f"unknown pilot kind {kind!r}; expected one of {PILOT_KINDS}")
