"""tau-Lasso and adaptive tau-Lasso fitting.

The solver is iteratively reweighted least squares: at the current
coefficients the tau-scale gradient equals the gradient of a weighted
least-squares loss with weights ``psi(t_i) / t_i`` where
``psi = W psi0 + psi1``. Each outer step minimises that weighted Lasso by
coordinate descent and is accepted through step halving on the true
objective, so the objective trace never increases.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._backend import kernels
from .exceptions import (
    DegeneratePilotError,
    DegenerateScaleError,
    InvalidInputError,
    InvalidParameterError,
    SolverDivergenceError,
)
from .rho import TuningPair, psi, rho
from .scale import m_scale, tau_scale

log = logging.getLogger(__name__)

MAX_ITER = 500
TOL = 1e-10
BETA_TOL = 1e-8
CD_TOL = 1e-10
DEFAULT_STARTS = 5
# Every start gets a short run; only the best few are iterated to convergence.
PRESCREEN_ITER = 20
PRESCREEN_KEEP = 2
PRESCREEN_RATIO = 2.0


@dataclass
class Dataset:
    """Response ``y`` (length n) and design ``X`` (n x p)."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != self.y.size:
            raise InvalidInputError(f"X has shape {X.shape}, expected ({self.y.size}, p)")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(X))):
            raise InvalidInputError("dataset contains non-finite entries")
        self.X = X

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.y[rows], self.X[rows])


@dataclass
class FitResult:
    beta: np.ndarray
    s: float
    tau: float
    objective: float
    lam: float
    trace: np.ndarray
    converged: bool
    degenerate: bool = False
    n_iter: int = 0
    intercept: float = 0.0
    weights: Optional[np.ndarray] = None
    start_index: int = 0
    cv: Optional[object] = None
    pilot: Optional[np.ndarray] = None

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.beta + self.intercept


@dataclass
class AdaptiveWeights:
    """Penalty weights ``w_j = 1 / max(eps, |pilot_j|)^gamma``."""

    w: np.ndarray
    gamma: float = 1.0
    epsilon_floor: float = 0.0

    @classmethod
    def from_pilot(cls, pilot, gamma=1.0, epsilon_floor=0.0) -> "AdaptiveWeights":
        if not gamma > 0:
            raise InvalidParameterError(f"gamma must be positive, got {gamma}")
        if epsilon_floor < 0:
            raise InvalidParameterError("epsilon_floor must be non-negative")
        mag = np.maximum(np.abs(np.asarray(pilot, dtype=float)), epsilon_floor)
        with np.errstate(divide="ignore"):
            w = 1.0 / mag**gamma
        return cls(w=w, gamma=gamma, epsilon_floor=epsilon_floor)


def objective(data: Dataset, beta, lam, weights=None, tuning: TuningPair = TuningPair()) -> float:
    """``tau^2(y - X beta) + lam * sum(w_j |beta_j|)``; unit weights by default."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != data.p:
        raise InvalidInputError(f"beta has length {beta.size}, expected {data.p}")
    if weights is None:
        w = np.ones(data.p)
    else:
        w = weights.w if isinstance(weights, AdaptiveWeights) else np.asarray(weights, dtype=float)
        if w.size != data.p:
            raise InvalidInputError("weights and beta differ in length")
    tau = tau_scale(data.y - data.X @ beta, tuning.rho0, tuning.rho1, tuning.delta).tau
    nz = beta != 0
    return tau**2 + lam * float(np.sum(w[nz] * np.abs(beta[nz])))


def tau_gradient(data: Dataset, beta, tuning: TuningPair = TuningPair()) -> np.ndarray:
    """Gradient of ``tau^2(y - X beta)``: ``-(s/n) sum psi(r_i/s) x_i``.

    Returns zeros for an exact fit (``s = 0``).
    """
    r = data.y - data.X @ np.asarray(beta, dtype=float)
    s = m_scale(r, tuning.rho0, tuning.delta).s
    if s == 0:
        return np.zeros(data.p)
    t = r / s
    c0, c1 = tuning.c0, tuning.c1
    den = np.sum(psi(t, c0) * t)
    wbar = np.sum(2 * rho(t, c1) - psi(t, c1) * t) / den if den > 1e-12 * t.size else 0.0
    return -(s / data.n) * (data.X.T @ (wbar * psi(t, c0) + psi(t, c1)))


def lambda_max(data: Dataset, tuning: TuningPair = TuningPair()) -> float:
    """Smallest penalty for which ``beta = 0`` satisfies the stationarity condition."""
    return float(np.max(np.abs(tau_gradient(data, np.zeros(data.p), tuning)), initial=0.0))


def elemental_start(data: Dataset, rng) -> np.ndarray:
    """Least-squares fit on a random subsample of size ``min(p, n // 2)``."""
    m = max(1, min(data.p, data.n // 2))
    idx = rng.choice(data.n, size=m, replace=False)
    return np.linalg.lstsq(data.X[idx], data.y[idx], rcond=None)[0]


def _run(Xt, y, lam, init, tuning, max_iter, tol, beta_tol, cd_tol):
    beta, s, tau2, obj, trace, it, status = kernels.tau_lasso_irwls(
        Xt, y, float(lam), np.ascontiguousarray(init, dtype=float),
        tuning.c0, tuning.c1, tuning.delta, max_iter, tol, beta_tol, cd_tol,
    )
    return np.asarray(beta), float(s), float(tau2), float(obj), np.asarray(trace), int(it), int(status)


def fit_tau_lasso(
    data: Dataset,
    lam: float,
    tuning: TuningPair = TuningPair(),
    init=None,
    starts: int = DEFAULT_STARTS,
    seed: int = 0,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
    beta_tol: float = BETA_TOL,
    cd_tol: float = CD_TOL,
) -> FitResult:
    """Minimise ``tau^2(y - X beta) + lam * ||beta||_1``.

    Parameters
    ----------
    data : Dataset
    lam : float
        Non-negative penalty level.
    tuning : TuningPair
    init : array, optional
        First start; the zero vector when omitted.
    starts : int
        Total number of starts. Starts after the first are elemental
        least-squares fits on random subsamples drawn from ``seed``. With
        more than ``PRESCREEN_KEEP`` starts, each runs ``PRESCREEN_ITER``
        iterations first and only the best ``PRESCREEN_KEEP`` are iterated
        to convergence (and only those within ``PRESCREEN_RATIO`` times the
        best short-run objective).

    Returns
    -------
    FitResult
        The start with the lowest final objective (ties go to the lowest
        start index). ``degenerate`` is set for exact fits (``s = 0``).
    """
    if not lam >= 0:
        raise InvalidParameterError(f"lambda must be non-negative, got {lam}")
    if starts < 1:
        raise InvalidParameterError("starts must be at least 1")
    init = np.zeros(data.p) if init is None else np.asarray(init, dtype=float).ravel()
    if init.size != data.p:
        raise InvalidInputError(f"init has length {init.size}, expected {data.p}")

    Xt = np.ascontiguousarray(data.X.T)
    y = np.ascontiguousarray(data.y)
    rng = np.random.default_rng(seed)
    inits = [init] + [elemental_start(data, rng) for _ in range(starts - 1)]

    runs = []
    for k, b0 in enumerate(inits):
        short = len(inits) > PRESCREEN_KEEP and max_iter > PRESCREEN_ITER
        out = _run(Xt, y, lam, b0, tuning, PRESCREEN_ITER if short else max_iter, tol, beta_tol, cd_tol)
        if out[6] == kernels.STATUS_DIVERGED or not np.isfinite(out[3]):
            log.debug("start %d diverged", k)
            continue
        runs.append((out[3], k, out))
    runs.sort(key=lambda r: (r[0], r[1]))

    if len(inits) > PRESCREEN_KEEP and runs:
        cutoff = PRESCREEN_RATIO * runs[0][0]
        runs = [r for r in runs[:PRESCREEN_KEEP] if r[0] <= cutoff]

    best = None
    for _, k, out in runs:
        beta, s, tau2, obj, trace, it, status = out
        if status == kernels.STATUS_MAXITER and it < max_iter:
            more = _run(Xt, y, lam, beta, tuning, max_iter - it, tol, beta_tol, cd_tol)
            if more[6] != kernels.STATUS_DIVERGED and np.isfinite(more[3]):
                beta, s, tau2, obj = more[:4]
                trace = np.concatenate([trace, more[4][1:]])
                it, status = it + more[5], more[6]
        if best is None or obj < best.objective or (obj == best.objective and k < best.start_index):
            best = FitResult(
                beta=beta, s=s, tau=float(np.sqrt(max(tau2, 0.0))), objective=obj, lam=float(lam),
                trace=trace, converged=status in (kernels.STATUS_CONVERGED, kernels.STATUS_EXACT_FIT),
                degenerate=status == kernels.STATUS_EXACT_FIT, n_iter=it, start_index=k,
            )
    if best is None:
        raise SolverDivergenceError("objective became non-finite from every start")
    return best


def fit_tau_path(
    data: Dataset,
    grid: Sequence[float],
    tuning: TuningPair = TuningPair(),
    init=None,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
    beta_tol: float = BETA_TOL,
) -> np.ndarray:
    """Warm-started single-start fits along ``grid`` (in the given order).

    Returns an array of shape ``(len(grid), p)``; rows whose fit diverged
    are NaN.
    """
    Xt = np.ascontiguousarray(data.X.T)
    y = np.ascontiguousarray(data.y)
    beta = np.zeros(data.p) if init is None else np.asarray(init, dtype=float)
    out = np.full((len(grid), data.p), np.nan)
    for k, lam in enumerate(grid):
        b, s, tau2, obj, trace, it, status = _run(Xt, y, lam, beta, tuning, max_iter, tol, beta_tol, CD_TOL)
        if status == kernels.STATUS_DIVERGED or not np.isfinite(obj):
            continue
        out[k] = b
        beta = b
    return out


def default_epsilon_floor(y) -> float:
    from .preprocessing import bisquare_scale

    try:
        return 1e-6 * bisquare_scale(y)
    except DegenerateScaleError:
        return 1e-6


def adaptive_design(data: Dataset, pilot, gamma=1.0, epsilon_floor=None):
    """Reweighted design for the adaptive problem.

    Returns ``(weights, keep, scaled_data)`` where ``keep`` masks the
    columns that stay in the model and ``scaled_data`` has columns
    ``x_j / w_j`` for the kept predictors.
    """
    pilot = np.asarray(pilot, dtype=float).ravel()
    if pilot.size != data.p:
        raise InvalidInputError(f"pilot has length {pilot.size}, expected {data.p}")
    if epsilon_floor is None:
        epsilon_floor = default_epsilon_floor(data.y)
    weights = AdaptiveWeights.from_pilot(pilot, gamma, epsilon_floor)
    keep = np.isfinite(weights.w)
    if not keep.any():
        raise DegeneratePilotError("pilot is identically zero and epsilon_floor = 0")
    return weights, keep, Dataset(data.y, data.X[:, keep] / weights.w[keep])


def fit_adaptive_tau_lasso(
    data: Dataset,
    lam: float,
    tuning: TuningPair = TuningPair(),
    pilot=None,
    gamma: float = 1.0,
    epsilon_floor: Optional[float] = None,
    init=None,
    starts: int = DEFAULT_STARTS,
    seed: int = 0,
    **solver_options,
) -> FitResult:
    """Minimise ``tau^2(y - X beta) + lam * sum(w_j |beta_j|)`` via column rescaling.

    Columns are replaced by ``x_j / w_j``, a plain tau-Lasso is solved, and
    the coefficients are mapped back as ``beta_j / w_j``. With
    ``epsilon_floor = 0``, predictors whose pilot entry is exactly zero are
    dropped and their coefficients fixed at zero.
    """
    if pilot is None:
        raise InvalidInputError("adaptive fit requires a pilot estimate")
    weights, keep, scaled = adaptive_design(data, pilot, gamma, epsilon_floor)
    w_kept = weights.w[keep]
    init_scaled = None if init is None else np.asarray(init, dtype=float)[keep] * w_kept
    res = fit_tau_lasso(scaled, lam, tuning, init=init_scaled, starts=starts, seed=seed, **solver_options)
    beta = np.zeros(data.p)
    beta[keep] = res.beta / w_kept
    res.beta = beta
    res.weights = weights.w
    return res
