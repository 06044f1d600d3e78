"""Influence functions of the tau-Lasso and adaptive tau-Lasso, and sensitivity curves.

The estimator is viewed as the root ``theta = (s, beta)`` of the
estimating equations

    E[rho0(r~)] - delta = 0
    -s E[psi(r~) x_A] + q(beta) = 0            r~ = (y - x'beta) / s

on the active coordinates ``A``, where ``psi = W psi0 + psi1`` and ``q``
is the penalty subgradient. Contaminating the distribution by a point mass
at ``z0`` and differentiating gives ``IF = -M^{-1} (Psi(z0) + q)`` with
``M`` the Jacobian of the population equations. For the adaptive estimator
``q`` depends on the pilot too, which adds a term through the pilot's IF.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    InconsistentSupportError,
    InvalidInputError,
    InvalidParameterError,
    SingularExpectationError,
)
from .rho import TuningPair, psi, psi_prime, rho
from .scale import combined_psi_weight, m_scale
from .solver import Dataset, fit_adaptive_tau_lasso, fit_tau_lasso

COND_LIMIT = 1e12
DEFAULT_DRAWS = 10**6


class WideStandardErrorWarning(RuntimeWarning):
    """An expectation was estimated from too few draws to be trusted."""


@dataclass
class FunctionalValue:
    """Asymptotic value ``(s_inf, beta_inf)`` of an estimator at a distribution.

    ``penalty`` holds per-coordinate penalty factors (ones for the plain
    tau-Lasso, ``1/|pilot_j|^gamma`` for the adaptive one).
    """

    s_inf: float
    beta_inf: np.ndarray
    lam: float
    penalty: Optional[np.ndarray] = None

    def __post_init__(self):
        self.beta_inf = np.asarray(self.beta_inf, dtype=float).ravel()
        if not self.s_inf > 0:
            raise InvalidParameterError(f"s_inf must be positive, got {self.s_inf}")
        if self.penalty is None:
            self.penalty = np.ones(self.beta_inf.size)

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.beta_inf)

    @property
    def k_s(self) -> int:
        return int(self.active.size)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([[self.s_inf], self.beta_inf])


@dataclass(frozen=True)
class Estimate:
    value: np.ndarray
    se: np.ndarray


class ExpectationEngine:
    """Averages over a sample standing in for the distribution ``H``.

    Build it from an empirical sample, or with :meth:`from_model` from
    draws of a scenario. Expectations come with Monte-Carlo standard
    errors.
    """

    def __init__(self, y, X, tuning: TuningPair = TuningPair()):
        self.data = Dataset(y, X)
        self.tuning = tuning

    @classmethod
    def from_model(cls, spec, n_draws: int = DEFAULT_DRAWS, seed=0, tuning: TuningPair = TuningPair()):
        from .simbench.scenarios import generate

        big = spec.with_(n=int(n_draws), contamination=None)
        train, _, _ = generate(big, seed)
        return cls(train.y, train.X, tuning)

    @property
    def n(self) -> int:
        return self.data.n

    def residuals(self, functional: FunctionalValue) -> np.ndarray:
        return (self.data.y - self.data.X @ functional.beta_inf) / functional.s_inf

    def mean(self, values) -> Estimate:
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        val = values.mean(axis=0)
        se = values.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full_like(val, np.inf)
        scale = np.maximum(np.abs(val), 1e-8)
        if n < 1000 or np.any(se > 0.1 * scale + 1e-8):
            warnings.warn(f"expectation from {n} draws has a wide standard error", WideStandardErrorWarning,
                          stacklevel=3)
        return Estimate(val, se)

    def wbar(self, functional: FunctionalValue) -> float:
        t = self.residuals(functional)
        return combined_psi_weight(t, 1.0, self.tuning.rho0, self.tuning.rho1)

    def estimate(self, moment, functional: FunctionalValue) -> Estimate:
        """Estimate a named moment or ``E[moment(r~, X)]`` for a callable.

        Names: ``psi0``, ``rho0``, ``M11``, ``M12``, ``M21``, ``M22`` (the
        last four over the functional's active set).
        """
        t = self.residuals(functional)
        X = self.data.X[:, functional.active]
        s = functional.s_inf
        c0, c1 = self.tuning.c0, self.tuning.c1
        if callable(moment):
            return self.mean(moment(t, self.data.X))
        if moment == "psi0":
            return self.mean(psi(t, c0))
        if moment == "rho0":
            return self.mean(rho(t, c0))
        if moment == "M11":
            return self.mean(-psi(t, c0) * t / s)
        if moment == "M12":
            return self.mean(-psi(t, c0)[:, None] * X / s)
        w = self.wbar(functional)
        ps = w * psi(t, c0) + psi(t, c1)
        dps = w * psi_prime(t, c0) + psi_prime(t, c1)
        if moment == "M21":
            return self.mean(-(ps - dps * t)[:, None] * X)
        if moment == "M22":
            return self.mean(dps[:, None, None] * X[:, :, None] * X[:, None, :])
        raise InvalidParameterError(f"unknown moment {moment!r}")

    def _jacobian(self, functional: FunctionalValue) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WideStandardErrorWarning)
            blocks = [self.estimate(k, functional).value for k in ("M11", "M12", "M21", "M22")]
        k = functional.k_s
        M = np.empty((k + 1, k + 1))
        M[0, 0] = blocks[0]
        M[0, 1:] = blocks[1]
        M[1:, 0] = blocks[2]
        M[1:, 1:] = blocks[3]
        return M

    def fit_functional(self, lam: float, tuning: Optional[TuningPair] = None, pilot=None, gamma: float = 1.0,
                       init=None, **solver_options) -> FunctionalValue:
        """Approximate the functional by fitting the estimator on the engine's sample."""
        tuning = tuning or self.tuning
        opts = {"tol": 1e-14, "beta_tol": 1e-11, "starts": 1}
        opts.update(solver_options)
        if pilot is None:
            fit = fit_tau_lasso(self.data, lam, tuning, init=init, **opts)
            pen = None
        else:
            pilot_beta = pilot.beta_inf if isinstance(pilot, FunctionalValue) else np.asarray(pilot, float)
            fit = fit_adaptive_tau_lasso(self.data, lam, tuning, pilot=pilot_beta, gamma=gamma, epsilon_floor=0.0,
                                         init=init, **opts)
            pen = fit.weights
        return FunctionalValue(fit.s, fit.beta, float(lam), pen)


def _points(z0, p):
    y0, x0 = z0
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    x0 = np.asarray(x0, dtype=float).reshape(y0.size, p) if np.size(x0) == y0.size * p else None
    if x0 is None:
        raise InvalidInputError(f"x0 must hold {p} predictors per point")
    return y0, x0


def _solve(M, rhs, what):
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularExpectationError(f"{what} matrix is singular on the active block", cond)
    return np.linalg.lstsq(M, rhs, rcond=None)[0]


def _score(z0, functional, engine):
    """Psi(z0, T(H)) on the scale row and the active coordinates; one row per point."""
    y0, x0 = _points(z0, functional.beta_inf.size)
    tun = engine.tuning
    s = functional.s_inf
    t0 = (y0 - x0 @ functional.beta_inf) / s
    w = engine.wbar(functional)
    ps = w * psi(t0, tun.c0) + psi(t0, tun.c1)
    out = np.empty((y0.size, functional.k_s + 1))
    out[:, 0] = rho(t0, tun.c0) - tun.delta
    out[:, 1:] = -s * ps[:, None] * x0[:, functional.active]
    return out, y0.size


def _expand(sol, functional, npts):
    full = np.zeros((npts, functional.beta_inf.size + 1))
    full[:, 0] = sol[0]
    full[:, 1 + functional.active] = sol[1:].T
    return full


def if_tau_lasso(z0, functional: FunctionalValue, expectation: ExpectationEngine, lam: Optional[float] = None):
    """Influence function of the tau-Lasso at ``z0 = (y0, x0)``.

    ``z0`` may hold one point or arrays of points (``y0`` of length m and
    ``x0`` of shape (m, p)). Returns ``[IF_s, IF_beta]`` of length p+1, or an
    (m, p+1) array. Coordinates outside the active set are exactly zero.
    """
    lam = functional.lam if lam is None else lam
    Psi, m = _score(z0, functional, expectation)
    A = functional.active
    q = np.concatenate([[0.0], lam * np.sign(functional.beta_inf[A]) * functional.penalty[A]])
    M = expectation._jacobian(functional)
    sol = -_solve(M, (Psi + q).T, "M")
    out = _expand(sol, functional, m)
    return out[0] if np.ndim(z0[0]) == 0 else out


def if_adaptive_tau_lasso(z0, functional: FunctionalValue, pilot_functional: FunctionalValue, pilot_if,
                          expectation: ExpectationEngine, lam: Optional[float] = None, gamma: float = 1.0):
    """Influence function of the adaptive tau-Lasso with a tau-Lasso pilot.

    ``pilot_if`` is the pilot's influence function at the same points. The
    penalty ``lam * sgn(beta_j) / |pilot_j|^gamma`` moves with the pilot,
    contributing ``-Phi * IF_pilot`` with
    ``Phi_j = lam * gamma * sgn(beta_j) sgn(pilot_j) / |pilot_j|^(gamma + 1)``.
    """
    lam = functional.lam if lam is None else lam
    A = functional.active
    pb = pilot_functional.beta_inf
    if np.any(pb[A] == 0):
        raise InconsistentSupportError("adaptive active set is not contained in the pilot's active set")
    Psi, m = _score(z0, functional, expectation)
    pilot_if = np.atleast_2d(np.asarray(pilot_if, dtype=float))
    if pilot_if.shape != (m, pb.size + 1):
        raise InvalidInputError(f"pilot_if has shape {pilot_if.shape}, expected {(m, pb.size + 1)}")
    mag = np.abs(pb[A])
    sb = np.sign(functional.beta_inf[A])
    q = lam * sb / mag**gamma
    phi = lam * gamma * sb * np.sign(pb[A]) / mag ** (gamma + 1)
    term = Psi.copy()
    term[:, 1:] += q - phi * pilot_if[:, 1 + A]
    N = expectation._jacobian(functional)
    sol = -_solve(N, term.T, "N")
    out = _expand(sol, functional, m)
    return out[0] if np.ndim(z0[0]) == 0 else out


def sensitivity_curve(data: Dataset, z0, estimator: Callable[[Dataset], np.ndarray], base=None) -> np.ndarray:
    """Standardized sensitivity curve ``(n+1) (theta(Z + z0) - theta(Z))``.

    ``estimator`` maps a Dataset to ``theta = (s, beta)``; ``base`` may pass
    a precomputed ``theta(Z)``.
    """
    y0, x0 = _points(z0, data.p)
    if y0.size != 1:
        raise InvalidInputError("sensitivity_curve takes a single point")
    theta = np.asarray(estimator(data) if base is None else base, dtype=float)
    aug = Dataset(np.append(data.y, y0), np.vstack([data.X, x0]))
    return (data.n + 1) * (np.asarray(estimator(aug), dtype=float) - theta)


class AdaptiveRefit:
    """Deterministic ``theta = (s, beta)`` of the adaptive tau-Lasso with a tau-Lasso pilot.

    Both fits are warm-started from the fits on ``reference`` and run at
    tight tolerances so that ``O(1/n)`` changes are resolved.
    """

    def __init__(self, reference: Dataset, lam: float, lam_pilot: Optional[float] = None, gamma: float = 1.0,
                 tuning: TuningPair = TuningPair(), tol: float = 1e-14, beta_tol: float = 1e-11, starts: int = 5):
        self.lam = lam
        self.lam_pilot = lam if lam_pilot is None else lam_pilot
        self.gamma = gamma
        self.tuning = tuning
        self.opts = {"tol": tol, "beta_tol": beta_tol, "max_iter": 2000}
        pilot = fit_tau_lasso(reference, self.lam_pilot, tuning, starts=starts, **self.opts)
        ada = fit_adaptive_tau_lasso(reference, lam, tuning, pilot=pilot.beta, gamma=gamma, epsilon_floor=0.0,
                                     starts=starts, **self.opts)
        self.pilot_init = pilot.beta
        self.init = ada.beta
        self.pilot_fit, self.fit = pilot, ada

    def pilot_theta(self, data: Dataset) -> np.ndarray:
        f = fit_tau_lasso(data, self.lam_pilot, self.tuning, init=self.pilot_init, starts=1, **self.opts)
        return np.concatenate([[f.s], f.beta])

    def __call__(self, data: Dataset) -> np.ndarray:
        pilot = fit_tau_lasso(data, self.lam_pilot, self.tuning, init=self.pilot_init, starts=1, **self.opts)
        f = fit_adaptive_tau_lasso(data, self.lam, self.tuning, pilot=pilot.beta, gamma=self.gamma,
                                   epsilon_floor=0.0, init=self.init, starts=1, **self.opts)
        return np.concatenate([[f.s], f.beta])


def nrmsd(if_values, sc_values) -> float:
    """``||IF - SC||_F / ||IF||_F`` over a grid."""
    if_values = np.asarray(if_values, dtype=float)
    sc_values = np.asarray(sc_values, dtype=float)
    return float(np.linalg.norm(if_values - sc_values) / np.linalg.norm(if_values))


@dataclass
class InfluenceReport:
    grid: np.ndarray  # (m, 1 + p): y0 then x0
    if_values: np.ndarray
    sc_values: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def max_abs_deviation(self) -> float:
        return float(np.max(np.abs(self.if_values - self.sc_values)))

    @property
    def nrmsd(self) -> float:
        return nrmsd(self.if_values, self.sc_values)

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.if_values)) and np.all(np.isfinite(self.sc_values)))

    def columns(self):
        p = self.grid.shape[1] - 1
        x = [f"x0_{j}" for j in range(p)] if p > 1 else ["x0"]
        b = [f"beta_{j}" for j in range(p)] if p > 1 else ["beta"]
        return ["y0", *x, "if_scale", *(f"if_{c}" for c in b), "sc_scale", *(f"sc_{c}" for c in b)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in np.hstack([self.grid, self.if_values, self.sc_values]):
                w.writerow([repr(float(v)) for v in row])

    def summary(self) -> dict:
        return {
            "points": int(self.grid.shape[0]),
            "nrmsd": self.nrmsd,
            "max_abs_deviation": self.max_abs_deviation,
            "max_abs_if": float(np.max(np.abs(self.if_values))),
            "max_abs_sc": float(np.max(np.abs(self.sc_values))),
            "bounded": self.bounded,
        }


def influence_grid(data: Dataset, lam: float, grid, lam_pilot=None, gamma: float = 1.0,
                   tuning: TuningPair = TuningPair(), engine: Optional[ExpectationEngine] = None,
                   config=None) -> InfluenceReport:
    """IF of the adaptive tau-Lasso (tau-Lasso pilot) and its SC over ``grid``.

    ``grid`` rows are ``(y0, x0...)``. Without an ``engine`` the
    expectations are taken over ``data`` itself, so IF and SC describe
    the same distribution.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != data.p + 1:
        raise InvalidInputError(f"grid rows need 1 + p = {data.p + 1} entries")
    refit = AdaptiveRefit(data, lam, lam_pilot, gamma, tuning)
    engine = engine or ExpectationEngine(data.y, data.X, tuning)
    if engine.data is data or (engine.n == data.n and np.array_equal(engine.data.y, data.y)):
        pilot_fun = FunctionalValue(refit.pilot_fit.s, refit.pilot_fit.beta, refit.lam_pilot)
        fun = FunctionalValue(refit.fit.s, refit.fit.beta, lam, refit.fit.weights)
    else:
        pilot_fun = engine.fit_functional(refit.lam_pilot, tuning, init=refit.pilot_init)
        fun = engine.fit_functional(lam, tuning, pilot=pilot_fun, gamma=gamma, init=refit.init)
    z0 = (grid[:, 0], grid[:, 1:])
    pilot_if = if_tau_lasso(z0, pilot_fun, engine)
    ifv = if_adaptive_tau_lasso(z0, fun, pilot_fun, pilot_if, engine, gamma=gamma)
    base = refit(data)
    sc = np.array([sensitivity_curve(data, (row[0], row[1:]), refit, base=base) for row in grid])
    cfg = {"n": data.n, "p": data.p, "lambda": lam, "lambda_pilot": refit.lam_pilot, "gamma": gamma}
    cfg.update(config or {})
    return InfluenceReport(grid, ifv, sc, cfg)


def toy_grid(lo: float = -10.0, hi: float = 10.0, step: float = 1.0) -> np.ndarray:
    """Square grid of ``(y0, x0)`` points for one predictor."""
    ax = np.arange(lo, hi + step / 2, step)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    return np.column_stack([yy.ravel(), xx.ravel()])
