"""M-scale and tau-scale of residual vectors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import kernels
from .exceptions import DegenerateWeightError, InvalidInputError, InvalidParameterError
from .rho import DELTA_DEFAULT, RhoFamily, TuningPair, psi, rho

SCALE_TOL = 1e-12
SCALE_MAX_ITER = 200


@dataclass(frozen=True)
class ScaleEstimate:
    s: float
    tau: Optional[float] = None
    iterations: int = 0
    converged: bool = True


def _as_residuals(r):
    r = np.ascontiguousarray(r, dtype=float).ravel()
    if r.size == 0:
        raise InvalidInputError("residual vector is empty")
    if not np.all(np.isfinite(r)):
        raise InvalidInputError("residual vector contains non-finite values")
    return r


def _c(family):
    return family.c if isinstance(family, RhoFamily) else float(family)


def m_scale(r, rho0=TuningPair().rho0, delta=DELTA_DEFAULT) -> ScaleEstimate:
    """M-scale ``s`` solving ``mean(rho0(r_i / s)) = delta``.

    Returns ``s = 0`` when at least a ``1 - delta`` fraction of residuals is
    zero, since the equation then has no positive root.
    """
    if not 0.0 < delta <= 0.5:
        raise InvalidParameterError(f"delta must lie in (0, 0.5], got {delta}")
    r = _as_residuals(r)
    s, it, ok = kernels.m_scale(r, _c(rho0), delta, -1.0, SCALE_TOL, SCALE_MAX_ITER)
    return ScaleEstimate(s=float(s), iterations=int(it), converged=bool(ok))


def tau_scale(r, rho0=TuningPair().rho0, rho1=TuningPair().rho1, delta=DELTA_DEFAULT) -> ScaleEstimate:
    """tau-scale: ``tau^2 = s^2 * mean(rho1(r_i / s))`` with ``s`` the M-scale."""
    est = m_scale(r, rho0, delta)
    r = np.asarray(r, dtype=float).ravel()
    tau2 = kernels.tau_squared(np.ascontiguousarray(r), est.s, _c(rho1))
    return ScaleEstimate(s=est.s, tau=float(np.sqrt(tau2)), iterations=est.iterations, converged=est.converged)


def combined_psi_weight(r, s, rho0=TuningPair().rho0, rho1=TuningPair().rho1, threshold=1e-12) -> float:
    """Weight ``W`` such that the tau-scale gradient uses ``psi = W psi0 + psi1``.

    ``W = sum(2 rho1(t) - psi1(t) t) / sum(psi0(t) t)`` with ``t = r / s``.
    Raises :class:`DegenerateWeightError` when the denominator is below
    ``threshold * n`` (all residuals outside the support of psi0).
    """
    if not s > 0:
        raise InvalidParameterError(f"scale must be positive, got {s}")
    r = _as_residuals(r)
    t = r / s
    c0, c1 = _c(rho0), _c(rho1)
    den = float(np.sum(psi(t, c0) * t))
    if den <= threshold * r.size:
        raise DegenerateWeightError("combined psi weight undefined: psi0(t) t vanishes for all residuals")
    num = float(np.sum(2.0 * rho(t, c1) - psi(t, c1) * t))
    return num / den
