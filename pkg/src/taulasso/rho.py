"""Tukey bisquare rho-function family and tuning-constant calibration."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import InvalidParameterError

# Default constants: 25% breakdown (c0) and 95% normal efficiency (c1).
C0_DEFAULT = 2.9370
C1_DEFAULT = 5.1425
DELTA_DEFAULT = 0.25

_QUAD_NODES = 64
_QUAD_SPAN = 12.0


def _check_c(c):
    if not np.all(np.asarray(c) > 0):
        raise InvalidParameterError(f"clipping constant must be positive, got {c!r}")


def rho(t, c):
    """Bisquare rho normalised to saturate at 1 for ``|t| >= c``."""
    _check_c(c)
    t = np.asarray(t, dtype=float)
    u = np.minimum((t / c) ** 2, 1.0)
    out = u * (3.0 - 3.0 * u + u * u)  # same as 1 - (1 - u)^3 without cancellation near 0
    return out if out.ndim else float(out)


def psi(t, c):
    """First derivative of :func:`rho`; zero outside ``[-c, c]``."""
    _check_c(c)
    t = np.asarray(t, dtype=float)
    u = (t / c) ** 2
    out = np.where(u < 1.0, 6.0 * t / c**2 * (1.0 - u) ** 2, 0.0)
    return out if out.ndim else float(out)


def psi_prime(t, c):
    """Second derivative of :func:`rho`: ``6/c^2 (1-u)(1-5u)`` with ``u=(t/c)^2``."""
    _check_c(c)
    t = np.asarray(t, dtype=float)
    u = (t / c) ** 2
    out = np.where(u < 1.0, 6.0 / c**2 * (1.0 - u) * (1.0 - 5.0 * u), 0.0)
    return out if out.ndim else float(out)


def psi_weight(t, c):
    """``psi(t) / t`` extended continuously to ``t = 0``."""
    _check_c(c)
    t = np.asarray(t, dtype=float)
    u = (t / c) ** 2
    out = np.where(u < 1.0, 6.0 / c**2 * (1.0 - u) ** 2, 0.0)
    return out if out.ndim else float(out)


def rho_inverse(value, c):
    """Inverse of ``rho(., c)`` on ``[0, c]`` for ``value`` in ``[0, 1]``."""
    _check_c(c)
    if not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"rho takes values in [0, 1], got {value}")
    return float(c * np.sqrt(1.0 - (1.0 - value) ** (1.0 / 3.0)))


@dataclass(frozen=True)
class RhoFamily:
    """A bisquare rho with a fixed clipping constant."""

    c: float

    def __post_init__(self):
        _check_c(self.c)

    def rho(self, t):
        return rho(t, self.c)

    def psi(self, t):
        return psi(t, self.c)

    def psi_prime(self, t):
        return psi_prime(t, self.c)

    def weight(self, t):
        return psi_weight(t, self.c)

    def inverse(self, value):
        return rho_inverse(value, self.c)


@dataclass(frozen=True)
class TuningPair:
    """Constants for the M-scale (``c0``, ``delta``) and the tau-scale (``c1``)."""

    c0: float = C0_DEFAULT
    c1: float = C1_DEFAULT
    delta: float = DELTA_DEFAULT

    def __post_init__(self):
        if not (self.c0 > 0 and self.c1 > 0):
            raise InvalidParameterError("c0 and c1 must be positive")
        if not self.c1 > self.c0:
            raise InvalidParameterError(f"c1 ({self.c1}) must exceed c0 ({self.c0})")
        _check_delta(self.delta)

    @property
    def rho0(self) -> RhoFamily:
        return RhoFamily(self.c0)

    @property
    def rho1(self) -> RhoFamily:
        return RhoFamily(self.c1)


def _check_delta(delta):
    if not 0.0 < delta <= 0.5:
        raise InvalidParameterError(f"delta must lie in (0, 0.5], got {delta}")


@lru_cache(maxsize=None)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def normal_expectation(func, breakpoints=(), nodes=_QUAD_NODES):
    """E[func(Z)] for standard normal Z by panelled Gauss-Legendre quadrature.

    The real line is cut to ``[-12, 12]`` (the normal mass outside is below
    1e-32) and split at ``breakpoints`` so every panel sees a smooth
    integrand; each panel gets a fixed ``nodes``-point rule. Exact to
    rounding for the piecewise polynomials built from bisquare functions.
    """
    cuts = sorted({-_QUAD_SPAN, _QUAD_SPAN, *(float(b) for b in breakpoints if abs(b) < _QUAD_SPAN)})
    x, w = _legendre(nodes)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (b - a)
        z = 0.5 * (a + b) + half * x
        dens = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
        total += half * float(np.sum(w * dens * func(z)))
    return total


def expected_rho(c):
    """E[rho(Z; c)] under the standard normal."""
    return normal_expectation(lambda z: rho(z, c), (-c, c))


def calibrate_breakdown(delta, tol=1e-10):
    """Clipping constant ``c`` with ``E[rho(Z; c)] = delta`` for standard normal Z.

    Bracketing bisection on ``c``; the bracket starts at ``[0.1, 20]`` and
    the upper end is doubled for very small ``delta``.
    """
    _check_delta(delta)
    lo, hi = 0.1, 20.0
    while expected_rho(hi) > delta:
        hi *= 2.0
    if expected_rho(lo) < delta:
        raise InvalidParameterError(f"delta={delta} not attainable")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if expected_rho(mid) > delta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def asymptotic_variance_ratio(tuning: TuningPair | None = None) -> float:
    """Asymptotic variance of the unpenalised tau-estimator over least squares
    at the standard normal, ``E[psi^2] / E[psi']^2`` with
    ``psi = wbar * psi0 + psi1`` and the population weight ``wbar``.

    The population M-scale ``s`` of the standard normal is solved first, so
    a slightly off-calibrated ``c0`` is still handled exactly.
    """
    tuning = tuning or TuningPair()
    c0, c1 = tuning.c0, tuning.c1
    s = normal_m_scale(c0, tuning.delta)
    cuts = (-c0 * s, c0 * s, -c1 * s, c1 * s)
    wbar = normal_expectation(lambda z: 2 * rho(z / s, c1) - psi(z / s, c1) * z / s, cuts) / normal_expectation(
        lambda z: psi(z / s, c0) * z / s, cuts
    )
    num = normal_expectation(lambda z: (wbar * psi(z / s, c0) + psi(z / s, c1)) ** 2, cuts)
    den = normal_expectation(lambda z: wbar * psi_prime(z / s, c0) + psi_prime(z / s, c1), cuts)
    return s**2 * num / den**2


def normal_m_scale(c, delta, tol=1e-13):
    """Population M-scale of the standard normal: ``E[rho(Z / s; c)] = delta``."""
    _check_c(c)
    _check_delta(delta)

    def f(s):
        return normal_expectation(lambda z: rho(z / s, c), (-c * s, c * s)) - delta

    lo, hi = 1e-3, 1e3
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
