"""Synthetic regression scenarios and contamination plans."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from ..exceptions import InvalidSpecError
from ..solver import Dataset

ERROR_LAWS = ("normal", "t3", "t1")
OVERLAP_MODES = ("independent", "disjoint", "coincident")


@dataclass(frozen=True)
class LeverageBlock:
    """Fixed high-leverage rows: indices and replacement predictor values."""

    rows: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class ContaminationPlan:
    """Response outliers and high-leverage rows injected into a training set.

    Response outliers replace ``floor(response_fraction * n)`` entries of
    ``y`` by draws from ``N(response_loc, response_sd^2)``; leverage rows
    replace ``floor(leverage_fraction * n)`` rows of ``X`` by draws from
    ``N(leverage_loc * 1, leverage_sd^2 I)``. ``overlap`` controls how the
    two index sets relate: ``"independent"`` draws them separately (they may
    share rows), ``"disjoint"`` keeps them apart and ``"coincident"`` puts
    the response outliers on the leverage rows.
    """

    response_fraction: float = 0.10
    response_loc: float = 100.0
    response_sd: float = 1.0
    leverage_fraction: float = 0.10
    leverage_loc: float = 30.0
    leverage_sd: float = 1.0
    overlap: str = "independent"

    def __post_init__(self):
        if self.overlap not in OVERLAP_MODES:
            raise InvalidSpecError(f"overlap must be one of {OVERLAP_MODES}, got {self.overlap!r}")
        for f in (self.response_fraction, self.leverage_fraction):
            if not 0.0 <= f < 0.5:
                raise InvalidSpecError(f"contamination fractions must lie in [0, 0.5), got {f}")
        if self.overlap == "disjoint" and self.response_fraction + self.leverage_fraction >= 1.0:
            raise InvalidSpecError("disjoint contamination needs the fractions to sum below 1")

    def counts(self, n: int) -> Tuple[int, int]:
        return int(np.floor(self.response_fraction * n)), int(np.floor(self.leverage_fraction * n))

    def draw_leverage(self, n: int, p: int, rng) -> LeverageBlock:
        _, m = self.counts(n)
        rows = np.sort(rng.choice(n, size=m, replace=False))
        values = self.leverage_loc + self.leverage_sd * rng.standard_normal((m, p))
        return LeverageBlock(rows, values)

    def apply(self, y, X, rng, leverage: Optional[LeverageBlock] = None):
        """Return contaminated copies of ``(y, X)`` and the altered row indices."""
        y, X = y.copy(), X.copy()
        n, p = X.shape
        if leverage is None:
            leverage = self.draw_leverage(n, p, rng)
        X[leverage.rows] = leverage.values
        k, _ = self.counts(n)
        if self.overlap == "coincident":
            shared = leverage.rows[:k]
            rest = np.setdiff1d(np.arange(n), leverage.rows)
            extra = rng.choice(rest, size=k - shared.size, replace=False)
            out_rows = np.sort(np.concatenate([shared, extra]).astype(np.int64))
        else:
            pool = np.setdiff1d(np.arange(n), leverage.rows) if self.overlap == "disjoint" else np.arange(n)
            out_rows = np.sort(rng.choice(pool, size=k, replace=False))
        y[out_rows] = self.response_loc + self.response_sd * rng.standard_normal(k)
        return y, X, {"response_rows": out_rows, "leverage_rows": leverage.rows}


@dataclass(frozen=True)
class BadLeveragePlan:
    """Outliers at ``y_i = 5 * ystar`` with ``x_i = [5, 0, ..., 0]`` on the first rows."""

    ystar: float
    fraction: float = 0.10

    def __post_init__(self):
        if not 0.0 <= self.fraction < 1.0:
            raise InvalidSpecError(f"fraction must lie in [0, 1), got {self.fraction}")

    def draw_leverage(self, n, p, rng):
        return None

    def apply(self, y, X, rng, leverage=None):
        y, X = y.copy(), X.copy()
        m = int(np.floor(self.fraction * len(y)))
        rows = np.arange(m)
        y[rows] = 5.0 * self.ystar
        X[rows] = 0.0
        X[rows, 0] = 5.0
        return y, X, {"response_rows": rows, "leverage_rows": rows}


@dataclass(frozen=True)
class GrossPlan:
    """Rows replaced by ``scale * N(0, 1)`` in both response and predictors.

    Used for empirical breakdown checks; ``fraction`` may exceed one half.
    """

    fraction: float
    scale: float = 1e6

    def draw_leverage(self, n, p, rng):
        return None

    def apply(self, y, X, rng, leverage=None):
        y, X = y.copy(), X.copy()
        n, p = X.shape
        m = int(np.floor(self.fraction * n))
        rows = np.sort(rng.choice(n, size=m, replace=False))
        y[rows] = self.scale * rng.standard_normal(m)
        X[rows] = self.scale * rng.standard_normal((m, p))
        return y, X, {"response_rows": rows, "leverage_rows": rows}


@dataclass(frozen=True)
class ScenarioSpec:
    """A sparse linear model ``y = X beta0 + u`` with Gaussian rows.

    ``blocks`` lists the sizes of independent Toeplitz blocks
    (``Sigma_ij = rho^|i-j|`` inside a block, zero across blocks); ``None``
    means one block. ``rho = 0`` gives the identity.
    """

    name: str
    n: int
    beta0: Tuple[float, ...]
    rho: float = 0.5
    snr_db: Optional[float] = 5.0
    error_law: str = "normal"
    blocks: Optional[Tuple[int, ...]] = None
    contamination: Optional[object] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "beta0", tuple(float(b) for b in self.beta0))
        if self.n < 2 or self.p < 1:
            raise InvalidSpecError("need n >= 2 and p >= 1")
        if self.error_law not in ERROR_LAWS:
            raise InvalidSpecError(f"unknown error law {self.error_law!r}; expected one of {ERROR_LAWS}")
        if self.blocks is not None and sum(self.blocks) != self.p:
            raise InvalidSpecError(f"block sizes sum to {sum(self.blocks)}, expected p = {self.p}")
        if self.snr_db is None and self.sigma is None:
            raise InvalidSpecError("either snr_db or sigma must be given")

    @property
    def p(self) -> int:
        return len(self.beta0)

    @property
    def beta(self) -> np.ndarray:
        return np.asarray(self.beta0)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    def covariance(self) -> np.ndarray:
        sizes = self.blocks or (self.p,)
        cov = np.zeros((self.p, self.p))
        start = 0
        for b in sizes:
            idx = np.arange(b)
            cov[start:start + b, start:start + b] = self.rho ** np.abs(idx[:, None] - idx[None, :])
            start += b
        return cov

    def with_(self, **changes) -> "ScenarioSpec":
        return replace(self, **changes)


def _cholesky(spec: ScenarioSpec):
    try:
        return np.linalg.cholesky(spec.covariance())
    except np.linalg.LinAlgError:
        raise InvalidSpecError(f"covariance of {spec.name} is not positive definite") from None


def _errors(law, size, rng):
    if law == "normal":
        return rng.standard_normal(size)
    return rng.standard_t(3 if law == "t3" else 1, size)


def noise_sd(spec: ScenarioSpec, X) -> float:
    """Noise level: ``sigma^2 = ||X beta0||^2 10^(-SNR/10) / n``, or ``spec.sigma``."""
    if spec.sigma is not None:
        return float(spec.sigma)
    return float(np.sqrt(np.sum((X @ spec.beta) ** 2) * 10.0 ** (-spec.snr_db / 10.0) / X.shape[0]))


def generate(spec: ScenarioSpec, seed, leverage: Optional[LeverageBlock] = None):
    """Draw independent training and test sets of size ``spec.n``.

    Normal errors are scaled by the SNR-derived ``sigma`` of the clean
    training design; Student-t errors are standard (unit scale). Only the
    training set is contaminated. Returns ``(train, test, info)``.
    """
    rng = np.random.default_rng(seed)
    L = _cholesky(spec)
    X = rng.standard_normal((spec.n, spec.p)) @ L.T
    Xt = rng.standard_normal((spec.n, spec.p)) @ L.T
    sd = noise_sd(spec, X) if spec.error_law == "normal" else 1.0
    y = X @ spec.beta + sd * _errors(spec.error_law, spec.n, rng)
    yt = Xt @ spec.beta + sd * _errors(spec.error_law, spec.n, rng)
    info = {"sigma": sd, "response_rows": np.array([], int), "leverage_rows": np.array([], int)}
    if spec.contamination is not None:
        y, X, rows = spec.contamination.apply(y, X, rng, leverage)
        info.update(rows)
    return Dataset(y, X), Dataset(yt, Xt), info


def _beta(*parts):
    return tuple(np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)) for x in parts]))


SCENARIOS = {
    "scenario1": ScenarioSpec("scenario1", 50, (4, 2, 0, 0, 3, 0, 0, 0, 0, 0), rho=0.5, snr_db=5.0),
    "scenario2": ScenarioSpec("scenario2", 40, _beta(np.full(8, 2.0), np.zeros(492)), rho=0.5, snr_db=15.0),
    "scenario3": ScenarioSpec(
        "scenario3", 100, _beta(np.full(5, 2.5), np.full(5, 1.5), np.full(5, 0.5), np.zeros(15)), rho=0.95, snr_db=25.0
    ),
    "scenario4": ScenarioSpec(
        "scenario4", 100, _beta(np.full(5, 2.5), np.full(5, 1.5), np.full(5, 0.5), np.zeros(185)),
        rho=0.95, snr_db=25.0, blocks=(15, 185),
    ),
    "scenario5": ScenarioSpec(
        "scenario5", 100, _beta(np.full(5, 2.5), [0.0, 1.5, 1.5], np.zeros(192)),
        rho=0.95, snr_db=25.0, blocks=(15, 185),
    ),
}

OVERSHRINK = ScenarioSpec("overshrink", 50, (10, 5, 4, 3, 2, 0, 0, 0, 0, 0), rho=0.0, snr_db=35.0)
TOY_1D = ScenarioSpec("toy1d", 1000, (1.5,), rho=0.0, snr_db=None, sigma=1.0)


def scenario(name: str, error_law: str = "normal", contaminated: bool = False,
             overlap: str = "independent") -> ScenarioSpec:
    """Named scenario with the requested error law and optional default contamination."""
    try:
        base = SCENARIOS[name]
    except KeyError:
        raise InvalidSpecError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}") from None
    return base.with_(error_law=error_law, contamination=ContaminationPlan(overlap=overlap) if contaminated else None)
