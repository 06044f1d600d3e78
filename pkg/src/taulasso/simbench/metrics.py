"""Prediction and support-recovery metrics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..exceptions import InvalidInputError, UndefinedMetricError

METRICS = ("rmse", "mad", "fnr", "fpr", "cer")


@dataclass(frozen=True)
class MetricsRecord:
    rmse: float
    mad: float
    fnr: float
    fpr: float
    cer: float

    def as_dict(self):
        return asdict(self)


def support_counts(beta_hat, beta0):
    """(false negatives, false positives, k0, p) for exact-zero support recovery."""
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    beta0 = np.asarray(beta0, dtype=float).ravel()
    if beta_hat.shape != beta0.shape:
        raise InvalidInputError(f"estimate has {beta_hat.size} entries, truth has {beta0.size}")
    true_nz = beta0 != 0
    est_nz = beta_hat != 0
    fn = int(np.sum(true_nz & ~est_nz))
    fp = int(np.sum(~true_nz & est_nz))
    return fn, fp, int(true_nz.sum()), beta0.size


def score(fit, beta0, test) -> MetricsRecord:
    """Test-set RMSE and MAD of prediction residuals plus FNR, FPR and CER.

    ``fit`` is anything with ``beta`` (and optionally ``intercept``) or a
    bare coefficient vector.
    """
    beta = np.asarray(getattr(fit, "beta", fit), dtype=float)
    intercept = float(getattr(fit, "intercept", 0.0))
    if test.X.shape[1] != beta.size:
        raise InvalidInputError("test design and coefficients disagree in p")
    fn, fp, k0, p = support_counts(beta, beta0)
    if k0 == 0:
        raise UndefinedMetricError("FNR is undefined when the true support is empty")
    if k0 == p:
        raise UndefinedMetricError("FPR is undefined when every coefficient is non-zero")
    resid = test.y - test.X @ beta - intercept
    return MetricsRecord(
        rmse=float(np.sqrt(np.mean(resid**2))),
        mad=float(np.median(np.abs(resid))),
        fnr=fn / k0,
        fpr=fp / (p - k0),
        cer=(fn + fp) / p,
    )
