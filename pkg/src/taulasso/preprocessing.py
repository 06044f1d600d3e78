"""Robust standardization with bisquare location and scale estimates."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import DegenerateScaleError, InvalidInputError
from .rho import calibrate_breakdown, psi_weight
from .scale import m_scale

# 95% normal efficiency for the location M-estimate with MAD scale
LOCATION_C = 4.685
LOCATION_TOL = 1e-10
_MAD_CONSISTENCY = 0.6744897501960817


@lru_cache(maxsize=1)
def scale_constant() -> float:
    """Bisquare constant with 50% breakdown and normal consistency."""
    return calibrate_breakdown(0.5)


def bisquare_location(v, c=LOCATION_C, max_iter=200) -> float:
    """Bisquare M-estimate of location, IRWLS started at the median.

    The auxiliary scale is the normalised MAD. A vector whose MAD is zero
    returns the median.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise InvalidInputError("empty vector")
    m = float(np.median(v))
    mad = float(np.median(np.abs(v - m))) / _MAD_CONSISTENCY
    if mad == 0.0:
        return m
    for _ in range(max_iter):
        w = psi_weight((v - m) / mad, c)
        m_new = float(np.sum(w * v) / np.sum(w))
        if abs(m_new - m) <= LOCATION_TOL * mad:
            return m_new
        m = m_new
    return m


def bisquare_scale(v) -> float:
    """Bisquare M-scale of ``v - bisquare_location(v)``.

    50% breakdown, consistent for the standard deviation at the normal.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise InvalidInputError("empty vector")
    c = scale_constant()
    s = m_scale(v - bisquare_location(v), c, 0.5).s
    if not s > 0:
        raise DegenerateScaleError("vector has zero robust spread")
    return s


@dataclass(frozen=True)
class StandardizationMap:
    col_centers: np.ndarray
    col_scales: np.ndarray
    y_center: float

    def transform_X(self, X):
        return (np.asarray(X, dtype=float) - self.col_centers) / self.col_scales

    def transform_y(self, y):
        return np.asarray(y, dtype=float) - self.y_center

    def intercept(self, beta_original) -> float:
        """Offset that makes original-scale predictions match standardized ones."""
        return float(self.y_center - self.col_centers @ np.asarray(beta_original, dtype=float))


def standardize(data):
    """Centre and scale every column of ``X`` and centre ``y`` robustly.

    Returns ``(standardized Dataset, StandardizationMap)``.
    """
    from .solver import Dataset

    centers = np.empty(data.p)
    scales = np.empty(data.p)
    for j in range(data.p):
        col = data.X[:, j]
        centers[j] = bisquare_location(col)
        try:
            scales[j] = bisquare_scale(col)
        except DegenerateScaleError:
            raise DegenerateScaleError(f"column {j} has zero robust spread") from None
    mapping = StandardizationMap(centers, scales, bisquare_location(data.y))
    return Dataset(mapping.transform_y(data.y), mapping.transform_X(data.X)), mapping


def destandardize_coefficients(beta_std, mapping: StandardizationMap) -> np.ndarray:
    """Coefficients on the original predictor scale; see ``StandardizationMap.intercept``."""
    return np.asarray(beta_std, dtype=float) / mapping.col_scales
