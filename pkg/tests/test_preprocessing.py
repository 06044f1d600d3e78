import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from taulasso import (
    Dataset,
    DegenerateScaleError,
    bisquare_location,
    bisquare_scale,
    destandardize_coefficients,
    fit_tau_lasso,
    standardize,
)
from taulasso.simbench import generate, scenario

samples = arrays(np.float64, st.integers(10, 40), elements=st.floats(-100, 100, allow_nan=False)).filter(
    lambda v: np.median(np.abs(v - np.median(v))) > 1e-3
)


def test_location_fixed_points():
    assert bisquare_location(np.full(7, 3.25)) == 3.25
    assert bisquare_location([-1.0, 0.0, 1.0]) == pytest.approx(0.0, abs=1e-15)


def test_location_rejects_cluster():
    rng = np.random.default_rng(0)
    v = 3 + rng.standard_normal(100_000)
    v[:10_000] = 100.0
    assert abs(bisquare_location(v) - 3) < 0.05


def test_scale_consistency():
    v = 2.5 * np.random.default_rng(1).standard_normal(1_000_000)
    assert bisquare_scale(v) == pytest.approx(2.5, rel=0.01)


def test_scale_robust_to_gross_outliers():
    v = np.random.default_rng(2).standard_normal(10_000)
    clean = bisquare_scale(v)
    v[:1000] = 1e6
    assert abs(bisquare_scale(v) / clean - 1) < 0.15


def test_zero_spread_raises():
    with pytest.raises(DegenerateScaleError):
        bisquare_scale(np.ones(10))


@settings(max_examples=50, deadline=None)
@given(samples, st.floats(-1e3, 1e3), st.floats(0.01, 100).flatmap(lambda a: st.sampled_from([a, -a])))
def test_equivariance(v, shift, a):
    loc, sc = bisquare_location(v), bisquare_scale(v)
    assert bisquare_location(a * v + shift) == pytest.approx(a * loc + shift, rel=1e-7, abs=1e-7 * (1 + abs(shift)))
    assert bisquare_scale(a * v + shift) == pytest.approx(abs(a) * sc, rel=1e-7)


def test_standardized_data_maps_to_identity():
    spec = scenario("scenario1")
    d, _ = generate(spec, 0)[:2]
    std, _ = standardize(d)
    again, m2 = standardize(std)
    assert np.allclose(m2.col_centers, 0, atol=1e-9)
    assert np.allclose(m2.col_scales, 1, atol=1e-9)
    assert m2.y_center == pytest.approx(0, abs=1e-9)


def test_y_shift_moves_center_exactly():
    d = generate(scenario("scenario1"), 1)[0]
    _, m1 = standardize(d)
    _, m2 = standardize(Dataset(d.y + 100, d.X))
    assert m2.y_center - m1.y_center == pytest.approx(100, abs=1e-9)


def test_round_trip_predictions_invariant_to_affine_design_changes():
    d = generate(scenario("scenario1"), 2)[0]
    rng = np.random.default_rng(3)
    a = rng.uniform(0.2, 5, d.p)
    b = rng.uniform(-10, 10, d.p)
    preds = []
    for X in (d.X, d.X * a + b):
        std, m = standardize(Dataset(d.y, X))
        fit = fit_tau_lasso(std, 0.05, tol=1e-14, beta_tol=1e-12)
        beta = destandardize_coefficients(fit.beta, m)
        preds.append(X @ beta + m.intercept(beta))
    assert np.allclose(preds[0], preds[1], atol=1e-8)


def test_round_trip_reproduces_standardized_predictions():
    d = generate(scenario("scenario1"), 4)[0]
    std, m = standardize(d)
    b_std = np.random.default_rng(5).standard_normal(d.p)
    b = destandardize_coefficients(b_std, m)
    assert np.allclose(d.X @ b + m.intercept(b), std.X @ b_std + m.y_center, atol=1e-10)
