import numpy as np
import pytest

import oracles
from taulasso import Dataset, InvalidParameterError, fit_s_ridge, m_scale, select_pilot_lambda
from taulasso.pilot import compute_pilot, make_ridge_grid, s_ridge_path


def _two_predictors(seed, n=200):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    return X, X @ [2.0, 0.0] + rng.standard_normal(n)


def test_small_penalty_matches_lattice():
    X, y = _two_predictors(0)
    fit = fit_s_ridge(Dataset(y, X), 1e-6)
    val, arg = oracles.lattice_minimum(y, X, 1e-6, box=3.0, kind="s-ridge")
    assert fit.objective <= val + 1e-6
    assert np.allclose(fit.beta, arg, atol=0.05)


def test_small_penalty_is_centred_on_truth():
    # a single draw sits about 0.1 from the truth (sampling error), the average much closer
    est = np.array([fit_s_ridge(Dataset(y, X), 1e-6, starts=1).beta for X, y in map(_two_predictors, range(20))])
    assert np.allclose(est.mean(axis=0), [2.0, 0.0], atol=0.05)


def test_objective_is_squared_scale_plus_ridge():
    X, y = _two_predictors(1, n=50)
    fit = fit_s_ridge(Dataset(y, X), 0.3)
    s = oracles.m_scale(y - X @ fit.beta)
    assert fit.objective == pytest.approx(s**2 + 0.3 * np.sum(fit.beta**2), rel=1e-8)
    assert fit.s == pytest.approx(s, rel=1e-8)


def test_huge_penalty_shrinks_to_zero():
    X, y = _two_predictors(2)
    fit = fit_s_ridge(Dataset(y, X), 1e9)
    assert np.max(np.abs(fit.beta)) < 1e-6
    assert fit.s == pytest.approx(m_scale(y).s, rel=1e-5)


def test_descent_trace():
    X, y = _two_predictors(3, n=40)
    y[:4] = 50.0
    fit = fit_s_ridge(Dataset(y, X), 0.1, starts=1)
    assert np.all(np.diff(fit.trace) <= 1e-12 * np.abs(fit.trace[:-1]))


def test_penalty_must_be_nonnegative():
    X, y = _two_predictors(4)
    with pytest.raises(InvalidParameterError):
        fit_s_ridge(Dataset(y, X), -1.0)


def test_single_element_grid():
    X, y = _two_predictors(5)
    assert select_pilot_lambda(Dataset(y, X), grid=[0.7]) == 0.7


def test_grid_shape():
    X, y = _two_predictors(6)
    g = make_ridge_grid(Dataset(y, X), n_lambda=12)
    assert g.size == 12 and np.all(np.diff(g) < 0)


def test_path_rows_follow_grid_order():
    X, y = _two_predictors(7)
    d = Dataset(y, X)
    g = np.array([0.01, 10.0, 1.0])
    path = s_ridge_path(d, g)
    for k, lam in enumerate(g):
        assert np.allclose(path[k], fit_s_ridge(d, lam, starts=1).beta, atol=1e-4)


def test_pure_noise_selects_heavy_shrinkage():
    upper = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        X = rng.standard_normal((50, 10))
        d = Dataset(rng.standard_normal(50), X)
        grid = make_ridge_grid(d)
        lam = select_pilot_lambda(d, grid=grid, seed=seed)
        upper += lam >= np.median(grid)
    assert upper >= 40


def test_pilot_kinds():
    X, y = _two_predictors(8, n=60)
    d = Dataset(y, X)
    assert compute_pilot(d, "s-ridge").shape == (2,)
    assert compute_pilot(d, "tau-lasso").shape == (2,)
    with pytest.raises(InvalidParameterError):
        compute_pilot(d, "ols")
