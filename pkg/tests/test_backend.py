"""The numba kernels and the numpy fallback must compute the same thing."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taulasso._backend import get_kernels

nb = pytest.importorskip("taulasso._kernels_numba")
npk = get_kernels("numpy")
C0, C1, DELTA = 2.9370, 5.1425, 0.25


def _problem(seed, n=80, p=6, outliers=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X @ np.r_[2.0, -1.0, np.zeros(p - 2)] + rng.standard_normal(n)
    y[:outliers] = 50.0
    return np.ascontiguousarray(X.T), y


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(5, 200))
def test_scale_kernels_agree(seed, n):
    r = np.random.default_rng(seed).standard_t(2, n)
    a = nb.m_scale(r, C0, DELTA, -1.0, 1e-12, 200)
    b = npk.m_scale(r, C0, DELTA, -1.0, 1e-12, 200)
    assert a[0] == pytest.approx(b[0], rel=1e-10)
    assert nb.tau_squared(r, a[0], C1) == pytest.approx(npk.tau_squared(r, a[0], C1), rel=1e-12)
    wa, wb = np.empty(n), np.empty(n)
    nb.irwls_weights(r, a[0], C0, C1, wa)
    npk.irwls_weights(r, a[0], C0, C1, wb)
    assert np.allclose(wa, wb, rtol=1e-10, atol=1e-14)


def test_rho_inverse_agrees():
    for d in (0.05, 0.25, 0.5, 0.9):
        assert nb.rho_inverse(d, C0) == pytest.approx(npk.rho_inverse(d, C0), rel=1e-12)


@pytest.mark.parametrize("seed,outliers", [(0, 0), (1, 8), (2, 20)])
@pytest.mark.parametrize("lam", [0.0, 0.05, 0.5])
def test_tau_lasso_fits_agree(seed, outliers, lam):
    Xt, y = _problem(seed, outliers=outliers)
    b0 = np.zeros(Xt.shape[0])
    a = nb.tau_lasso_irwls(Xt, y, lam, b0, C0, C1, DELTA, 500, 1e-12, 1e-10, 1e-12)
    b = npk.tau_lasso_irwls(Xt, y, lam, b0, C0, C1, DELTA, 500, 1e-12, 1e-10, 1e-12)
    assert np.allclose(a[0], b[0], atol=1e-7)
    assert a[3] == pytest.approx(b[3], rel=1e-9)
    assert np.array_equal(a[0] == 0, b[0] == 0)


def test_weighted_lasso_agrees():
    Xt, y = _problem(3)
    omega = np.random.default_rng(4).uniform(0.1, 2.0, y.size)
    a, b = np.zeros(Xt.shape[0]), np.zeros(Xt.shape[0])
    nb.cd_weighted_lasso(Xt, y, omega, 0.1, a, 1e-13, 10000)
    npk.cd_weighted_lasso(Xt, y, omega, 0.1, b, 1e-13, 10000)
    assert np.allclose(a, b, atol=1e-9)


def test_s_ridge_agrees():
    Xt, y = _problem(5, outliers=6)
    b0 = np.zeros(Xt.shape[0])
    a = nb.s_ridge_irwls(Xt, y, 0.1, b0, C0, DELTA, 500, 1e-12, 1e-10)
    b = npk.s_ridge_irwls(Xt, y, 0.1, b0, C0, DELTA, 500, 1e-12, 1e-10)
    assert np.allclose(a[0], b[0], atol=1e-7)


def test_env_flag_selects_numpy():
    env = dict(os.environ, TAULASSO_DISABLE_NUMBA="1")
    code = "import taulasso; print(taulasso.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["TAULASSO_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"


def test_unknown_backend_name():
    with pytest.raises(ValueError):
        get_kernels("fortran")
