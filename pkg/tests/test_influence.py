import warnings

import numpy as np
import pytest

import oracles
from taulasso import (
    Dataset,
    ExpectationEngine,
    FunctionalValue,
    InconsistentSupportError,
    SingularExpectationError,
    if_adaptive_tau_lasso,
    if_tau_lasso,
    rho,
    sensitivity_curve,
)
from taulasso.influence import WideStandardErrorWarning, toy_grid

C0 = 2.9370


def _toy(seed=0, n=20_000):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    y = X @ [1.5, 0.0] + rng.standard_normal(n)
    return ExpectationEngine(y, X)


@pytest.fixture(scope="module")
def engine():
    return _toy()


@pytest.fixture(scope="module")
def functional(engine):
    return engine.fit_functional(0.0)


def test_zero_residual_point_has_zero_beta_influence(engine, functional):
    x0 = np.array([0.3, -1.2])
    y0 = x0 @ functional.beta_inf
    out = if_tau_lasso((y0, x0), functional, engine)
    M = engine._jacobian(functional)
    rhs = np.zeros(M.shape[0])
    rhs[0] = -0.25
    assert np.allclose(out[[0, *(1 + functional.active)]], -np.linalg.solve(M, rhs), rtol=1e-10, atol=1e-14)
    # beta entries vanish once the scale/beta coupling block is zero, as it is for symmetric errors
    assert np.max(np.abs(out[1:])) < 0.02
    M0 = M.copy()
    M0[1:, 0] = 0.0
    assert np.allclose(-np.linalg.solve(M0, rhs)[1:], 0.0, atol=1e-15)


def test_bounded_in_response(engine, functional):
    y0 = np.linspace(-1e6, 1e6, 2001)
    out = if_tau_lasso((y0, np.tile([1.0, 2.0], (y0.size, 1))), functional, engine)
    assert np.all(np.isfinite(out))
    far = if_tau_lasso((np.array([1e3, 1e6]), np.tile([1.0, 2.0], (2, 1))), functional, engine)
    assert np.allclose(far[0], far[1])


def test_inactive_coordinates_are_exactly_zero(engine):
    fun = engine.fit_functional(0.3)
    assert fun.k_s < 2
    out = if_tau_lasso((toy_grid()[:, 0], np.tile([1.0, 1.0], (441, 1))), fun, engine)
    inactive = np.setdiff1d(np.arange(2), fun.active)
    assert np.all(out[:, 1 + inactive] == 0.0)


def test_adaptive_at_zero_penalty_matches_plain(engine, functional):
    g = toy_grid(step=2.0)
    z0 = (g[:, 0], np.column_stack([g[:, 1], -g[:, 1]]))
    plain = if_tau_lasso(z0, functional, engine)
    ada_fun = FunctionalValue(functional.s_inf, functional.beta_inf, 0.0, np.ones(2))
    ada = if_adaptive_tau_lasso(z0, ada_fun, functional, plain, engine)
    assert np.allclose(ada, plain, atol=1e-12)


def test_inconsistent_support_raises(engine, functional):
    pilot = FunctionalValue(functional.s_inf, [functional.beta_inf[0], 0.0], 0.0)
    with pytest.raises(InconsistentSupportError):
        if_adaptive_tau_lasso((0.0, [0.0, 0.0]), functional, pilot, np.zeros((1, 3)), engine)


def test_singular_block_raises():
    X = np.zeros((5000, 1))
    eng = ExpectationEngine(np.random.default_rng(1).standard_normal(5000), X)
    with pytest.raises(SingularExpectationError):
        if_tau_lasso((0.0, [0.0]), FunctionalValue(1.0, [1.0], 0.0), eng)


def test_psi0_mean_vanishes_under_symmetric_errors(engine):
    fun = FunctionalValue(1.0, [1.5, 0.0], 0.0)
    est = engine.estimate("psi0", fun)
    assert abs(est.value) <= 3 * est.se


def test_m11_matches_quadrature():
    rng = np.random.default_rng(2)
    n = 200_000
    eng = ExpectationEngine(rng.standard_normal(n), rng.standard_normal((n, 1)))
    fun = FunctionalValue(1.0, [0.0], 0.0)
    est = eng.estimate("M11", fun)
    # psi0(t) t with the oracle's own derivative of rho
    ref = -oracles.normal_mean(lambda z: 6 * z**2 / C0**2 * (1 - (z / C0) ** 2) ** 2 * (abs(z) < C0), C0)
    assert abs(est.value - ref) <= 3 * est.se


def test_scale_blocks_match_finite_differences(engine, functional):
    # the production path differentiates analytically; central differences check it
    A = functional.active
    s, b = functional.s_inf, functional.beta_inf
    mean_rho = lambda s_, b_: np.mean(rho((engine.data.y - engine.data.X @ b_) / s_, C0))  # noqa: E731
    h = 1e-6
    d_s = (mean_rho(s + h, b) - mean_rho(s - h, b)) / (2 * h)
    assert engine.estimate("M11", functional).value == pytest.approx(d_s, rel=1e-6)
    for k, j in enumerate(A):
        e = np.zeros_like(b)
        e[j] = h
        d_b = (mean_rho(s, b + e) - mean_rho(s, b - e)) / (2 * h)
        assert engine.estimate("M12", functional).value[k] == pytest.approx(d_b, rel=1e-6, abs=1e-9)


def test_small_sample_warns():
    eng = ExpectationEngine(np.arange(50.0), np.ones((50, 1)))
    with pytest.warns(WideStandardErrorWarning):
        eng.estimate("psi0", FunctionalValue(1.0, [0.0], 0.0))


def test_engine_is_deterministic():
    from taulasso.simbench import scenario

    spec = scenario("scenario1")
    a = ExpectationEngine.from_model(spec, n_draws=2000, seed=4)
    b = ExpectationEngine.from_model(spec, n_draws=2000, seed=4)
    assert np.array_equal(a.data.X, b.data.X) and np.array_equal(a.data.y, b.data.y)


def test_sensitivity_curve_duplicate_point_is_finite_and_repeatable():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((200, 1))
    d = Dataset(1.5 * X[:, 0] + rng.standard_normal(200), X)
    from taulasso import fit_tau_lasso

    def est(data):
        f = fit_tau_lasso(data, 0.01, starts=1, tol=1e-14, beta_tol=1e-11)
        return np.concatenate([[f.s], f.beta])

    z0 = (d.y[7], d.X[7])
    a = sensitivity_curve(d, z0, est)
    b = sensitivity_curve(d, z0, est)
    assert np.all(np.isfinite(a)) and np.array_equal(a, b)


def test_score_odd_in_residual(engine, functional):
    # flipping the residual sign flips the beta block and keeps the scale entry
    x0 = np.array([1.0, 0.5])
    fit = x0 @ functional.beta_inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        up = if_tau_lasso((fit + 2.0, x0), functional, engine)
        down = if_tau_lasso((fit - 2.0, x0), functional, engine)
    M = engine._jacobian(functional)
    diff = M @ (up - down)[[0, *(1 + functional.active)]]
    assert diff[0] == pytest.approx(0.0, abs=1e-10)
