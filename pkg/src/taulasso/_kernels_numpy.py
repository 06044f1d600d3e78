"""Pure-numpy twins of the kernels in ``_kernels_numba``.

Same signatures, same algorithms; the per-iteration work is vectorised
instead of looped. Used when numba is unavailable or disabled through
``TAULASSO_DISABLE_NUMBA``.
"""
import numpy as np

STATUS_CONVERGED = 0
STATUS_MAXITER = 1
STATUS_EXACT_FIT = 2
STATUS_DIVERGED = 3

_LS_HALVINGS = 40
POLISH_EVERY = 10


def _rho(t, c):
    u = np.minimum((t / c) ** 2, 1.0)
    return u * (3.0 - 3.0 * u + u * u)


def _psi(t, c):
    u = (t / c) ** 2
    return np.where(u < 1.0, 6.0 * t / c**2 * (1.0 - u) ** 2, 0.0)


def _weight(t, c):
    u = (t / c) ** 2
    return np.where(u < 1.0, 6.0 / c**2 * (1.0 - u) ** 2, 0.0)


def rho_inverse(delta, c):
    return c * np.sqrt(1.0 - (1.0 - delta) ** (1.0 / 3.0))


def mean_rho(r, s, c):
    return float(np.mean(_rho(r / s, c)))


def m_scale(r, c0, delta, s_init, tol, max_iter):
    n = r.shape[0]
    ar = np.abs(r)
    amax = float(ar.max())
    if amax == 0.0:
        return 0.0, 0, True
    nzero = int(np.count_nonzero(ar <= 1e-12 * amax))
    if nzero >= (1.0 - delta) * n - 1e-9:
        return 0.0, 0, True

    s = s_init
    if not s > 0.0:
        s = float(np.median(ar)) / 0.6745
    if not s > 0.0:
        s = amax / rho_inverse(delta, c0)

    it = 0
    while it < max_iter:
        it += 1
        s_new = s * np.sqrt(mean_rho(r, s, c0) / delta)
        if not (s_new > 0.0 and np.isfinite(s_new)):
            break
        if abs(s_new - s) <= tol * s_new:
            return float(s_new), it, True
        s = s_new

    lo = 1e-12 * amax
    hi = amax / rho_inverse(delta, c0)
    for _ in range(400):
        it += 1
        mid = 0.5 * (lo + hi)
        if mean_rho(r, mid, c0) > delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi), it, True


def tau_squared(r, s, c1):
    if s == 0.0:
        return 0.0
    return s * s * mean_rho(r, s, c1)


def combined_weight_terms(r, s, c0, c1):
    t = r / s
    num = float(np.sum(2.0 * _rho(t, c1) - _psi(t, c1) * t))
    den = float(np.sum(_psi(t, c0) * t))
    return num, den


def irwls_weights(r, s, c0, c1, out):
    num, den = combined_weight_terms(r, s, c0, c1)
    wbar = num / den if den > 1e-12 * r.shape[0] else 0.0
    t = r / s
    out[:] = wbar * _weight(t, c0) + _weight(t, c1)
    return wbar


def residuals(Xt, y, beta, out):
    out[:] = y - beta @ Xt
    return out


def _qr_solve(B, b, lin):
    """Minimise 0.5 ||B x - b||^2 + lin'x by QR of ``B``; returns (x, ok)."""
    Q, R = np.linalg.qr(B)
    d = np.abs(np.diag(R))
    if d.size and d.min() <= 1e-13 * d.max():
        return lin, False
    u = np.linalg.solve(R.T, lin)
    return np.linalg.solve(R, Q.T @ b - u), True


def _wlasso_value(omega, r, x, lam):
    return 0.5 * np.sum(omega * r * r) / r.shape[0] + lam * np.abs(x).sum()


def _feature_sign(Xt, y, omega, lam, beta, max_steps):
    """Feature-sign active-set search warm-started at ``beta``; writes back only at a KKT point."""
    p, n = Xt.shape
    x = beta.copy()
    theta = np.sign(x)
    r = y - x @ Xt
    sw = np.sqrt(omega)
    yw = sw * y
    check_zeros = not np.any(x != 0.0)
    for _ in range(max_steps):
        if check_zeros:
            zero = np.flatnonzero(x == 0.0)
            terms = Xt[zero] * (omega * r)
            g = -terms.sum(axis=1) / n
            excess = np.abs(g) - lam * (1.0 + 1e-9) - 1e-9 * np.abs(terms).sum(axis=1) / n
            if zero.size == 0 or excess.max() <= 0.0:
                beta[:] = x
                return True
            w = int(np.argmax(excess))
            theta[zero[w]] = -1.0 if g[w] > 0.0 else 1.0
        act = np.flatnonzero(theta)
        if act.size > n:
            return False
        xa, ok = _qr_solve((Xt[act] * sw).T, yw, n * lam * theta[act])
        if not ok:
            return False
        d = np.zeros(p)
        d[act] = xa - x[act]
        q = d[act] @ Xt[act]
        best_t, best_j = 1.0, -1
        best_val = _wlasso_value(omega, r - q, x + d, lam)
        for a, j in enumerate(act):
            if x[j] != 0.0 and xa[a] * x[j] < 0.0:
                t = x[j] / (x[j] - xa[a])
                trial = x + t * d
                trial[j] = 0.0
                v = _wlasso_value(omega, r - t * q, trial, lam)
                if v < best_val:
                    best_val, best_t, best_j = v, t, j
        full = best_j < 0
        x += best_t * d
        if not full:
            x[best_j] = 0.0
            x[act[x[act] * theta[act] <= 0.0]] = 0.0
        theta = np.sign(x)
        r = y - x @ Xt
        check_zeros = full
    return False


def cd_weighted_lasso(Xt, y, omega, lam, beta, tol, max_sweeps):
    p, n = Xt.shape
    r = y - beta @ Xt
    wX = Xt * omega
    z = np.einsum("ji,ji->j", wX, Xt) / n
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            if z[j] <= 0.0:
                if beta[j] != 0.0:
                    r += Xt[j] * beta[j]
                    beta[j] = 0.0
                continue
            g = wX[j] @ r / n + z[j] * beta[j]
            new = np.sign(g) * max(abs(g) - lam, 0.0) / z[j]
            d = new - beta[j]
            if d != 0.0:
                r -= d * Xt[j]
                beta[j] = new
                max_delta = max(max_delta, abs(d))
        if max_delta <= tol * (1.0 + np.abs(beta).max(initial=0.0)):
            break
        if sweeps % POLISH_EVERY == 0 and _feature_sign(Xt, y, omega, lam, beta, 2 * p + 10):
            break
    return sweeps


def tau_objective(Xt, y, beta, lam, pen, c0, c1, delta):
    r = y - beta @ Xt
    s, _, _ = m_scale(r, c0, delta, -1.0, 1e-12, 200)
    return tau_squared(r, s, c1) + lam * float(np.sum(pen * np.abs(beta))), s


def tau_lasso_irwls(Xt, y, lam, beta_init, c0, c1, delta, max_iter, tol, beta_tol, cd_tol):
    p, n = Xt.shape
    beta = beta_init.copy()
    omega = np.empty(n)
    r = y - beta @ Xt
    s, _, _ = m_scale(r, c0, delta, -1.0, 1e-12, 200)
    if s == 0.0:
        obj = lam * float(np.abs(beta).sum())
        return beta, 0.0, 0.0, obj, np.array([obj]), 0, STATUS_EXACT_FIT
    obj = tau_squared(r, s, c1) + lam * float(np.abs(beta).sum())
    trace = [obj]
    if not np.isfinite(obj):
        return beta, s, np.nan, obj, np.array(trace), 0, STATUS_DIVERGED

    status = STATUS_MAXITER
    it = 0
    while it < max_iter:
        it += 1
        irwls_weights(r, s, c0, c1, omega)
        cand = beta.copy()
        cd_weighted_lasso(Xt, y, omega, lam, cand, cd_tol, 10000)

        step = 1.0
        accepted = False
        for _ in range(_LS_HALVINGS):
            trial = beta + step * (cand - beta)
            r_t = y - trial @ Xt
            s_t, _, _ = m_scale(r_t, c0, delta, s, 1e-12, 200)
            obj_t = tau_squared(r_t, s_t, c1) + lam * float(np.abs(trial).sum())
            if obj_t <= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = STATUS_CONVERGED
            it -= 1
            break

        dbeta = float(np.abs(trial - beta).max(initial=0.0))
        beta = trial
        r = r_t
        dobj = obj - obj_t
        obj = obj_t
        s = s_t
        trace.append(obj)
        if s == 0.0:
            return beta, 0.0, 0.0, obj, np.array(trace), it, STATUS_EXACT_FIT
        if not np.isfinite(obj):
            return beta, s, np.nan, obj, np.array(trace), it, STATUS_DIVERGED
        if dobj <= tol * obj and dbeta <= beta_tol * (1.0 + np.abs(beta).max(initial=0.0)):
            status = STATUS_CONVERGED
            break

    return beta, s, tau_squared(r, s, c1), obj, np.array(trace), it, status


def s_ridge_irwls(Xt, y, lam, beta_init, c0, delta, max_iter, tol, beta_tol):
    p, n = Xt.shape
    beta = beta_init.copy()
    r = y - beta @ Xt
    s, _, _ = m_scale(r, c0, delta, -1.0, 1e-12, 200)
    obj = s * s + lam * float(beta @ beta)
    trace = [obj]
    if s == 0.0:
        return beta, 0.0, obj, np.array(trace), 0, STATUS_EXACT_FIT

    status = STATUS_MAXITER
    it = 0
    while it < max_iter:
        it += 1
        t = r / s
        w = _weight(t, c0)
        den = float(np.sum(w * t * t))
        if den <= 0.0:
            status = STATUS_CONVERGED
            it -= 1
            break
        wXt = Xt * w
        A = wXt @ Xt.T + lam * den * np.eye(p)
        cand = np.linalg.lstsq(A, wXt @ y, rcond=None)[0]

        step = 1.0
        accepted = False
        for _ in range(_LS_HALVINGS):
            trial = beta + step * (cand - beta)
            r_t = y - trial @ Xt
            s_t, _, _ = m_scale(r_t, c0, delta, s, 1e-12, 200)
            obj_t = s_t * s_t + lam * float(trial @ trial)
            if obj_t <= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = STATUS_CONVERGED
            it -= 1
            break
        dbeta = float(np.abs(trial - beta).max(initial=0.0))
        beta = trial
        r = r_t
        dobj = obj - obj_t
        obj = obj_t
        s = s_t
        trace.append(obj)
        if s == 0.0:
            return beta, 0.0, obj, np.array(trace), it, STATUS_EXACT_FIT
        if dobj <= tol * obj and dbeta <= beta_tol * (1.0 + np.abs(beta).max(initial=0.0)):
            status = STATUS_CONVERGED
            break
    return beta, s, obj, np.array(trace), it, status
