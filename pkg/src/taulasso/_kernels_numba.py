"""Numba-compiled inner loops.

Every function here has a twin with the same signature and semantics in
``_kernels_numpy``; ``_backend`` picks one of the two at import time.
Arrays must be float64 and C-contiguous. ``Xt`` is always the transposed
design (p x n) so that column access is contiguous.
"""
import numpy as np
from numba import njit

STATUS_CONVERGED = 0
STATUS_MAXITER = 1
STATUS_EXACT_FIT = 2
STATUS_DIVERGED = 3

_LS_HALVINGS = 40
POLISH_EVERY = 10


@njit(cache=True)
def _rho(t, c):
    u = (t / c) * (t / c)
    if u >= 1.0:
        return 1.0
    # expanded form keeps full relative precision for small u
    return u * (3.0 - 3.0 * u + u * u)


@njit(cache=True)
def _psi(t, c):
    u = (t / c) * (t / c)
    if u >= 1.0:
        return 0.0
    v = 1.0 - u
    return 6.0 * t / (c * c) * v * v


@njit(cache=True)
def _weight(t, c):
    # psi(t) / t, with its limit 6 / c^2 at t = 0
    u = (t / c) * (t / c)
    if u >= 1.0:
        return 0.0
    v = 1.0 - u
    return 6.0 / (c * c) * v * v


@njit(cache=True)
def rho_inverse(delta, c):
    return c * np.sqrt(1.0 - (1.0 - delta) ** (1.0 / 3.0))


@njit(cache=True)
def mean_rho(r, s, c):
    acc = 0.0
    for i in range(r.shape[0]):
        acc += _rho(r[i] / s, c)
    return acc / r.shape[0]


@njit(cache=True)
def m_scale(r, c0, delta, s_init, tol, max_iter):
    """Solve mean(rho0(r / s)) = delta. Returns (s, iterations, converged)."""
    n = r.shape[0]
    amax = 0.0
    for i in range(n):
        a = abs(r[i])
        if a > amax:
            amax = a
    if amax == 0.0:
        return 0.0, 0, True
    zero_tol = 1e-12 * amax
    nzero = 0
    for i in range(n):
        if abs(r[i]) <= zero_tol:
            nzero += 1
    if nzero >= (1.0 - delta) * n - 1e-9:
        return 0.0, 0, True

    s = s_init
    if not (s > 0.0):
        s = np.median(np.abs(r)) / 0.6745
    if not (s > 0.0):
        s = amax / rho_inverse(delta, c0)

    it = 0
    while it < max_iter:
        it += 1
        m = mean_rho(r, s, c0)
        s_new = s * np.sqrt(m / delta)
        if not (s_new > 0.0) or not np.isfinite(s_new):
            break
        if abs(s_new - s) <= tol * s_new:
            return s_new, it, True
        s = s_new

    # fixed point stalled: bracketing bisection always terminates
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


@njit(cache=True)
def tau_squared(r, s, c1):
    if s == 0.0:
        return 0.0
    return s * s * mean_rho(r, s, c1)


@njit(cache=True)
def combined_weight_terms(r, s, c0, c1):
    """Numerator and denominator of the combined psi weight."""
    num = 0.0
    den = 0.0
    for i in range(r.shape[0]):
        t = r[i] / s
        num += 2.0 * _rho(t, c1) - _psi(t, c1) * t
        den += _psi(t, c0) * t
    return num, den


@njit(cache=True)
def irwls_weights(r, s, c0, c1, out):
    """Fill ``out`` with psi(t)/t for psi = wbar * psi0 + psi1; return wbar."""
    num, den = combined_weight_terms(r, s, c0, c1)
    wbar = 0.0
    if den > 1e-12 * r.shape[0]:
        wbar = num / den
    for i in range(r.shape[0]):
        t = r[i] / s
        out[i] = wbar * _weight(t, c0) + _weight(t, c1)
    return wbar


@njit(cache=True)
def residuals(Xt, y, beta, out):
    p, n = Xt.shape
    for i in range(n):
        out[i] = y[i]
    for j in range(p):
        b = beta[j]
        if b != 0.0:
            for i in range(n):
                out[i] -= Xt[j, i] * b
    return out


@njit(cache=True)
def _qr_solve(B, b, lin):
    """Minimise 0.5 ||B x - b||^2 + lin'x through a Householder QR of B.

    Working on B rather than B'B keeps the error proportional to cond(B)
    instead of its square. Returns (x, ok); ok is False when B is
    numerically rank deficient.
    """
    n, k = B.shape
    A = B.copy()
    q = b.copy()
    for j in range(k):
        norm = 0.0
        for i in range(j, n):
            norm += A[i, j] * A[i, j]
        norm = np.sqrt(norm)
        if norm == 0.0:
            return lin, False
        alpha = -norm if A[j, j] >= 0.0 else norm
        v = A[j:, j].copy()
        v[0] -= alpha
        vv = 0.0
        for i in range(v.shape[0]):
            vv += v[i] * v[i]
        if vv > 0.0:
            for c in range(j, k):
                acc = 0.0
                for i in range(v.shape[0]):
                    acc += v[i] * A[j + i, c]
                f = 2.0 * acc / vv
                for i in range(v.shape[0]):
                    A[j + i, c] -= f * v[i]
            acc = 0.0
            for i in range(v.shape[0]):
                acc += v[i] * q[j + i]
            f = 2.0 * acc / vv
            for i in range(v.shape[0]):
                q[j + i] -= f * v[i]
    big = 0.0
    for j in range(k):
        if abs(A[j, j]) > big:
            big = abs(A[j, j])
    for j in range(k):
        if abs(A[j, j]) <= 1e-13 * big:
            return lin, False
    # R'u = lin, then R x = Q'b - u
    u = np.empty(k)
    for i in range(k):
        acc = lin[i]
        for m in range(i):
            acc -= A[m, i] * u[m]
        u[i] = acc / A[i, i]
    x = np.empty(k)
    for i in range(k - 1, -1, -1):
        acc = q[i] - u[i]
        for m in range(i + 1, k):
            acc -= A[i, m] * x[m]
        x[i] = acc / A[i, i]
    return x, True


@njit(cache=True)
def _smooth_grad(Xt, omega, r, j):
    n = r.shape[0]
    acc = 0.0
    mag = 0.0
    for i in range(n):
        t = omega[i] * Xt[j, i] * r[i]
        acc += t
        mag += abs(t)
    return -acc / n, mag / n


@njit(cache=True)
def _wlasso_value(omega, r, x, lam):
    n = r.shape[0]
    acc = 0.0
    for i in range(n):
        acc += omega[i] * r[i] * r[i]
    l1 = 0.0
    for j in range(x.shape[0]):
        l1 += abs(x[j])
    return 0.5 * acc / n + lam * l1


@njit(cache=True)
def _feature_sign(Xt, y, omega, lam, beta, max_steps):
    """Active-set (feature-sign) search for the weighted lasso, warm-started at ``beta``.

    Each step solves the sign-fixed problem on the active set and moves to
    the best point on the segment towards it, checking every sign change.
    ``beta`` is overwritten only when the KKT conditions hold at the end.
    """
    p, n = Xt.shape
    x = beta.copy()
    theta = np.sign(x)
    r = np.empty(n)
    residuals(Xt, y, x, r)
    sw = np.sqrt(omega)
    yw = sw * y
    # start by solving on the warm-start support; an empty one goes straight to the zero check
    check_zeros = True
    for j in range(p):
        if x[j] != 0.0:
            check_zeros = False
    for _ in range(max_steps):
        if check_zeros:
            worst = -1
            excess = 0.0
            for j in range(p):
                if x[j] != 0.0:
                    continue
                g, mag = _smooth_grad(Xt, omega, r, j)
                e = abs(g) - lam * (1.0 + 1e-9) - 1e-9 * mag
                if e > excess:
                    excess = e
                    worst = j
            if worst < 0:
                for j in range(p):
                    beta[j] = x[j]
                return True
            g, _ = _smooth_grad(Xt, omega, r, worst)
            theta[worst] = -1.0 if g > 0.0 else 1.0
        k = 0
        for j in range(p):
            if theta[j] != 0.0:
                k += 1
        if k > n:
            return False
        act = np.empty(k, dtype=np.int64)
        k = 0
        for j in range(p):
            if theta[j] != 0.0:
                act[k] = j
                k += 1
        B = np.empty((n, k))
        lin = np.empty(k)
        for a in range(k):
            lin[a] = n * lam * theta[act[a]]
            for i in range(n):
                B[i, a] = sw[i] * Xt[act[a], i]
        xa, ok = _qr_solve(B, yw, lin)
        if not ok:
            return False
        # direction and its image in residual space
        d = np.zeros(p)
        for a in range(k):
            d[act[a]] = xa[a] - x[act[a]]
        q = np.zeros(n)
        for a in range(k):
            j = act[a]
            if d[j] != 0.0:
                for i in range(n):
                    q[i] += Xt[j, i] * d[j]
        best_t = 1.0
        best_j = -1
        trial = x + d
        rt = r - q
        best_val = _wlasso_value(omega, rt, trial, lam)
        for a in range(k):
            j = act[a]
            if x[j] != 0.0 and xa[a] * x[j] < 0.0:
                t = x[j] / (x[j] - xa[a])
                trial = x + t * d
                trial[j] = 0.0
                rt = r - t * q
                v = _wlasso_value(omega, rt, trial, lam)
                if v < best_val:
                    best_val = v
                    best_t = t
                    best_j = j
        full = best_j < 0
        for j in range(p):
            x[j] += best_t * d[j]
        if not full:
            x[best_j] = 0.0
            for a in range(k):
                j = act[a]
                if x[j] * theta[j] <= 0.0:
                    x[j] = 0.0
        for j in range(p):
            theta[j] = np.sign(x[j])
        residuals(Xt, y, x, r)
        # a full step solves the active-set equations, so only the zeros need checking
        check_zeros = full
    return False


@njit(cache=True)
def cd_weighted_lasso(Xt, y, omega, lam, beta, tol, max_sweeps):
    """Minimise (1/2n) sum omega_i (y_i - x_i'b)^2 + lam * ||b||_1 in place."""
    p, n = Xt.shape
    r = np.empty(n)
    residuals(Xt, y, beta, r)
    z = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += omega[i] * Xt[j, i] * Xt[j, i]
        z[j] = acc / n
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        max_beta = 0.0
        for j in range(p):
            if z[j] <= 0.0:
                if beta[j] != 0.0:
                    for i in range(n):
                        r[i] += Xt[j, i] * beta[j]
                    beta[j] = 0.0
                continue
            g = 0.0
            for i in range(n):
                g += omega[i] * Xt[j, i] * r[i]
            g = g / n + z[j] * beta[j]
            if g > lam:
                new = (g - lam) / z[j]
            elif g < -lam:
                new = (g + lam) / z[j]
            else:
                new = 0.0
            d = new - beta[j]
            if d != 0.0:
                for i in range(n):
                    r[i] -= d * Xt[j, i]
                beta[j] = new
                if abs(d) > max_delta:
                    max_delta = abs(d)
            if abs(new) > max_beta:
                max_beta = abs(new)
        if max_delta <= tol * (1.0 + max_beta):
            break
        if sweeps % POLISH_EVERY == 0 and _feature_sign(Xt, y, omega, lam, beta, 2 * p + 10):
            break
    return sweeps


@njit(cache=True)
def _l1(beta, pen):
    acc = 0.0
    for j in range(beta.shape[0]):
        acc += pen[j] * abs(beta[j])
    return acc


@njit(cache=True)
def tau_objective(Xt, y, beta, lam, pen, c0, c1, delta):
    r = np.empty(y.shape[0])
    residuals(Xt, y, beta, r)
    s, _, _ = m_scale(r, c0, delta, -1.0, 1e-12, 200)
    return tau_squared(r, s, c1) + lam * _l1(beta, pen), s


@njit(cache=True)
def tau_lasso_irwls(Xt, y, lam, beta_init, c0, c1, delta, max_iter, tol, beta_tol, cd_tol):
    """IRWLS for tau^2(y - X b) + lam * ||b||_1 with step-halving line search.

    Returns (beta, s, tau2, objective, trace, n_iter, status).
    """
    p, n = Xt.shape
    beta = beta_init.copy()
    r = np.empty(n)
    omega = np.empty(n)
    trace = np.empty(max_iter + 1)
    residuals(Xt, y, beta, r)
    s, _, _ = m_scale(r, c0, delta, -1.0, 1e-12, 200)
    l1 = 0.0
    for j in range(p):
        l1 += abs(beta[j])
    if s == 0.0:
        trace[0] = lam * l1
        return beta, 0.0, 0.0, lam * l1, trace[:1], 0, STATUS_EXACT_FIT
    obj = tau_squared(r, s, c1) + lam * l1
    trace[0] = obj
    if not np.isfinite(obj):
        return beta, s, np.nan, obj, trace[:1], 0, STATUS_DIVERGED

    status = STATUS_MAXITER
    cand = np.empty(p)
    trial = np.empty(p)
    r_t = np.empty(n)
    it = 0
    while it < max_iter:
        it += 1
        irwls_weights(r, s, c0, c1, omega)
        for j in range(p):
            cand[j] = beta[j]
        cd_weighted_lasso(Xt, y, omega, lam, cand, cd_tol, 10000)

        step = 1.0
        accepted = False
        obj_t = obj
        s_t = s
        for _ in range(_LS_HALVINGS):
            l1 = 0.0
            for j in range(p):
                trial[j] = beta[j] + step * (cand[j] - beta[j])
                l1 += abs(trial[j])
            residuals(Xt, y, trial, r_t)
            s_t, _, _ = m_scale(r_t, c0, delta, s, 1e-12, 200)
            obj_t = tau_squared(r_t, s_t, c1) + lam * l1
            if obj_t <= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = STATUS_CONVERGED
            it -= 1
            break

        dbeta = 0.0
        bmax = 0.0
        for j in range(p):
            d = abs(trial[j] - beta[j])
            if d > dbeta:
                dbeta = d
            beta[j] = trial[j]
            if abs(beta[j]) > bmax:
                bmax = abs(beta[j])
        for i in range(n):
            r[i] = r_t[i]
        dobj = obj - obj_t
        obj = obj_t
        s = s_t
        trace[it] = obj
        if s == 0.0:
            return beta, 0.0, 0.0, obj, trace[: it + 1], it, STATUS_EXACT_FIT
        if not np.isfinite(obj):
            return beta, s, np.nan, obj, trace[: it + 1], it, STATUS_DIVERGED
        if dobj <= tol * obj and dbeta <= beta_tol * (1.0 + bmax):
            status = STATUS_CONVERGED
            break

    return beta, s, tau_squared(r, s, c1), obj, trace[: it + 1], it, status


@njit(cache=True)
def s_ridge_irwls(Xt, y, lam, beta_init, c0, delta, max_iter, tol, beta_tol):
    """IRWLS for s^2(y - X b) + lam * ||b||_2^2.

    Returns (beta, s, objective, trace, n_iter, status).
    """
    p, n = Xt.shape
    beta = beta_init.copy()
    r = np.empty(n)
    r_t = np.empty(n)
    trace = np.empty(max_iter + 1)
    residuals(Xt, y, beta, r)
    s, _, _ = m_scale(r, c0, delta, -1.0, 1e-12, 200)
    obj = s * s + lam * np.dot(beta, beta)
    trace[0] = obj
    if s == 0.0:
        return beta, 0.0, obj, trace[:1], 0, STATUS_EXACT_FIT

    status = STATUS_MAXITER
    trial = np.empty(p)
    it = 0
    while it < max_iter:
        it += 1
        A = np.zeros((p, p))
        b = np.zeros(p)
        den = 0.0
        w = np.empty(n)
        for i in range(n):
            t = r[i] / s
            w[i] = _weight(t, c0)
            den += w[i] * t * t
        if den <= 0.0:
            status = STATUS_CONVERGED
            it -= 1
            break
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc += w[i] * Xt[j, i] * y[i]
            b[j] = acc
            for k in range(j, p):
                acc = 0.0
                for i in range(n):
                    acc += w[i] * Xt[j, i] * Xt[k, i]
                A[j, k] = acc
                A[k, j] = acc
            A[j, j] += lam * den
        cand = np.linalg.lstsq(A, b)[0]

        step = 1.0
        accepted = False
        obj_t = obj
        s_t = s
        for _ in range(_LS_HALVINGS):
            for j in range(p):
                trial[j] = beta[j] + step * (cand[j] - beta[j])
            residuals(Xt, y, trial, r_t)
            s_t, _, _ = m_scale(r_t, c0, delta, s, 1e-12, 200)
            obj_t = s_t * s_t + lam * np.dot(trial, trial)
            if obj_t <= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = STATUS_CONVERGED
            it -= 1
            break
        dbeta = 0.0
        bmax = 0.0
        for j in range(p):
            d = abs(trial[j] - beta[j])
            if d > dbeta:
                dbeta = d
            beta[j] = trial[j]
            if abs(beta[j]) > bmax:
                bmax = abs(beta[j])
        for i in range(n):
            r[i] = r_t[i]
        dobj = obj - obj_t
        obj = obj_t
        s = s_t
        trace[it] = obj
        if s == 0.0:
            return beta, 0.0, obj, trace[: it + 1], it, STATUS_EXACT_FIT
        if dobj <= tol * obj and dbeta <= beta_tol * (1.0 + bmax):
            status = STATUS_CONVERGED
            break
    return beta, s, obj, trace[: it + 1], it, status
