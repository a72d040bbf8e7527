"""Compiled sequential sweeps backing the fast algorithms.

Every routine here is a plain function of raw float64 arrays so that numba
can compile it; the typed wrappers with validation and error translation
live in :mod:`givsep.fastalg` and :mod:`givsep.grbase`.  The recurrences
are inherently sequential in the row index, so there is no internal
parallelism; ``nogil`` lets callers run many instances across threads.

Factorization failures are signalled by returning the offending row index
(and the radicand value) instead of raising, because the wrappers turn
them into typed exceptions.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a normal dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


#: relative breakdown threshold for Cholesky radicands
_PD_EPS = 1e-14


@njit(cache=True, nogil=True)
def gvr_matvec(c, s, nu_hat, x):
    n, p = c.shape
    y = np.empty(n)
    chi = np.zeros(p)
    # forward sweep: strictly-lower part and the diagonal
    for i in range(n):
        low = 0.0
        diag = 0.0
        for k in range(p):
            low += c[i, k] * chi[k]
            diag += c[i, k] * nu_hat[i, k]
        y[i] = low + diag * x[i]
        for k in range(p):
            chi[k] = s[i, k] * (chi[k] + nu_hat[i, k] * x[i])
    # backward sweep: strictly-upper part
    for k in range(p):
        chi[k] = 0.0
    for i in range(n - 1, -1, -1):
        up = 0.0
        for k in range(p):
            up += nu_hat[i, k] * chi[k]
        y[i] += up
        if i > 0:
            for k in range(p):
                chi[k] = s[i - 1, k] * (chi[k] + c[i, k] * x[i])
    return y


@njit(cache=True, nogil=True)
def gvr_cholesky(c, s, nu_hat, d):
    n, p = c.shape
    w = np.zeros((max(n - 1, 0), p))
    f = np.zeros(n)
    pmat = np.zeros((p, p))
    wt = np.empty(p)
    for i in range(n):
        diag = d[i]
        rad = d[i]
        for k in range(p):
            acc = 0.0
            for l in range(p):
                acc += pmat[k, l] * c[i, l]
            wt[k] = nu_hat[i, k] - acc
            diag += c[i, k] * nu_hat[i, k]
            rad += c[i, k] * wt[k]
        if rad <= _PD_EPS * diag:
            return w, f, i, rad
        f[i] = np.sqrt(rad)
        if i < n - 1:
            for k in range(p):
                w[i, k] = wt[k] / f[i]
            for k in range(p):
                for l in range(p):
                    pmat[k, l] = s[i, k] * (w[i, k] * w[i, l] + pmat[k, l]) * s[i, l]
    return w, f, -1, 0.0


@njit(cache=True, nogil=True)
def gvr_tri_lower(c, s, w, f, x):
    n, p = c.shape
    y = np.empty(n)
    chi = np.zeros(p)
    for i in range(n):
        acc = f[i] * x[i]
        for k in range(p):
            acc += c[i, k] * chi[k]
        y[i] = acc
        if i < n - 1:
            for k in range(p):
                chi[k] = s[i, k] * (chi[k] + w[i, k] * x[i])
    return y


@njit(cache=True, nogil=True)
def gvr_tri_upper(c, s, w, f, x):
    n, p = c.shape
    y = np.empty(n)
    chi = np.zeros(p)
    for i in range(n - 1, -1, -1):
        acc = f[i] * x[i]
        if i < n - 1:
            for k in range(p):
                acc += w[i, k] * chi[k]
        y[i] = acc
        if i > 0:
            for k in range(p):
                chi[k] = s[i - 1, k] * (chi[k] + c[i, k] * x[i])
    return y


@njit(cache=True, nogil=True)
def gvr_solve_lower(c, s, w, f, y):
    n, p = c.shape
    x = np.empty(n)
    chi = np.zeros(p)
    for i in range(n):
        acc = y[i]
        for k in range(p):
            acc -= c[i, k] * chi[k]
        x[i] = acc / f[i]
        if i < n - 1:
            for k in range(p):
                chi[k] = s[i, k] * (chi[k] + w[i, k] * x[i])
    return x


@njit(cache=True, nogil=True)
def gvr_solve_upper(c, s, w, f, y):
    n, p = c.shape
    x = np.empty(n)
    chi = np.zeros(p)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        if i < n - 1:
            for k in range(p):
                acc -= w[i, k] * chi[k]
        x[i] = acc / f[i]
        if i > 0:
            for k in range(p):
                chi[k] = s[i - 1, k] * (chi[k] + c[i, k] * x[i])
    return x


@njit(cache=True, nogil=True)
def gvr_diag_inverse(c, s, w, f):
    n, p = c.shape
    b = np.empty(n)
    b[n - 1] = 1.0 / (f[n - 1] * f[n - 1])
    pmat = np.zeros((p, p))
    rmat = np.zeros((p, p))
    pvec = np.zeros(p)
    for i in range(n - 2, -1, -1):
        for k in range(p):
            for l in range(p):
                pmat[k, l] = (
                    b[i + 1] * c[i + 1, k] * c[i + 1, l]
                    - (c[i + 1, k] * pvec[l] + pvec[k] * c[i + 1, l]) / f[i + 1]
                    + rmat[k, l]
                )
        for k in range(p):
            for l in range(p):
                rmat[k, l] = s[i, k] * pmat[k, l] * s[i, l]
        wp = 0.0
        for k in range(p):
            acc = 0.0
            for l in range(p):
                acc += rmat[k, l] * w[i, l]
            pvec[k] = acc
            wp += w[i, k] * acc
        b[i] = (1.0 + wp) / (f[i] * f[i])
    return b


@njit(cache=True, nogil=True)
def gvr_trace_form(c, s, w, f, ct, st, nut, dt):
    n, p = c.shape
    pt = ct.shape[1]
    pmat = np.zeros((p, p))
    rmat = np.zeros((pt, p))
    pvec = np.empty(p)
    rvec = np.empty(p)
    total = 0.0
    for i in range(n):
        for k in range(p):
            acc = 0.0
            for l in range(p):
                acc += pmat[k, l] * c[i, l]
            pvec[k] = acc
        for k in range(p):
            acc = 0.0
            for l in range(pt):
                acc += rmat[l, k] * ct[i, l]
            rvec[k] = acc
        q = dt[i]
        for k in range(pt):
            q += ct[i, k] * nut[i, k]
        for k in range(p):
            q += c[i, k] * (pvec[k] - 2.0 * rvec[k])
        q /= f[i] * f[i]
        total += q
        if i < n - 1:
            # P <- S_i { P + ((r-p) w^T + w (r-p)^T)/f_i + q w w^T } S_i
            for k in range(p):
                for l in range(p):
                    upd = (
                        pmat[k, l]
                        + ((rvec[k] - pvec[k]) * w[i, l] + w[i, k] * (rvec[l] - pvec[l]))
                        / f[i]
                        + q * w[i, k] * w[i, l]
                    )
                    pmat[k, l] = s[i, k] * upd * s[i, l]
            # R <- Stilde_i [ R + (nut_i - R c_i) w^T / f_i ] S_i
            for k in range(pt):
                acc = 0.0
                for l in range(p):
                    acc += rmat[k, l] * c[i, l]
                rc = nut[i, k] - acc
                for l in range(p):
                    rmat[k, l] = st[i, k] * (rmat[k, l] + rc * w[i, l] / f[i]) * s[i, l]
    return total


@njit(cache=True, nogil=True)
def gr_matvec(u, v, x):
    n, p = u.shape
    y = np.empty(n)
    mub = np.zeros(p)
    nub = np.zeros(p)
    for i in range(n):
        for k in range(p):
            mub[k] += u[i, k] * x[i]
    for i in range(n):
        acc = 0.0
        for k in range(p):
            mub[k] -= u[i, k] * x[i]
            nub[k] += v[i, k] * x[i]
        for k in range(p):
            acc += u[i, k] * nub[k] + v[i, k] * mub[k]
        y[i] = acc
    return y


@njit(cache=True, nogil=True)
def gr_cholesky(u, v, d):
    n, p = u.shape
    w = np.zeros((n, p))
    g = np.zeros(n)
    pmat = np.zeros((p, p))
    wt = np.empty(p)
    for i in range(n):
        diag = d[i]
        rad = d[i]
        for k in range(p):
            acc = 0.0
            for l in range(p):
                acc += pmat[k, l] * u[i, l]
            wt[k] = v[i, k] - acc
            diag += u[i, k] * v[i, k]
            rad += u[i, k] * wt[k]
        if rad <= _PD_EPS * diag or not np.isfinite(rad):
            return w, g, i, rad
        g[i] = np.sqrt(rad)
        for k in range(p):
            w[i, k] = wt[k] / g[i]
        for k in range(p):
            for l in range(p):
                pmat[k, l] += w[i, k] * w[i, l]
    return w, g, -1, 0.0


@njit(cache=True, nogil=True)
def gr_solve_lower(u, w, g, y):
    n, p = u.shape
    x = np.empty(n)
    chi = np.zeros(p)
    for i in range(n):
        acc = y[i]
        for k in range(p):
            acc -= u[i, k] * chi[k]
        x[i] = acc / g[i]
        for k in range(p):
            chi[k] += w[i, k] * x[i]
    return x


@njit(cache=True, nogil=True)
def gr_solve_upper(u, w, g, y):
    n, p = u.shape
    x = np.empty(n)
    chi = np.zeros(p)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for k in range(p):
            acc -= w[i, k] * chi[k]
        x[i] = acc / g[i]
        for k in range(p):
            chi[k] += u[i, k] * x[i]
    return x


@njit(cache=True, nogil=True)
def gr_trace_inverse(y_gen, z_gen, g):
    # tr(M^{-1}) from the generator form of L^{-1}: diagonal part plus
    # y_i^T Q_i y_i with Q_i accumulating z_j z_j^T over j < i.
    n, p = y_gen.shape
    qmat = np.zeros((p, p))
    total = 0.0
    for i in range(n):
        total += 1.0 / (g[i] * g[i])
        acc = 0.0
        for k in range(p):
            row = 0.0
            for l in range(p):
                row += qmat[k, l] * y_gen[i, l]
            acc += y_gen[i, k] * row
        total += acc
        for k in range(p):
            for l in range(p):
                qmat[k, l] += z_gen[i, k] * z_gen[i, l]
    return total


@njit(cache=True, nogil=True)
def grs_trace_inverse(u, w, g):
    # tr(M^{-1}) by solving L v = e_j column by column: O(N^2 p).
    n, p = u.shape
    total = 0.0
    chi = np.empty(p)
    for j in range(n):
        for k in range(p):
            chi[k] = 0.0
        for i in range(j, n):
            rhs = 1.0 if i == j else 0.0
            for k in range(p):
                rhs -= u[i, k] * chi[k]
            xi = rhs / g[i]
            total += xi * xi
            for k in range(p):
                chi[k] += w[i, k] * xi
    return total
