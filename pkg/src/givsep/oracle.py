"""Reference implementations: dense O(N^3) criteria and high-precision fixtures.

``dense_criteria`` is the comparison baseline used throughout the tests
and experiments (the role MATLAB built-ins play in the original
comparisons): plain dense Cholesky, triangular solves, and an explicit
triangular inverse for the trace.

``extended_eval_fixture`` evaluates the two tiny N=5 showcase instances
at 50 significant digits so double-precision routes can be measured
against an effectively exact reference.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg.lapack as lapack
from mpmath import mp, mpf

from .errors import NotPositiveDefinite
from .sysid import CriterionReport, report_from_solution

__all__ = ["dense_criteria", "extended_eval_fixture", "FIXTURES"]

#: order guard: beyond this the dense route is no longer a practical oracle
_MAX_DENSE_N = 5000

FIXTURES = ("example1_matvec", "example2_invchol")

#: precision (significant decimal digits) for the fixture reference route
_FIXTURE_DPS = 50


def dense_criteria(dense, y, gamma: float) -> CriterionReport:
    """Evaluate the criteria by dense linear algebra.

    Parameters
    ----------
    dense : (N, N) array_like
        The kernel (or output-kernel) matrix, without the shift.
    y : (N,) array_like
        Measurements.
    gamma : float
        Positive diagonal shift.

    Raises
    ------
    NotPositiveDefinite
        From LAPACK's Cholesky when ``dense + gamma*I`` fails.
    ValueError
        If N exceeds the oracle guard (5000).
    """
    psi = np.ascontiguousarray(dense, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
        raise ValueError(f"dense matrix must be square, got {psi.shape}")
    n = psi.shape[0]
    if n > _MAX_DENSE_N:
        raise ValueError(f"dense oracle limited to N <= {_MAX_DENSE_N}, got {n}")
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {y.shape}")
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    m = psi + gamma * np.eye(n)
    c, info = lapack.dpotrf(m, lower=1)
    if info > 0:
        raise NotPositiveDefinite(info - 1, float("nan"))
    if info < 0:
        raise ValueError(f"illegal value in Cholesky argument {-info}")
    alpha, info = lapack.dpotrs(c, y, lower=1)
    if info != 0:
        raise ValueError(f"triangular solve failed (info={info})")
    y_hat = psi @ alpha
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    linv, info = lapack.dtrtri(c, lower=1)
    if info != 0:
        raise ValueError(f"triangular inversion failed (info={info})")
    tr_minv = float(np.sum(linv * linv))
    return report_from_solution(y, alpha, y_hat, logdet, tr_minv, gamma)


def _forward_solve(lmat, rhs, n):
    """Columnwise forward substitution on an mpmath lower-triangular matrix."""
    cols = rhs.cols
    out = mp.matrix(n, cols)
    for k in range(cols):
        for i in range(n):
            acc = rhs[i, k]
            for j in range(i):
                acc -= lmat[i, j] * out[j, k]
            out[i, k] = acc / lmat[i, i]
    return out


def _backward_solve_t(lmat, rhs, n):
    """Solve L^T X = RHS by backward substitution (L lower triangular)."""
    cols = rhs.cols
    out = mp.matrix(n, cols)
    for k in range(cols):
        for i in range(n - 1, -1, -1):
            acc = rhs[i, k]
            for j in range(i + 1, n):
                acc -= lmat[j, i] * out[j, k]
            out[i, k] = acc / lmat[i, i]
    return out


def _cond2(a, n, m):
    sv = mp.svd_r(a.copy(), compute_uv=False)
    return sv[0] / sv[min(n, m) - 1]


def _to_float(mat, rows, cols):
    out = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            out[i, j] = float(mat[i, j])
    return out


def _fixture_example1() -> dict:
    lam, rho = mpf(0.1), mpf(1e-7)
    n = 5
    x = np.array([-1.0, 1.0, -1.0, 1.0, -1.0])
    y = mp.matrix(n, 1)
    for i in range(n):
        acc = mpf(0)
        for j in range(n):
            ti, tj = i + 1, j + 1
            acc += lam ** (ti + tj) * rho ** abs(ti - tj) * mpf(x[j])
        y[i] = acc
    return {
        "x": x,
        "y_ref": np.array([float(y[i]) for i in range(n)]),
    }


def _fixture_example2() -> dict:
    rho, gamma = mpf(0.5), mpf(1e-8)
    n, p = 5, 2

    def kernel(t, s):
        hi = max(t, s)
        return rho ** (t + s + hi) / 2 - rho ** (3 * hi) / 6

    m = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            m[i, j] = kernel(i + 1, j + 1) + (gamma if i == j else 0)

    # generator pair of the semiseparable part
    u = mp.matrix(n, p)
    v = mp.matrix(n, p)
    for i in range(n):
        t = i + 1
        u[i, 0] = -(rho ** (3 * t)) / 6
        v[i, 0] = mpf(1)
        u[i, 1] = (rho ** (2 * t)) / 2
        v[i, 1] = rho**t

    # generator-form Cholesky of M (recursion carrying P = sum w w^T)
    w = mp.matrix(n, p)
    c = mp.matrix(n, 1)
    pmat = mp.matrix(p, p)
    for i in range(n):
        wt = [v[i, k] - sum(pmat[k, l] * u[i, l] for l in range(p)) for k in range(p)]
        rad = gamma + sum(u[i, k] * wt[k] for k in range(p))
        c[i] = mp.sqrt(rad)
        for k in range(p):
            w[i, k] = wt[k] / c[i]
        for k in range(p):
            for l in range(p):
                pmat[k, l] += w[i, k] * w[i, l]

    lmat = mp.matrix(n, n)
    for i in range(n):
        lmat[i, i] = c[i]
        for j in range(i):
            lmat[i, j] = sum(u[i, k] * w[j, k] for k in range(p))

    ident = mp.matrix(n, n)
    for i in range(n):
        ident[i, i] = mpf(1)
    linv = _forward_solve(lmat, ident, n)

    y_gen = _forward_solve(lmat, u, n)
    b_gen = _backward_solve_t(lmat, w, n)
    g = mp.matrix(p, p)
    for k in range(p):
        for l in range(p):
            g[k, l] = sum(y_gen[i, k] * w[i, l] for i in range(n)) - (1 if k == l else 0)
    z_gen = b_gen * (g**-1)

    cond_matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(i):
            num = sum(abs(y_gen[i, k]) * abs(z_gen[j, k]) for k in range(p))
            den = abs(sum(y_gen[i, k] * z_gen[j, k] for k in range(p)))
            cond_matrix[i, j] = float(num / den)

    tril_ref = np.tril(_to_float(linv, n, n), -1)
    return {
        "kappa_m": float(_cond2(m, n, n)),
        "kappa_g": float(_cond2(g, p, p)),
        "tril_ref": tril_ref,
        "fbar_ref": np.array([float(linv[i, i]) for i in range(n)]),
        "y_high": _to_float(y_gen, n, p),
        "z_high": _to_float(z_gen, n, p),
        "cond_matrix": cond_matrix,
    }


def extended_eval_fixture(fixture_id: str) -> dict:
    """Reference values for the two N=5 showcase instances.

    Evaluated at 50 significant digits and rounded to float64 on return,
    so every reference is exact to double precision.

    ``example1_matvec``: the badly scaled 1-semiseparable product
    ``y = K x`` — returns ``x`` and the reference ``y_ref``.

    ``example2_invchol``: the nearly singular shifted 2-semiseparable
    factorization — returns the reference strictly-lower part of
    ``L^{-1}`` (``tril_ref``) and its diagonal (``fbar_ref``), the
    high-precision generator pair (``y_high``, ``z_high``) of the
    inverse factor, the condition numbers ``kappa_m`` and ``kappa_g``,
    and the matrix of inner-product relative condition numbers
    (``cond_matrix``).
    """
    if fixture_id not in FIXTURES:
        raise ValueError(f"unknown fixture {fixture_id!r}; expected one of {FIXTURES}")
    with mp.workdps(_FIXTURE_DPS):
        if fixture_id == "example1_matvec":
            return _fixture_example1()
        return _fixture_example2()
