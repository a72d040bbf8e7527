"""Fast O(N p^2) algebra for semiseparable-plus-diagonal matrices.

All routines operate on the Givens-vector representation and touch each
row a constant number of times, carrying a p-sized (or p x p) state
between rows.  Nothing here ever materializes an N x N array, which is
what keeps the recursions stable: every carried quantity is damped by
the sine factors instead of being a difference of huge numbers.

The expensive sweeps are compiled in :mod:`givsep._sweeps`; this module
adds input validation and typed errors.
"""

from __future__ import annotations

import numpy as np

from . import _sweeps
from .errors import DegenerateDiagonal, NotPositiveDefinite
from .reps import DiagVec, GvRCholesky, GvRMatrix, InvCholRep

__all__ = [
    "matvec",
    "cholesky",
    "logdet",
    "tri_matvec_lower",
    "tri_matvec_upper",
    "solve_lower",
    "solve_upper",
    "inv_chol_rep",
    "diag_inverse",
    "trace_form",
]


def _as_vector(x, n: int, name: str) -> np.ndarray:
    vec = np.ascontiguousarray(x, dtype=np.float64)
    if vec.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {vec.shape}")
    return vec


def matvec(a: GvRMatrix, x) -> np.ndarray:
    """Compute ``A @ x`` in O(N p) with forward/backward sweeps."""
    vec = _as_vector(x, a.n, "x")
    return _sweeps.gvr_matvec(a.c, a.s, a.nu_hat, vec)


def cholesky(a: GvRMatrix, d: DiagVec) -> GvRCholesky:
    """Factor ``A + diag(d) = L L^T`` with L in Givens-vector form.

    Parameters
    ----------
    a : GvRMatrix
        Symmetric semiseparable part.
    d : DiagVec
        Diagonal shift (typically the regularization ``gamma * I``).

    Returns
    -------
    GvRCholesky
        Shares ``c`` and ``s`` with ``a``; adds the factor rows ``w``
        and the diagonal ``f``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot radicand drops below the breakdown threshold
        ``1e-14 * (A_ii + d_i)``.
    """
    if d.n != a.n:
        raise ValueError(f"diagonal length {d.n} does not match matrix order {a.n}")
    w, f, bad, rad = _sweeps.gvr_cholesky(a.c, a.s, a.nu_hat, d.d)
    if bad >= 0:
        raise NotPositiveDefinite(bad, rad)
    return GvRCholesky(gvr=a, w=w, f=f)


def logdet(chol: GvRCholesky) -> float:
    """Return ``log det(A + D) = 2 * sum(log f_i)``."""
    return 2.0 * float(np.sum(np.log(chol.f)))


def tri_matvec_lower(chol: GvRCholesky, x) -> np.ndarray:
    """Compute ``L @ x`` for the factor held by ``chol``."""
    g = chol.gvr
    vec = _as_vector(x, g.n, "x")
    return _sweeps.gvr_tri_lower(g.c, g.s, chol.w, chol.f, vec)


def tri_matvec_upper(chol: GvRCholesky, x) -> np.ndarray:
    """Compute ``L.T @ x`` for the factor held by ``chol``."""
    g = chol.gvr
    vec = _as_vector(x, g.n, "x")
    return _sweeps.gvr_tri_upper(g.c, g.s, chol.w, chol.f, vec)


def solve_lower(chol: GvRCholesky, y) -> np.ndarray:
    """Solve ``L x = y`` by forward substitution."""
    g = chol.gvr
    vec = _as_vector(y, g.n, "y")
    return _sweeps.gvr_solve_lower(g.c, g.s, chol.w, chol.f, vec)


def solve_upper(chol: GvRCholesky, y) -> np.ndarray:
    """Solve ``L.T x = y`` by backward substitution."""
    g = chol.gvr
    vec = _as_vector(y, g.n, "y")
    return _sweeps.gvr_solve_upper(g.c, g.s, chol.w, chol.f, vec)


def inv_chol_rep(chol: GvRCholesky, d: DiagVec) -> InvCholRep:
    """Represent ``L^{-1}`` without forming it.

    ``L^{-1}`` is again lower triangular with entries
    ``cbar_i^T Sbar_{i-1} ... Sbar_{j+1} wbar_j`` below the diagonal and
    ``fbar_i = 1/f_i`` on it.  The propagators ``Sbar_i`` are rank-one
    corrections of the original sine scalings, and
    ``wbar_i = w_i * f_i / d_i`` uses the identity
    ``f_i - c_i^T w_i = d_i / f_i`` to avoid the cancellation-prone
    difference.

    Raises
    ------
    DegenerateDiagonal
        If some ``d_i <= 0``; the rescaled representation requires a
        strictly positive shift.
    """
    g = chol.gvr
    n, p = g.n, g.p
    if d.n != n:
        raise ValueError(f"diagonal length {d.n} does not match matrix order {n}")
    bad = np.nonzero(d.d <= 0.0)[0]
    if bad.size:
        i = int(bad[0])
        raise DegenerateDiagonal(i, float(d.d[i]))
    cbar = -g.c / chol.f[:, None]
    fbar = 1.0 / chol.f
    head_s = g.s[: n - 1]
    head_c = g.c[: n - 1]
    head_f = chol.f[: n - 1]
    sbar = np.zeros((n - 1, p, p))
    idx = np.arange(p)
    sbar[:, idx, idx] = head_s
    sbar -= (head_s * chol.w)[:, :, None] * (head_c / head_f[:, None])[:, None, :]
    wbar = chol.w * (head_f / d.d[: n - 1])[:, None]
    return InvCholRep(cbar=cbar, sbar=sbar, wbar=wbar, fbar=fbar)


def diag_inverse(chol: GvRCholesky) -> np.ndarray:
    """Return ``diag((A + D)^{-1})`` in O(N p^2).

    Runs backward over the rows, carrying the p x p Gram matrix of the
    implicit inverse-factor columns; equivalent to (but much cheaper
    than) squaring the rows of ``L^{-1}``.
    """
    g = chol.gvr
    return _sweeps.gvr_diag_inverse(g.c, g.s, chol.w, chol.f)


def trace_form(chol: GvRCholesky, atilde: GvRMatrix | None = None, dtilde=None) -> float:
    """Return ``tr(L^{-1} (Atilde + diag(dtilde)) L^{-T})`` in O(N p ptilde).

    With ``Atilde + diag(dtilde)`` equal to the factored matrix this is
    exactly N; with ``atilde=None, dtilde=1`` it is ``tr((A + D)^{-1})``,
    the quantity the tuning criteria need.

    Parameters
    ----------
    chol : GvRCholesky
        Factor of ``M = A + D``.
    atilde : GvRMatrix, optional
        Semiseparable part of the weighting matrix; ``None`` means zero.
    dtilde : float or array_like, optional
        Diagonal part; a scalar broadcasts, ``None`` means zero.
    """
    g = chol.gvr
    n = g.n
    if dtilde is None:
        dt = np.zeros(n)
    elif np.isscalar(dtilde):
        dt = np.full(n, float(dtilde))
    else:
        dt = _as_vector(dtilde, n, "dtilde")
    if atilde is None:
        ct = np.zeros((n, 1))
        st = np.zeros((n, 1))
        nut = np.zeros((n, 1))
    else:
        if atilde.n != n:
            raise ValueError(
                f"atilde order {atilde.n} does not match matrix order {n}"
            )
        ct, st, nut = atilde.c, atilde.s, atilde.nu_hat
    return float(_sweeps.gvr_trace_form(g.c, g.s, chol.w, chol.f, ct, st, nut, dt))
