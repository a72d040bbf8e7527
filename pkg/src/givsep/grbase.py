"""Generator-based baseline algorithms.

These are the O(N p^2) routines one gets by working directly with the
generator pair (U, V): matrix-vector products from forward/backward
partial sums, a Cholesky factor of the form ``tril(U W^T, -1) + diag(c)``,
and an inverse factor built from ``Y = L^{-1} U`` and
``Z = L^{-T} W (Y^T W - I_p)^{-1}``.

They are provided as the comparison baseline: on well-scaled instances
they agree with dense linear algebra, but the partial sums and the
``Y^T W - I_p`` system involve the raw generator products, whose range
grows exponentially with N for exponential-family kernels.  The
resulting breakdowns are expected behavior here, not bugs; callers that
want to observe them pass ``check=False`` where applicable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _sweeps
from .errors import NotPositiveDefinite, SingularYW
from .reps import DiagVec, GRMatrix

__all__ = [
    "GRCholesky",
    "gr_matvec",
    "gr_cholesky",
    "gr_solve_lower",
    "gr_solve_upper",
    "gr_inv_chol",
    "gr_trace_inverse",
    "grs_trace_inverse",
    "gr_chol_to_dense",
]

#: condition-number threshold above which Y^T W - I_p is treated as singular
_SINGULAR_COND = 1e15


@dataclass(frozen=True)
class GRCholesky:
    """Cholesky factor ``L = tril(U W^T, -1) + diag(c)`` of ``A + D``.

    ``gr`` is the factored matrix's generator form (U is shared with it);
    ``w`` holds the rows of W (N x p) and ``c`` the positive diagonal.
    Unlike the Givens-vector containers, entries of ``w`` may be extreme
    on badly scaled instances — that is what this baseline is for.
    """

    gr: GRMatrix
    w: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64, order="C")
        c = np.array(self.c, dtype=np.float64, order="C")
        n, p = self.gr.n, self.gr.p
        if w.shape != (n, p):
            raise ValueError(f"W must have shape ({n}, {p}), got {w.shape}")
        if c.shape != (n,):
            raise ValueError(f"c must have shape ({n},), got {c.shape}")
        if not np.all(c > 0.0):
            raise ValueError("diagonal of the factor must be strictly positive")
        w.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.gr.n


def _vec(x, n: int, name: str) -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {v.shape}")
    return v


def gr_matvec(gr: GRMatrix, x) -> np.ndarray:
    """Compute ``A @ x`` from the generators via partial sums.

    Runs the classic forward/backward recursion on
    ``mubar_i = sum_{j>i} mu_j x_j`` and ``nubar_i = sum_{j<=i} nu_j x_j``.
    No overflow protection: when the generator entries span a huge range
    the partial sums lose all accuracy, and inf/NaN propagate freely.
    """
    v = _vec(x, gr.n, "x")
    return _sweeps.gr_matvec(gr.u, gr.v, v)


def gr_cholesky(gr: GRMatrix, d: DiagVec) -> GRCholesky:
    """Factor ``A + diag(d) = L L^T`` in generator form.

    The recursion carries the p x p accumulation ``P = sum w_j w_j^T``
    and satisfies ``c_i - u_i^T w_i = d_i / c_i`` row by row.

    Raises
    ------
    NotPositiveDefinite
        If a pivot radicand falls below ``1e-14 * (A_ii + d_i)`` or is
        not finite.
    """
    if d.n != gr.n:
        raise ValueError(f"diagonal length {d.n} does not match matrix order {gr.n}")
    w, g, bad, rad = _sweeps.gr_cholesky(gr.u, gr.v, d.d)
    if bad >= 0:
        raise NotPositiveDefinite(bad, rad)
    return GRCholesky(gr=gr, w=w, c=g)


def gr_solve_lower(chol: GRCholesky, y) -> np.ndarray:
    """Solve ``L x = y`` by forward substitution on the generator form."""
    v = _vec(y, chol.n, "y")
    return _sweeps.gr_solve_lower(chol.gr.u, chol.w, chol.c, v)


def gr_solve_upper(chol: GRCholesky, y) -> np.ndarray:
    """Solve ``L^T x = y`` by backward substitution on the generator form."""
    v = _vec(y, chol.n, "y")
    return _sweeps.gr_solve_upper(chol.gr.u, chol.w, chol.c, v)


def gr_inv_chol(chol: GRCholesky, *, check: bool = True):
    """Generator form of ``L^{-1}``: returns ``(Y, Z, 1/c)``.

    ``L^{-1} = tril(Y Z^T, -1) + diag(1/c)`` with ``Y = L^{-1} U`` and
    ``Z = L^{-T} W (Y^T W - I_p)^{-1}``.  The small system
    ``G = Y^T W - I_p`` is where this route collapses: its conditioning
    is not controlled by the conditioning of ``A + D``.

    Parameters
    ----------
    chol : GRCholesky
        Factor produced by :func:`gr_cholesky`.
    check : bool
        When True (default) raise :class:`SingularYW` if the condition
        number of ``G`` exceeds 1e15.  Pass False to push through and
        obtain whatever double precision yields.
    """
    u, w = chol.gr.u, chol.w
    n, p = u.shape
    y = np.empty((n, p))
    b = np.empty((n, p))
    with np.errstate(all="ignore"):
        for k in range(p):
            y[:, k] = _sweeps.gr_solve_lower(u, w, chol.c, np.ascontiguousarray(u[:, k]))
            b[:, k] = _sweeps.gr_solve_upper(u, w, chol.c, np.ascontiguousarray(w[:, k]))
        g = y.T @ w - np.eye(p)
    if np.all(np.isfinite(g)):
        cond = float(np.linalg.cond(g))
        if not np.isfinite(cond):
            cond = np.inf
    else:
        cond = np.inf
    if check and cond > _SINGULAR_COND:
        raise SingularYW(cond)
    try:
        with np.errstate(all="ignore"):
            z = np.linalg.solve(g.T, b.T).T
    except np.linalg.LinAlgError:
        z = np.full_like(b, np.nan)
    return y, z, 1.0 / chol.c


def gr_trace_inverse(chol: GRCholesky, *, check: bool = True) -> float:
    """Return ``tr((A + D)^{-1})`` through the generator inverse, O(N p^2).

    Accumulates the squared strictly-lower entries of ``L^{-1}`` as
    ``y_i^T (sum_{j<i} z_j z_j^T) y_i`` plus the diagonal ``1/c_i^2``.
    """
    y, z, _ = gr_inv_chol(chol, check=check)
    with np.errstate(all="ignore"):
        return float(_sweeps.gr_trace_inverse(y, z, chol.c))


def grs_trace_inverse(chol: GRCholesky) -> float:
    """Return ``tr((A + D)^{-1})`` by columnwise solves, O(N^2 p).

    Solves ``L v = e_j`` for every j and sums ``||v||^2``; avoids the
    ``Y^T W - I_p`` system at the price of a factor N.
    """
    with np.errstate(all="ignore"):
        return float(_sweeps.grs_trace_inverse(chol.gr.u, chol.w, chol.c))


def gr_chol_to_dense(chol: GRCholesky) -> np.ndarray:
    """Materialize the factor ``L`` (reference/diagnostic use)."""
    low = np.tril(chol.gr.u @ chol.w.T, -1)
    return low + np.diag(chol.c)
