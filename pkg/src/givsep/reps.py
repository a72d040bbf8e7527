"""Structured representations of symmetric rank-p semiseparable matrices.

A symmetric p-semiseparable matrix can be carried either by a generator
pair (U, V) -- the generator representation, GR -- or by per-row Givens
pairs (c_i, s_i) together with scaled vectors nu-hat -- the Givens-vector
representation, GvR.  The GR form is the one kernels produce naturally,
but its generators may span enormous dynamic ranges even when the matrix
entries are tame.  The GvR form keeps every stored number bounded by the
entries themselves, which is what makes the O(N p) / O(N p^2) sweeps in
:mod:`givsep.fastalg` numerically stable.

This module holds the value types, the GR -> GvR conversion, and dense
O(N^2 p) reconstructions used for testing and as oracles.  The fast
algorithms never touch the dense forms.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "GRMatrix",
    "GvRMatrix",
    "DiagVec",
    "GvRCholesky",
    "InvCholRep",
    "gr_to_gvr",
    "gr_to_dense",
    "gvr_to_dense",
    "chol_to_dense",
    "inv_chol_to_dense",
]

#: relative tolerance used by the equispaced-grid test
_EQUISPACED_RTOL = 1e-12


def _frozen_array(name, value, *, ndim):
    """Validate and freeze an input array: float64, finite, fixed ndim."""
    arr = np.array(value, dtype=np.float64, order="C", copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    arr.flags.writeable = False
    return arr


def _fmt(x):
    return format(float(x), ".17g")


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times t_1 < ... < t_N.

    The grid counts as *equispaced* only when t_i = T * i for a single
    positive step T (to relative tolerance 1e-12), i.e. it starts at the
    step itself.  Several kernel constructors have cheaper recursions in
    that case.
    """

    t: np.ndarray

    def __post_init__(self):
        t = _frozen_array("t", self.t, ndim=1)
        if t.size < 1:
            raise ValueError("a time grid needs at least one sample")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ValueError("sample times must be strictly increasing")
        object.__setattr__(self, "t", t)

    @classmethod
    def regular(cls, n, step=1.0):
        """The grid (step, 2*step, ..., n*step)."""
        return cls(step * np.arange(1, n + 1, dtype=np.float64))

    @property
    def n(self):
        return self.t.size

    @property
    def equispaced(self):
        step = self.t[0]
        if step <= 0.0:
            return False
        ideal = step * np.arange(1, self.t.size + 1)
        return bool(np.all(np.abs(self.t - ideal) <= _EQUISPACED_RTOL * ideal))

    @property
    def step(self):
        """Common step T when the grid is equispaced, else None."""
        return float(self.t[0]) if self.equispaced else None

    def to_csv(self):
        return _csv(["i", "t"], ([str(i + 1), _fmt(ti)] for i, ti in enumerate(self.t)))


@dataclass(frozen=True)
class GRMatrix:
    """Generator representation A = tril(U V^T) + triu(V U^T, 1).

    Rows of ``u`` and ``v`` are the generator vectors mu_i and nu_i; the
    dense entry at (i, j) with j <= i is dot(mu_i, nu_j), and the upper
    triangle follows by symmetry.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = _frozen_array("u", self.u, ndim=2)
        v = _frozen_array("v", self.v, ndim=2)
        if u.shape != v.shape:
            raise ValueError(f"generator shapes differ: {u.shape} vs {v.shape}")
        if u.shape[0] < 1 or u.shape[1] < 1:
            raise ValueError("generators need at least one row and one column")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def p(self):
        return self.u.shape[1]

    def to_csv(self):
        p = self.p
        header = ["i"] + [f"u_{k + 1}" for k in range(p)] + [f"v_{k + 1}" for k in range(p)]
        rows = (
            [str(i + 1)] + [_fmt(x) for x in self.u[i]] + [_fmt(x) for x in self.v[i]]
            for i in range(self.n)
        )
        return _csv(header, rows)


@dataclass(frozen=True)
class GvRMatrix:
    """Givens-vector representation of a symmetric p-semiseparable matrix.

    Entries reconstruct as

        A(i, j) = c_i^T diag(s_{i-1}) ... diag(s_j) nu_hat_j   for j <= i,

    with the empty product (j = i) read as the identity.  For i < N each
    column pair satisfies c[i,k]^2 + s[i,k]^2 = 1; row N carries s = 0 and
    a conventional c (usually all ones) with only the products
    c[N,k]*nu_hat[N,k] mattering to the represented matrix.

    Immutable after construction; every algorithm takes it read-only.
    """

    c: np.ndarray
    s: np.ndarray
    nu_hat: np.ndarray

    def __post_init__(self):
        c = _frozen_array("c", self.c, ndim=2)
        s = _frozen_array("s", self.s, ndim=2)
        nu_hat = _frozen_array("nu_hat", self.nu_hat, ndim=2)
        if not (c.shape == s.shape == nu_hat.shape):
            raise ValueError(
                f"c, s, nu_hat shapes differ: {c.shape}, {s.shape}, {nu_hat.shape}"
            )
        n = c.shape[0]
        if n < 1 or c.shape[1] < 1:
            raise ValueError("representation needs at least one row and one column")
        if np.any(s[n - 1] != 0.0):
            raise ValueError("row N of s must be identically zero")
        norm = c[: n - 1] ** 2 + s[: n - 1] ** 2
        if norm.size and np.max(np.abs(norm - 1.0)) > 1e-12:
            raise ValueError("Givens pairs are not normalized: c^2 + s^2 != 1")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "nu_hat", nu_hat)

    @property
    def n(self):
        return self.c.shape[0]

    @property
    def p(self):
        return self.c.shape[1]

    def to_csv(self):
        p = self.p
        header = (
            ["i"]
            + [f"c_{k + 1}" for k in range(p)]
            + [f"s_{k + 1}" for k in range(p)]
            + [f"nuhat_{k + 1}" for k in range(p)]
        )
        rows = (
            [str(i + 1)]
            + [_fmt(x) for x in self.c[i]]
            + [_fmt(x) for x in self.s[i]]
            + [_fmt(x) for x in self.nu_hat[i]]
            for i in range(self.n)
        )
        return _csv(header, rows)


@dataclass(frozen=True)
class DiagVec:
    """Nonnegative diagonal shift d, i.e. D = diag(d) added to the matrix.

    The Cholesky-based operations additionally require strict positivity
    wherever the semiseparable part alone is singular; that is checked at
    the point of use, not here.
    """

    d: np.ndarray

    def __post_init__(self):
        d = _frozen_array("d", self.d, ndim=1)
        if d.size < 1:
            raise ValueError("diagonal needs at least one entry")
        if np.any(d < 0.0):
            raise ValueError("diagonal entries must be nonnegative")
        object.__setattr__(self, "d", d)

    @classmethod
    def constant(cls, n, gamma):
        """The uniform shift d_i = gamma, as in M = Psi + gamma*I."""
        return cls(np.full(n, float(gamma)))

    @property
    def n(self):
        return self.d.size

    def to_csv(self):
        return _csv(["i", "d"], ([str(i + 1), _fmt(di)] for i, di in enumerate(self.d)))


@dataclass(frozen=True)
class GvRCholesky:
    """Cholesky factor L of A + D, sharing the (c, s) of the source GvR.

    L(i, i) = f_i and L(i, j) = c_i^T diag(s_{i-1}) ... diag(s_j) w_j for
    j < i.  Only N-1 of the w rows are ever referenced by the solves and
    trace sweeps, so ``w`` is stored as an (N-1) x p array.
    """

    gvr: GvRMatrix
    w: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        if not isinstance(self.gvr, GvRMatrix):
            raise TypeError("gvr must be a GvRMatrix")
        n, p = self.gvr.c.shape
        w = _frozen_array("w", self.w, ndim=2)
        f = _frozen_array("f", self.f, ndim=1)
        if w.shape != (max(n - 1, 0), p):
            raise ValueError(f"w must have shape {(n - 1, p)}, got {w.shape}")
        if f.shape != (n,):
            raise ValueError(f"f must have length {n}, got {f.shape}")
        if np.any(f <= 0.0):
            raise ValueError("Cholesky diagonal f must be strictly positive")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "f", f)

    @property
    def n(self):
        return self.f.size

    @property
    def p(self):
        return self.gvr.p

    def to_csv(self):
        p = self.p
        header = ["i", "f"] + [f"w_{k + 1}" for k in range(p)]
        rows = (
            [str(i + 1), _fmt(self.f[i])]
            + ([_fmt(x) for x in self.w[i]] if i < self.n - 1 else [""] * p)
            for i in range(self.n)
        )
        return _csv(header, rows)


@dataclass(frozen=True)
class InvCholRep:
    """Representation of L^{-1} with dense p x p couplings.

    The inverse factor keeps the Givens-vector layout except that the
    diagonal scalings turn into dense matrices:

        (L^{-1})(i, i) = fbar_i,
        (L^{-1})(i, j) = cbar_i^T  Sbar_{i-1} ... Sbar_j  wbar_j,  j < i.
    """

    cbar: np.ndarray
    sbar: np.ndarray
    wbar: np.ndarray
    fbar: np.ndarray

    def __post_init__(self):
        cbar = _frozen_array("cbar", self.cbar, ndim=2)
        sbar = _frozen_array("sbar", self.sbar, ndim=3)
        wbar = _frozen_array("wbar", self.wbar, ndim=2)
        fbar = _frozen_array("fbar", self.fbar, ndim=1)
        n, p = cbar.shape
        if sbar.shape != (max(n - 1, 0), p, p):
            raise ValueError(f"sbar must have shape {(n - 1, p, p)}, got {sbar.shape}")
        if wbar.shape != (max(n - 1, 0), p):
            raise ValueError(f"wbar must have shape {(n - 1, p)}, got {wbar.shape}")
        if fbar.shape != (n,):
            raise ValueError(f"fbar must have length {n}, got {fbar.shape}")
        if np.any(fbar <= 0.0):
            raise ValueError("inverse-factor diagonal fbar must be strictly positive")
        object.__setattr__(self, "cbar", cbar)
        object.__setattr__(self, "sbar", sbar)
        object.__setattr__(self, "wbar", wbar)
        object.__setattr__(self, "fbar", fbar)

    @property
    def n(self):
        return self.fbar.size

    @property
    def p(self):
        return self.cbar.shape[1]

    def to_csv(self):
        p = self.p
        header = (
            ["i", "fbar"]
            + [f"cbar_{k + 1}" for k in range(p)]
            + [f"wbar_{k + 1}" for k in range(p)]
            + [f"sbar_{r + 1}{k + 1}" for r in range(p) for k in range(p)]
        )
        rows = (
            [str(i + 1), _fmt(self.fbar[i])]
            + [_fmt(x) for x in self.cbar[i]]
            + (
                [_fmt(x) for x in self.wbar[i]]
                + [_fmt(x) for x in self.sbar[i].ravel()]
                if i < self.n - 1
                else [""] * (p + p * p)
            )
            for i in range(self.n)
        )
        return _csv(header, rows)


def gr_to_gvr(gr):
    """Convert a generator representation to the Givens-vector one.

    Per generator column k a backward Givens sweep turns the mu column
    into suffix norms r_{i,k} = ||mu_{i:N,k}||_2 (built with hypot, so no
    intermediate squares):

        c_{i,k} = mu_{i,k} / r_{i,k},     s_{i,k} = r_{i+1,k} / r_{i,k},
        nu_hat_{i,k} = nu_{i,k} * r_{i,k}

    for i < N, with r_{i,k} = 0 degenerating to (c, s) = (1, 0), and row N
    carrying c = 1, s = 0, nu_hat_{N,k} = mu_{N,k} * nu_{N,k}.  The tail
    ratio s_{N-1,k} is taken as mu_{N,k} / r_{N-1,k} -- signed, not
    |mu_{N,k}| / r_{N-1,k} -- so that row N reconstructs mu_N^T nu_j
    rather than |mu_N|^T nu_j; the magnitudes are unchanged and the
    normalization c^2 + s^2 = 1 still holds.

    Every produced number is bounded: |c|, |s| <= 1 and |nu_hat_{i,k}| <=
    |nu_{i,k}| * r_{1,k}, even when the generator columns themselves span
    hundreds of orders of magnitude.

    Parameters
    ----------
    gr : GRMatrix

    Returns
    -------
    GvRMatrix representing the same dense matrix.
    """
    u, v = gr.u, gr.v
    n, p = u.shape
    c = np.ones((n, p))
    s = np.zeros((n, p))
    nu_hat = np.empty((n, p))
    nu_hat[n - 1] = u[n - 1] * v[n - 1]
    if n == 1:
        return GvRMatrix(c=c, s=s, nu_hat=nu_hat)

    r = np.empty((n, p))
    r[n - 1] = np.abs(u[n - 1])
    for i in range(n - 2, -1, -1):
        r[i] = np.hypot(u[i], r[i + 1])

    tail = np.empty((n - 1, p))
    tail[: n - 2] = r[1 : n - 1]
    tail[n - 2] = u[n - 1]
    head = r[: n - 1]
    # suffix norms below the smallest normal double carry almost no
    # significant bits; treating them as zero keeps the pairs exact where
    # the represented entries have underflowed anyway
    positive = head > np.finfo(np.float64).tiny
    safe = np.where(positive, head, 1.0)
    c[: n - 1] = np.where(positive, u[: n - 1] / safe, 1.0)
    s[: n - 1] = np.where(positive, tail / safe, 0.0)
    renorm = np.hypot(c[: n - 1], s[: n - 1])
    c[: n - 1] /= renorm
    s[: n - 1] /= renorm
    nu_hat[: n - 1] = v[: n - 1] * head
    return GvRMatrix(c=c, s=s, nu_hat=nu_hat)


def gr_to_dense(gr):
    """Dense symmetric matrix from generators: tril(U V^T) + triu(V U^T, 1)."""
    low = np.tril(gr.u @ gr.v.T)
    return low + np.triu(low.T, 1)


def gvr_to_dense(a):
    """Dense symmetric matrix from a Givens-vector representation.

    O(N^2 p); intended for tests and oracles only.
    """
    c, s, nu_hat = a.c, a.s, a.nu_hat
    n = a.n
    out = np.empty((n, n))
    for j in range(n):
        chi = nu_hat[j].copy()
        out[j, j] = c[j] @ chi
        for i in range(j + 1, n):
            chi = chi * s[i - 1]
            out[i, j] = c[i] @ chi
            out[j, i] = out[i, j]
    return out


def chol_to_dense(chol):
    """Dense lower-triangular Cholesky factor from its GvR form (testing only)."""
    c, s = chol.gvr.c, chol.gvr.s
    n = chol.n
    out = np.zeros((n, n))
    out[np.arange(n), np.arange(n)] = chol.f
    for j in range(n - 1):
        chi = chol.w[j] * s[j]
        for i in range(j + 1, n):
            out[i, j] = c[i] @ chi
            if i + 1 < n:
                chi = chi * s[i]
    return out


def inv_chol_to_dense(inv):
    """Dense lower-triangular L^{-1} from its representation (testing only).

    The couplings Sbar_i are dense and do not commute, so the running
    vector is propagated by left-multiplication in index order.
    """
    n = inv.n
    out = np.zeros((n, n))
    out[np.arange(n), np.arange(n)] = inv.fbar
    for j in range(n - 1):
        chi = inv.sbar[j] @ inv.wbar[j]
        for i in range(j + 1, n):
            out[i, j] = inv.cbar[i] @ chi
            if i < n - 1:
                chi = inv.sbar[i] @ chi
    return out
