"""Shared brute-force oracles and random-instance generators for the tests.

Everything here is deliberately naive: scalar formulas, explicit double
sums, plain ``numpy.linalg`` — independent of the structured code paths
under test.
"""

import numpy as np

from givsep.kernels import KernelSpec
from givsep.reps import TimeGrid


def rand_spec(rng, fam: str) -> KernelSpec:
    if fam == "dc":
        return KernelSpec.dc(lam=rng.uniform(0.1, 0.95), rho=rng.uniform(0.1, 0.95))
    if fam == "tc":
        return KernelSpec.tc(rho=rng.uniform(0.1, 0.95))
    if fam == "ss":
        return KernelSpec.ss(rho=rng.uniform(0.1, 0.95))
    raise ValueError(fam)


def rand_grid(rng, n: int) -> TimeGrid:
    """Half the time a regular grid, half the time irregular increasing."""
    if rng.random() < 0.5:
        return TimeGrid.regular(n, step=rng.uniform(0.5, 1.5))
    return TimeGrid(t=np.cumsum(rng.uniform(0.1, 1.0, size=n)))


def kernel_scalar(spec: KernelSpec, t: float, s: float) -> float:
    """Scalar kernel evaluation straight from the defining formulas."""
    if spec.family == "dc":
        return spec.lam ** (t + s) * spec.rho ** abs(t - s)
    if spec.family == "tc":
        return spec.rho ** (t + s) * spec.rho ** abs(t - s)
    if spec.family == "ss":
        lo, hi = min(t, s), max(t, s)
        return spec.rho ** (lo + 2 * hi) / 2.0 - spec.rho ** (3 * hi) / 6.0
    raise ValueError(spec.family)


def dense_scalar(spec: KernelSpec, grid: TimeGrid) -> np.ndarray:
    t = grid.t
    return np.array([[kernel_scalar(spec, ti, tj) for tj in t] for ti in t])


def psi_double_sum_dt(lam, rho, alpha, t1, t2) -> float:
    """Output-kernel entry for the exponential DT input by explicit sums.

    Psi(t1, t2) = sum_{s=0..t1} sum_{r=0..t2} K(s, r) u(t1-s) u(t2-r)
    with u(t) = exp(-alpha t); exact in discrete time (finite sums).
    """
    s = np.arange(0, int(t1) + 1, dtype=float)
    r = np.arange(0, int(t2) + 1, dtype=float)
    S, R = np.meshgrid(s, r, indexing="ij")
    K = lam ** (S + R) * rho ** np.abs(S - R)
    return float(np.sum(K * np.exp(-alpha * (t1 - S)) * np.exp(-alpha * (t2 - R))))


def dense_report(dense: np.ndarray, y: np.ndarray, gamma: float) -> dict:
    """All criterion ingredients by plain numpy on the dense matrix."""
    n = len(y)
    m = dense + gamma * np.eye(n)
    alpha = np.linalg.solve(m, y)
    y_hat = dense @ alpha
    sign, ld = np.linalg.slogdet(m)
    minv = np.linalg.inv(m)
    tr = np.trace(minv)
    resid = float(np.sum((y - y_hat) ** 2))
    return {
        "alpha": alpha,
        "y_hat": y_hat,
        "logdet": float(ld),
        "tr": float(tr),
        "eb": float(y @ alpha + ld),
        "sure": float(resid + 2.0 * gamma * (n - gamma * tr)),
        "gcv": float(n * n * resid / (gamma * tr) ** 2),
        "gml": float(n * np.log(y @ alpha) + ld - n * np.log(n)),
    }
