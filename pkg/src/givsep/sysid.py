"""Impulse-response estimation with kernel regularization.

Ties the kernel representations and the fast algebra together: simulate
discrete-time LTI data, evaluate the hyper-parameter selection criteria
in O(N p^2), optimize them, and read out the estimated impulse response
and its fit.

Time convention: measurements live on the integer grid t = 1..N, inputs
start at t = 0 and vanish for t < 0, and impulse responses are strictly
proper (g(0) = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.optimize
import scipy.signal

from . import fastalg, kernels
from .errors import AllEvaluationsFailed, DegenerateReference, NotPositiveDefinite
from .kernels import DT, InputSignal, KernelSpec
from .reps import DiagVec, TimeGrid

__all__ = [
    "LTISystem",
    "IdentProblem",
    "CriterionReport",
    "CRITERIA",
    "simulate",
    "evaluate_criteria",
    "report_from_solution",
    "optimize_hyperparams",
    "estimate_impulse",
    "model_fit",
    "generate_random_system",
]

#: criterion names accepted by the optimizer
CRITERIA = ("eb", "sure", "gcv", "gml")


@dataclass(frozen=True)
class LTISystem:
    """A stable, strictly proper discrete-time system.

    ``g0`` is the impulse response sampled at lags 0..len(g0)-1 (so
    ``g0[0] == 0``); ``b`` and ``a`` are the transfer-function
    coefficients in negative powers of z that generated it, kept so the
    response can be extended to any horizon.  ``poles`` and ``zeros``
    record where the realization came from.
    """

    g0: np.ndarray
    b: np.ndarray
    a: np.ndarray
    poles: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    zeros: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def __post_init__(self) -> None:
        g0 = np.ascontiguousarray(self.g0, dtype=np.float64)
        b = np.ascontiguousarray(self.b, dtype=np.float64)
        a = np.ascontiguousarray(self.a, dtype=np.float64)
        poles = np.asarray(self.poles, dtype=complex)
        zeros = np.asarray(self.zeros, dtype=complex)
        if poles.size and np.max(np.abs(poles)) >= 1.0:
            raise ValueError("system is unstable: a pole has modulus >= 1")
        for name, arr in (("g0", g0), ("b", b), ("a", a)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        object.__setattr__(self, "g0", g0)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "zeros", zeros)

    @classmethod
    def from_zpk(cls, zeros, poles, gain: float = 1.0, n_samples: int = 1000) -> "LTISystem":
        """Build the system ``gain * prod(z - zeros) / prod(z - poles)``.

        The numerator degree must stay below the denominator degree so
        the response is strictly proper.
        """
        zeros = np.atleast_1d(np.asarray(zeros, dtype=complex))
        poles = np.atleast_1d(np.asarray(poles, dtype=complex))
        if zeros.size >= poles.size:
            raise ValueError("need fewer zeros than poles for a strictly proper system")
        num = np.real(np.poly(zeros)) * gain if zeros.size else np.array([gain])
        den = np.real(np.poly(poles))
        # pad with the z^{-1} delay that makes deg(num) < deg(den) explicit
        b = np.concatenate([np.zeros(poles.size - zeros.size), num])
        imp = np.zeros(n_samples)
        imp[0] = 1.0
        g0 = scipy.signal.lfilter(b, den, imp)
        return cls(g0=g0, b=b, a=den, poles=poles, zeros=zeros)

    @property
    def order(self) -> int:
        return len(self.a) - 1

    def impulse(self, n: int) -> np.ndarray:
        """Impulse response at lags 0..n-1 (extends beyond stored g0)."""
        if n <= len(self.g0):
            return self.g0[:n].copy()
        imp = np.zeros(n)
        imp[0] = 1.0
        return scipy.signal.lfilter(self.b, self.a, imp)


@dataclass(frozen=True)
class IdentProblem:
    """One identification instance: data, grid, input model, prior, and shift."""

    y: np.ndarray
    grid: TimeGrid
    input: InputSignal
    kernel: KernelSpec
    gamma: float

    def __post_init__(self) -> None:
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if y.shape != (self.grid.n,):
            raise ValueError(f"y must have shape ({self.grid.n},), got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class CriterionReport:
    """All criterion values and the shared intermediates of one evaluation."""

    eb: float
    sure: float
    gcv: float
    gml: float
    alpha_hat: np.ndarray
    y_hat: np.ndarray
    logdet: float
    tr_minv: float
    y_minv_y: float

    def value(self, criterion: str) -> float:
        if criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
        return getattr(self, criterion)


def report_from_solution(y, alpha_hat, y_hat, logdet, tr_minv, gamma) -> CriterionReport:
    """Assemble the four criteria from the primitive quantities.

    Shared by every evaluation route (fast, generator-based, dense) so
    the criteria formulas exist in exactly one place.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    y_minv_y = float(y @ alpha_hat)
    resid2 = float(np.sum((y - y_hat) ** 2))
    eb = y_minv_y + logdet
    sure = resid2 + 2.0 * gamma * (n - gamma * tr_minv)
    with np.errstate(divide="ignore", invalid="ignore"):
        gcv = n * n * resid2 / (gamma * tr_minv) ** 2
        gml = n * np.log(y_minv_y) + logdet - n * np.log(n)
    return CriterionReport(
        eb=float(eb),
        sure=float(sure),
        gcv=float(gcv),
        gml=float(gml),
        alpha_hat=np.asarray(alpha_hat, dtype=np.float64),
        y_hat=np.asarray(y_hat, dtype=np.float64),
        logdet=float(logdet),
        tr_minv=float(tr_minv),
        y_minv_y=y_minv_y,
    )


def output_kernel_rep(kernel: KernelSpec, signal: InputSignal, grid: TimeGrid):
    """Givens-vector form of the kernel seen through the input.

    Unit impulse passes the kernel through unchanged; an exponential
    input convolves it on both sides.
    """
    if signal.kind == "impulse":
        return kernels.kernel_gvr(kernel, grid)
    return kernels.output_kernel_gvr(kernel, signal, grid)


def evaluate_criteria(prob: IdentProblem) -> CriterionReport:
    """Evaluate EB/SURE/GCV/GML for one hyper-parameter point in O(N p^2)."""
    psi = output_kernel_rep(prob.kernel, prob.input, prob.grid)
    d = DiagVec.constant(prob.grid.n, prob.gamma)
    try:
        chol = fastalg.cholesky(psi, d)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            exc.index,
            exc.radicand,
            context=f"kernel={prob.kernel.family} rho={prob.kernel.rho:g}"
            + (f" lam={prob.kernel.lam:g}" if prob.kernel.lam is not None else "")
            + f" gamma={prob.gamma:g}",
        ) from exc
    alpha = fastalg.solve_upper(chol, fastalg.solve_lower(chol, prob.y))
    y_hat = fastalg.matvec(psi, alpha)
    return report_from_solution(
        prob.y,
        alpha,
        y_hat,
        fastalg.logdet(chol),
        fastalg.trace_form(chol, None, 1.0),
        prob.gamma,
    )


def simulate(system: LTISystem, input: InputSignal, n: int, snr: float, seed) -> np.ndarray:
    """Measurements y(t) = (g*u)(t) + noise on t = 1..n.

    The noise is iid Gaussian with variance ``var(noise-free y) / snr``.
    Deterministic for a fixed seed.
    """
    if input.domain != DT:
        raise ValueError("only discrete-time data simulation is supported")
    if not snr > 0.0:
        raise ValueError(f"snr must be positive, got {snr}")
    g = system.impulse(n + 1)
    u = _input_samples(input, n + 1)
    y0 = scipy.signal.fftconvolve(g, u)[1 : n + 1]
    sigma = np.sqrt(np.var(y0) / snr)
    rng = np.random.default_rng(seed)
    return y0 + sigma * rng.standard_normal(n)


def _input_samples(input: InputSignal, n: int) -> np.ndarray:
    """u(t) on t = 0..n-1."""
    if input.kind == "impulse":
        u = np.zeros(n)
        u[0] = 1.0
        return u
    return np.exp(-input.alpha * np.arange(n))


def noise_free_output(system: LTISystem, input: InputSignal, n: int) -> np.ndarray:
    """(g*u)(t) on t = 1..n, without measurement noise."""
    g = system.impulse(n + 1)
    u = _input_samples(input, n + 1)
    return scipy.signal.fftconvolve(g, u)[1 : n + 1]


def estimate_impulse(prob: IdentProblem, alpha_hat) -> np.ndarray:
    """Estimated impulse response on the measurement grid.

    The representer form is ``ghat(t) = sum_i alpha_i (K(t,.) * u)(t_i)``;
    swapping the sums turns it into one kernel product
    ``ghat(t) = sum_s K(t, s) beta(s)`` against
    ``beta(s) = sum_i alpha_i u(t_i - s)``, which is a single O(N p)
    sweep on the grid extended with s = 0.
    """
    alpha = np.ascontiguousarray(alpha_hat, dtype=np.float64)
    n = prob.grid.n
    if alpha.shape != (n,):
        raise ValueError(f"alpha_hat must have shape ({n},), got {alpha.shape}")
    if prob.input.kind == "impulse":
        a = kernels.kernel_gvr(prob.kernel, prob.grid)
        return fastalg.matvec(a, alpha)
    if prob.input.domain != DT:
        raise ValueError("impulse estimation for continuous-time inputs is not supported")
    t = prob.grid.t
    if not np.allclose(t, np.arange(1, n + 1), rtol=0.0, atol=1e-9):
        raise ValueError("exponential-input estimation requires the integer grid t = 1..N")
    # beta on s = 0..N via the damped backward recursion
    decay = np.exp(-prob.input.alpha)
    beta = np.zeros(n + 1)
    acc = 0.0
    for s in range(n, -1, -1):
        acc = (alpha[s - 1] if s >= 1 else 0.0) + decay * acc
        beta[s] = acc
    grid0 = TimeGrid(t=np.arange(n + 1, dtype=np.float64))
    a = kernels.kernel_gvr(prob.kernel, grid0)
    return fastalg.matvec(a, beta)[1:]


def model_fit(g0, ghat) -> float:
    """Fit score 100*(1 - sqrt(sum|g0-ghat| / sum|g0-mean(g0)|)).

    100 means exact recovery; 0 matches the constant-mean predictor.

    Raises
    ------
    DegenerateReference
        If the reference response is constant (zero denominator).
    """
    g0 = np.asarray(g0, dtype=np.float64)
    ghat = np.asarray(ghat, dtype=np.float64)
    if g0.shape != ghat.shape or g0.ndim != 1:
        raise ValueError("g0 and ghat must be vectors of equal length")
    denom = float(np.sum(np.abs(g0 - np.mean(g0))))
    if denom == 0.0:
        raise DegenerateReference("reference impulse response is constant")
    ratio = float(np.sum(np.abs(g0 - ghat))) / denom
    return 100.0 * (1.0 - np.sqrt(ratio))


def _eta_specs(family: str, etas: np.ndarray) -> list[KernelSpec]:
    if family == "dc":
        return [KernelSpec.dc(lam=lam, rho=rho) for lam in etas for rho in etas]
    if family == "tc":
        return [KernelSpec.tc(rho=rho) for rho in etas]
    if family == "ss":
        return [KernelSpec.ss(rho=rho) for rho in etas]
    raise ValueError(f"unknown kernel family {family!r}")


def _box_sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _box_logit(frac: float) -> float:
    frac = min(max(frac, 1e-12), 1.0 - 1e-12)
    return float(np.log(frac / (1.0 - frac)))


def _spec_from_vector(family, z, eta_range, gamma_range):
    """Map unconstrained simplex coordinates into the search box."""
    lo, hi = eta_range
    vals = lo + (hi - lo) * _box_sigmoid(np.asarray(z[:-1], dtype=np.float64))
    g_lo, g_hi = np.log(gamma_range[0]), np.log(gamma_range[1])
    gamma = float(np.exp(g_lo + (g_hi - g_lo) * _box_sigmoid(z[-1])))
    if family == "dc":
        return KernelSpec.dc(lam=vals[0], rho=vals[1]), gamma
    if family == "tc":
        return KernelSpec.tc(rho=vals[0]), gamma
    return KernelSpec.ss(rho=vals[0]), gamma


def _vector_from_spec(spec, gamma, eta_range, gamma_range):
    lo, hi = eta_range
    if spec.family == "dc":
        head = [_box_logit((spec.lam - lo) / (hi - lo)),
                _box_logit((spec.rho - lo) / (hi - lo))]
    else:
        head = [_box_logit((spec.rho - lo) / (hi - lo))]
    g_lo, g_hi = np.log(gamma_range[0]), np.log(gamma_range[1])
    return np.array(head + [_box_logit((np.log(gamma) - g_lo) / (g_hi - g_lo))])


def optimize_hyperparams(
    y,
    grid: TimeGrid,
    input: InputSignal,
    kernel_family: str,
    criterion: str = "gcv",
    *,
    n_eta: int = 8,
    eta_range: tuple[float, float] = (0.05, 0.95),
    n_gamma: int = 8,
    gamma_range: tuple[float, float] = (1e-8, 1.0),
    evaluate: Callable[[KernelSpec, float], CriterionReport] | None = None,
):
    """Pick hyper-parameters by grid search plus a local simplex descent.

    The grid is linear in the kernel parameters and logarithmic in the
    regularization; the best grid point seeds a Nelder-Mead run in
    transformed coordinates (scaled sigmoids, so the simplex cannot
    leave the declared ranges), converging to 1e-6 in the objective.
    Fully deterministic.

    Parameters
    ----------
    evaluate : callable, optional
        Alternative evaluation route ``(KernelSpec, gamma) -> CriterionReport``;
        defaults to the fast Givens-vector pipeline.  Used to compare
        methods that differ only in how they compute the criterion.

    Returns
    -------
    (KernelSpec, float, CriterionReport)
        The optimal kernel, regularization, and its evaluation.

    Raises
    ------
    AllEvaluationsFailed
        If every grid point raises.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    y = np.ascontiguousarray(y, dtype=np.float64)
    if evaluate is None:
        def evaluate(spec, gamma):
            return evaluate_criteria(
                IdentProblem(y=y, grid=grid, input=input, kernel=spec, gamma=gamma)
            )

    etas = np.linspace(eta_range[0], eta_range[1], n_eta)
    gammas = np.geomspace(gamma_range[0], gamma_range[1], n_gamma)
    best = None
    for spec in _eta_specs(kernel_family, etas):
        for gamma in gammas:
            try:
                rep = evaluate(spec, float(gamma))
            except Exception:
                continue
            val = rep.value(criterion)
            if not np.isfinite(val):
                continue
            if best is None or val < best[0]:
                best = (val, spec, float(gamma))
    if best is None:
        raise AllEvaluationsFailed(
            f"no hyper-parameter grid point could be evaluated for criterion {criterion!r}"
        )

    def objective(z):
        try:
            spec, gamma = _spec_from_vector(kernel_family, z, eta_range, gamma_range)
            rep = evaluate(spec, gamma)
        except Exception:
            return np.inf
        val = rep.value(criterion)
        return val if np.isfinite(val) else np.inf

    x0 = _vector_from_spec(best[1], best[2], eta_range, gamma_range)
    res = scipy.optimize.minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"fatol": 1e-6, "xatol": 1e-6, "maxiter": 2000},
    )
    if np.isfinite(res.fun) and res.fun <= best[0]:
        spec, gamma = _spec_from_vector(kernel_family, res.x, eta_range, gamma_range)
    else:
        spec, gamma = best[1], best[2]
    return spec, gamma, evaluate(spec, gamma)


def generate_random_system(order: int, pole_modulus_range, seed) -> LTISystem:
    """Random stable strictly proper system of the given order.

    Poles come in conjugate pairs (plus one real pole when the order is
    odd) with moduli uniform in the given range and angles uniform in
    (0, pi); the order-1 zeros are drawn the same way inside the unit
    disk.  The gain is set so the impulse response has unit 2-norm over
    the first 1000 lags.  Deterministic for a fixed seed.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    lo, hi = float(pole_modulus_range[0]), float(pole_modulus_range[1])
    if not (0.0 <= lo <= hi < 1.0):
        raise ValueError("pole moduli must satisfy 0 <= lo <= hi < 1")
    rng = np.random.default_rng(seed)

    def draw(count, lo_m, hi_m):
        pairs = count // 2
        vals = []
        mods = rng.uniform(lo_m, hi_m, size=pairs)
        angs = rng.uniform(0.0, np.pi, size=pairs)
        for m, t in zip(mods, angs):
            root = m * np.exp(1j * t)
            vals.extend([root, np.conj(root)])
        if count % 2:
            vals.append(complex(rng.uniform(lo_m, hi_m) * rng.choice([-1.0, 1.0])))
        return np.array(vals, dtype=complex)

    poles = draw(order, lo, hi)
    zeros = draw(order - 1, 0.0, 1.0)
    sys = LTISystem.from_zpk(zeros, poles, gain=1.0)
    norm = float(np.linalg.norm(sys.g0))
    if norm == 0.0:
        raise ValueError("degenerate draw: zero impulse response")
    return LTISystem(
        g0=sys.g0 / norm,
        b=sys.b / norm,
        a=sys.a,
        poles=poles,
        zeros=zeros,
    )
