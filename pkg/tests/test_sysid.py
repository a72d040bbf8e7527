"""Identification layer: systems, data generation, criteria, optimization."""

import math

import numpy as np
import pytest

from givsep import kernels, oracle, sysid
from givsep.errors import DegenerateReference
from givsep.kernels import InputSignal, KernelSpec
from givsep.reps import TimeGrid
from givsep.sysid import IdentProblem, LTISystem
from helpers import dense_report, psi_double_sum_dt


def test_from_zpk_impulse_responses():
    # H(z) = 1/(z^2 - 1/4): relative degree 2, g(2k) = 0.25^(k-1)
    sys0 = LTISystem.from_zpk([], [0.5, -0.5])
    assert np.allclose(
        sys0.impulse(8), [0.0, 0.0, 1.0, 0.0, 0.25, 0.0, 0.0625, 0.0], atol=1e-14
    )
    # H(z) = z/(z^2 - 1/4): odd lags only
    sys1 = LTISystem.from_zpk([0.0], [0.5, -0.5])
    assert np.allclose(
        sys1.impulse(8), [0.0, 1.0, 0.0, 0.25, 0.0, 0.0625, 0.0, 0.015625], atol=1e-14
    )
    assert sys0.order == 2 and sys1.order == 2


def test_generate_random_system_contract():
    for k in range(5):
        s = sysid.generate_random_system(10, (0.1, 0.9), seed=100 + k)
        g = s.impulse(40)
        assert g[0] == 0.0  # strictly proper
        assert np.all(np.isfinite(g))
        assert s.order == 10 and len(s.poles) == 10
        mods = np.abs(s.poles)
        assert np.all((mods >= 0.1 - 1e-12) & (mods <= 0.9 + 1e-12))
        # normalized to unit impulse-response energy
        assert np.linalg.norm(s.impulse(1000)) == pytest.approx(1.0, abs=1e-6)

    a = sysid.generate_random_system(10, (0.1, 0.9), seed=42)
    b = sysid.generate_random_system(10, (0.1, 0.9), seed=42)
    assert np.array_equal(a.b, b.b) and np.array_equal(a.a, b.a)


def test_model_fit():
    f = sysid.model_fit(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 4.0]))
    assert f == pytest.approx(29.289321881345253, abs=1e-12)
    assert sysid.model_fit(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 100.0
    with pytest.raises(DegenerateReference):
        sysid.model_fit(np.array([3.0, 3.0, 3.0]), np.array([1.0, 2.0, 3.0]))


def test_simulate_noise_model():
    sys1 = LTISystem.from_zpk([0.0], [0.5, -0.5])
    y = sysid.simulate(sys1, InputSignal.unit_impulse(), 50, snr=10.0, seed=3)
    assert np.array_equal(y, sysid.simulate(sys1, InputSignal.unit_impulse(), 50, snr=10.0, seed=3))

    y0 = sysid.noise_free_output(sys1, InputSignal.unit_impulse(), 50)
    assert np.allclose(y0, sys1.impulse(51)[1:], atol=1e-15)

    # noise = sqrt(var(y0)/snr) * standard normal stream of the given seed
    sigma = np.sqrt(np.var(y0) / 10.0)
    noise = sigma * np.random.default_rng(3).standard_normal(50)
    assert np.allclose(y, y0 + noise, atol=1e-16)


def test_simulate_exponential_input_is_a_convolution():
    sys1 = LTISystem.from_zpk([0.0], [0.5, -0.5])
    n = 20
    u = np.exp(-0.3 * np.arange(n + 1))
    g = sys1.impulse(n + 1)
    brute = np.array([sum(g[k] * u[t - k] for k in range(t + 1)) for t in range(1, n + 1)])
    y0 = sysid.noise_free_output(sys1, InputSignal.exponential(0.3), n)
    assert np.allclose(y0, brute, rtol=1e-12)


@pytest.mark.parametrize("fam", ["dc", "tc", "ss"])
def test_evaluate_criteria_matches_dense(fam):
    rng = np.random.default_rng(hash(fam) % 2**31)
    worst = 0.0
    for trial in range(12):
        n = int(rng.integers(2, 60))
        grid = TimeGrid.regular(n)
        if fam == "dc":
            spec = KernelSpec.dc(lam=rng.uniform(0.3, 0.95), rho=rng.uniform(0.3, 0.95))
        elif fam == "tc":
            spec = KernelSpec.tc(rho=rng.uniform(0.3, 0.9))
        else:
            spec = KernelSpec.ss(rho=rng.uniform(0.3, 0.9))
        gamma = 10.0 ** rng.uniform(-4, 0)
        y = rng.standard_normal(n)

        if trial % 4 == 3 and fam != "ss":
            signal = InputSignal.exponential(rng.uniform(0.2, 1.0))
            dense = kernels.output_kernel_dense(spec, signal, grid)
        else:
            signal = InputSignal.unit_impulse()
            dense = kernels.kernel_dense(spec, grid)

        prob = IdentProblem(y=y, grid=grid, input=signal, kernel=spec, gamma=gamma)
        rpt = sysid.evaluate_criteria(prob)
        orc = oracle.dense_criteria(dense, y, gamma)
        for crit in ("eb", "sure", "gcv", "gml"):
            worst = max(worst, abs(rpt.value(crit) - orc.value(crit)) / max(abs(orc.value(crit)), 1e-30))
        worst = max(worst, abs(rpt.tr_minv - orc.tr_minv) / abs(orc.tr_minv))

        # the naive inv()-based formulas lose digits with the conditioning,
        # so they only gate at a looser tolerance
        ref = dense_report(dense, y, gamma)
        for crit in ("eb", "sure", "gcv", "gml"):
            naive = abs(rpt.value(crit) - ref[crit]) / max(abs(ref[crit]), 1e-30)
            assert naive <= 1e-6, (fam, trial, crit, naive)
    assert worst <= 1e-8


def test_single_sample_gcv_is_squared_observation():
    grid = TimeGrid(t=np.array([1.0]))
    for gamma in (1e-6, 1e-2, 1.0):
        prob = IdentProblem(
            y=np.array([2.5]),
            grid=grid,
            input=InputSignal.unit_impulse(),
            kernel=KernelSpec.tc(0.5),
            gamma=gamma,
        )
        assert sysid.evaluate_criteria(prob).gcv == pytest.approx(6.25, abs=1e-9)


def test_estimate_impulse_unit_impulse_input():
    n = 60
    grid = TimeGrid.regular(n)
    spec = KernelSpec.dc(lam=0.8, rho=0.5)
    alpha_hat = np.random.default_rng(5).standard_normal(n)
    prob = IdentProblem(
        y=np.zeros(n), grid=grid, input=InputSignal.unit_impulse(), kernel=spec, gamma=1e-3
    )
    ghat = sysid.estimate_impulse(prob, alpha_hat)
    assert np.allclose(ghat, kernels.kernel_dense(spec, grid) @ alpha_hat, rtol=1e-10)


def test_estimate_impulse_exponential_input():
    # ghat(t) = sum_i alpha_i abar_i(t) with abar_i(t) = sum_s K(t,s) u(t_i - s)
    n = 40
    grid = TimeGrid.regular(n)
    lam, rho, a_in = 0.8, 0.5, 0.4
    spec = KernelSpec.dc(lam=lam, rho=rho)
    alpha_hat = np.random.default_rng(5).standard_normal(n)
    prob = IdentProblem(
        y=np.zeros(n), grid=grid, input=InputSignal.exponential(a_in), kernel=spec, gamma=1e-3
    )
    ghat = sysid.estimate_impulse(prob, alpha_hat)

    kfull = np.array(
        [
            [lam ** (t + s) * rho ** abs(t - s) for s in range(n + 1)]
            for t in range(n + 1)
        ]
    )
    ref = np.zeros(n)
    for t in range(1, n + 1):
        acc = 0.0
        for i in range(n):
            ti = i + 1
            acc += alpha_hat[i] * sum(
                kfull[t, s] * math.exp(-a_in * (ti - s)) for s in range(ti + 1)
            )
        ref[t - 1] = acc
    assert np.max(np.abs(ghat - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_optimize_hyperparams_deterministic_and_bounded():
    system = sysid.generate_random_system(10, (0.1, 0.9), seed=1)
    y = sysid.simulate(system, InputSignal.unit_impulse(), 80, snr=10.0, seed=2)
    grid = TimeGrid.regular(80)
    out1 = sysid.optimize_hyperparams(
        y, grid, InputSignal.unit_impulse(), "dc", criterion="gcv", n_eta=4, n_gamma=4
    )
    out2 = sysid.optimize_hyperparams(
        y, grid, InputSignal.unit_impulse(), "dc", criterion="gcv", n_eta=4, n_gamma=4
    )
    spec, gamma, rpt = out1
    assert out2[0] == spec and out2[1] == gamma and out2[2].gcv == rpt.gcv

    # optimum stays inside the declared boxes
    assert 0.05 <= spec.lam <= 0.95 and 0.05 <= spec.rho <= 0.95
    assert 1e-8 <= gamma <= 1.0
    assert np.isfinite(rpt.gcv)

    # and is at least as good as an independent coarse scan
    best = np.inf
    for lam in np.linspace(0.05, 0.95, 4):
        for rho in np.linspace(0.05, 0.95, 4):
            for gam in np.geomspace(1e-8, 1.0, 4):
                prob = IdentProblem(
                    y=y,
                    grid=grid,
                    input=InputSignal.unit_impulse(),
                    kernel=KernelSpec.dc(lam=lam, rho=rho),
                    gamma=gam,
                )
                v = sysid.evaluate_criteria(prob).gcv
                if np.isfinite(v):
                    best = min(best, v)
    assert rpt.gcv <= best + 1e-9


def test_optimize_unknown_criterion_rejected():
    y = np.ones(5)
    grid = TimeGrid.regular(5)
    with pytest.raises(ValueError):
        sysid.optimize_hyperparams(y, grid, InputSignal.unit_impulse(), "dc", criterion="rmse")
    with pytest.raises(ValueError):
        sysid.optimize_hyperparams(y, grid, InputSignal.unit_impulse(), "bogus")


def test_output_kernel_rep_picks_the_right_structure():
    grid = TimeGrid.regular(6)
    spec = KernelSpec.dc(lam=0.6, rho=0.6)
    imp = sysid.output_kernel_rep(spec, InputSignal.unit_impulse(), grid)
    assert imp.p == 1
    exp = sysid.output_kernel_rep(spec, InputSignal.exponential(0.5), grid)
    assert exp.p == 2

    from givsep.reps import gvr_to_dense

    ref = np.array(
        [[psi_double_sum_dt(0.6, 0.6, 0.5, ti, tj) for tj in grid.t] for ti in grid.t]
    )
    assert np.max(np.abs(gvr_to_dense(exp) - ref) / np.abs(ref)) <= 1e-12
