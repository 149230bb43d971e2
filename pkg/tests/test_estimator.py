import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cate_minimax.basis import LocalizedFrame, TensorBasisSpec
from cate_minimax.data import Dataset
from cate_minimax.dgp import SmoothScenario
from cate_minimax.errors import ConfigError, DegenerateFitError, SingularMatrixError
from cate_minimax.estimator import (
    EstimatorConfig,
    assemble_first_order,
    assemble_second_order,
    build_second_basis,
    estimate_cate,
    fit_with_nuisance,
    omega_hat,
    projection_oracle,
    second_order_naive,
    solve_guarded,
    tuning_rule,
)
from cate_minimax.nuisance import KnownDensityMeasure, NuisanceConfig, NuisanceFit

from conftest import const, random_dataset, uniform_nuisance


def poly_nuisance(frame, rng, parametrization="mu0"):
    c = rng.uniform(-0.3, 0.3, 3)
    return uniform_nuisance(
        frame,
        lambda x: 0.5 + 0.3 * np.sin(3 * np.atleast_2d(x)[:, 0] + c[0]),
        lambda x: c[1] + c[2] * np.atleast_2d(x).sum(axis=1),
        parametrization,
    )


# -- configuration -----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        EstimatorConfig(x0=(0.5,), h=0.2, gamma=1.0, k=5, b_degree=1)  # not divisible by 2
    with pytest.raises(ConfigError):
        EstimatorConfig(x0=(0.5, 0.5), h=0.2, gamma=1.0, k=8)  # 8 is not a square
    with pytest.raises(ConfigError):
        EstimatorConfig(x0=(0.5,), h=0.2, gamma=1.0, k=5, basis="legendre", parametrization="tau")
    with pytest.raises(ConfigError):
        EstimatorConfig(x0=(0.5, 0.5), h=0.2, gamma=1.0, k=5, basis="legendre")
    cfg = EstimatorConfig(x0=(0.5, 0.5), h=0.2, gamma=2.5, k=6, basis="legendre")
    assert cfg.q == 6 and build_second_basis(cfg).q == 6


# -- Omega ---------------------------------------------------------------------------


def test_omega_identity_for_uniform_legendre():
    frame = LocalizedFrame([0.5, 0.5], 0.3)
    cov = KnownDensityMeasure(frame, const(1.0))
    om = omega_hat(cov, TensorBasisSpec(2, 3))
    np.testing.assert_allclose(om.matrix, np.eye(10), atol=1e-12)
    np.testing.assert_allclose(om.inverse, np.eye(10), atol=1e-12)


def test_omega_block_diagonal_for_partition():
    cfg = EstimatorConfig(x0=(0.5, 0.5), h=0.3, gamma=1.0, k=27, b_degree=1)
    cov = KnownDensityMeasure(cfg.frame, const(1.6))
    om = omega_hat(cov, build_second_basis(cfg))
    assert om.blockwise
    np.testing.assert_allclose(om.matrix, 1.6 * np.eye(27), atol=1e-12)
    assert om.eig_min == pytest.approx(1.6) and om.eig_max == pytest.approx(1.6)


def test_omega_inverse_perturbation_bound():
    frame = LocalizedFrame([0.5], 0.4)
    basis = TensorBasisSpec(1, 5)
    delta = 0.2
    bumpy = KnownDensityMeasure(frame, lambda x: 1 + delta * np.cos(40 * np.atleast_2d(x)[:, 0]))
    om = omega_hat(bumpy, basis, order=40)
    gap = np.linalg.norm(om.inverse - np.eye(6), 2)
    assert 0 < gap <= delta / (1 - delta)


def test_omega_guard():
    frame = LocalizedFrame([0.5], 0.4)
    half = KnownDensityMeasure(frame, lambda x: (np.atleast_2d(x)[:, 0] < 0.5).astype(float), ((0.5,),))
    cfg = EstimatorConfig(x0=(0.5,), h=0.4, gamma=1.0, k=4)
    with pytest.raises(SingularMatrixError) as err:
        omega_hat(half, build_second_basis(cfg))
    assert err.value.diagnostics["eig_min"] == 0.0


# -- first-order terms ---------------------------------------------------------------


def test_first_order_three_points():
    cfg = EstimatorConfig(x0=(0.5,), h=0.5, gamma=2.0)
    data = Dataset(np.array([[0.4], [0.6], [0.9]]), np.array([1.0, 0.0, 1.0]), np.array([2.0, -1.0, 5.0]))
    pi = lambda x: 0.3 + 0.2 * np.atleast_2d(x)[:, 0]
    mu = lambda x: np.atleast_2d(x)[:, 0] ** 2
    nz = uniform_nuisance(cfg.frame, pi, mu)
    q1, r1 = assemble_first_order(data, nz, cfg)
    eq, er = np.zeros((2, 2)), np.zeros(2)
    for x, a, y in zip(data.x[:, 0], data.a, data.y):
        if abs(x - 0.5) > 0.25:
            continue
        v = 0.5 + (x - 0.5) / 0.5
        rho = np.array([1.0, math.sqrt(3) * (2 * v - 1)])
        p = 0.3 + 0.2 * x
        eq += rho[:, None] * rho[None, :] * 2.0 * (a - p) * a
        er += rho * 2.0 * (a - p) * (y - x**2)
    np.testing.assert_allclose(q1, eq / 3, atol=1e-12)
    np.testing.assert_allclose(r1, er / 3, atol=1e-12)


def test_first_order_zero_outside_window():
    cfg = EstimatorConfig(x0=(0.5,), h=0.2, gamma=1.0)
    data = Dataset(np.array([[0.1], [0.9]]), np.ones(2), np.ones(2))
    q1, r1 = assemble_first_order(data, uniform_nuisance(cfg.frame, const(0.5), const(0.0)), cfg)
    assert np.all(q1 == 0) and np.all(r1 == 0)


def test_first_order_moment_identity(rng):
    c = 1.3
    cfg = EstimatorConfig(x0=(0.5,), h=0.4, gamma=3.0)
    x = rng.random((100, 1))
    a = rng.integers(0, 2, 100).astype(float)
    q1, r1 = assemble_first_order(Dataset(x, a, c * a), uniform_nuisance(cfg.frame, const(0.5), const(0.0)), cfg)
    e0 = np.zeros(cfg.q)
    e0[0] = c
    np.testing.assert_allclose(r1, q1 @ e0, atol=1e-13)


# -- second-order terms --------------------------------------------------------------


def test_second_order_two_points_hand_expanded():
    cfg = EstimatorConfig(x0=(0.5,), h=0.5, gamma=2.0, k=2)
    data = Dataset(np.array([[0.4], [0.7]]), np.array([1.0, 0.0]), np.array([1.5, 0.5]))
    nz = uniform_nuisance(cfg.frame, const(0.4), const(0.25))
    om = omega_hat(nz.covariate, build_second_basis(cfg))
    q2, r2 = assemble_second_order(data, nz, om, cfg)
    v = 0.5 + (data.x[:, 0] - 0.5) / 0.5  # 0.3, 0.9
    rho = np.stack([np.ones(2), math.sqrt(3) * (2 * v - 1)], axis=1)
    b = np.array([[math.sqrt(2), 0.0], [0.0, math.sqrt(2)]])  # cells [0,1/2) and [1/2,1]
    kern = 2.0
    eq, er = np.zeros((2, 2)), np.zeros(2)
    for i, j in ((0, 1), (1, 0)):
        proj = b[i] @ b[j]
        lead = data.a[i] - 0.4
        eq += -np.outer(rho[i], rho[j]) * kern * lead * proj * data.a[j] * kern
        er += -rho[i] * kern * lead * proj * (data.y[j] - 0.25) * kern
    np.testing.assert_allclose(q2, eq / 2, atol=1e-12)
    np.testing.assert_allclose(r2, er / 2, atol=1e-12)
    # different cells: the projection kernel vanishes
    assert np.all(q2 == 0) and np.all(r2 == 0)
    same = Dataset(np.array([[0.6], [0.7]]), data.a, data.y)
    q2s, r2s = assemble_second_order(same, nz, om, cfg)
    v = np.array([0.7, 0.9])
    rho = np.stack([np.ones(2), math.sqrt(3) * (2 * v - 1)], axis=1)
    er = -(rho[0] * 0.6 * 2 * (0.5 - 0.25) + rho[1] * (-0.4) * 2 * (1.5 - 0.25)) * kern * kern
    np.testing.assert_allclose(r2s, er / 2, atol=1e-12)


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 3))
    n = int(rng.integers(2, 41))
    basis = str(rng.choice(["partition", "legendre"]))
    if basis == "legendre":
        m = int(rng.integers(0, 4 if d == 1 else 3))
        k = math.comb(d + m, m)
        b_degree = 0
    else:
        b_degree = int(rng.integers(0, 2))
        local = math.comb(d + b_degree, b_degree)
        cells = int(rng.integers(1, 5 if d == 1 else 3))
        k = cells**d * local
    cfg = EstimatorConfig(
        x0=tuple(rng.uniform(0.35, 0.65, d)),
        h=float(rng.uniform(0.3, 0.7)),
        gamma=float(rng.uniform(0.5, 3.0)),
        k=k,
        basis=basis,
        b_degree=b_degree,
        parametrization=str(rng.choice(["mu0", "eta"])),
        q2_factor=str(rng.choice(["x2", "x1"])),
        block_size=int(rng.integers(1, 8)),
    )
    data = random_dataset(rng, n, d)
    nz = poly_nuisance(cfg.frame, rng, cfg.parametrization)
    return cfg, data, nz


@pytest.mark.parametrize("seed", range(50))
def test_engine_matches_double_loop(seed):
    cfg, data, nz = _random_instance(seed)
    assert cfg.k <= 16 and data.n <= 40
    om = omega_hat(nz.covariate, build_second_basis(cfg))
    fast_q, fast_r = assemble_second_order(data, nz, om, cfg)
    dense_q, dense_r = assemble_second_order(data, nz, om.inverse, cfg)
    slow_q, slow_r = second_order_naive(data, nz, om.inverse, cfg)
    np.testing.assert_allclose(fast_q, slow_q, atol=1e-10, rtol=0)
    np.testing.assert_allclose(fast_r, slow_r, atol=1e-10, rtol=0)
    np.testing.assert_allclose(dense_q, slow_q, atol=1e-10, rtol=0)
    np.testing.assert_allclose(dense_r, slow_r, atol=1e-10, rtol=0)


def test_second_order_zero_outside_window(rng):
    cfg = EstimatorConfig(x0=(0.5,), h=0.1, gamma=1.0, k=4)
    data = Dataset(np.array([[0.1], [0.2], [0.9]]), np.ones(3), np.ones(3))
    nz = uniform_nuisance(cfg.frame, const(0.5), const(0.0))
    q2, r2 = assemble_second_order(data, nz, omega_hat(nz.covariate, build_second_basis(cfg)), cfg)
    assert np.all(q2 == 0) and np.all(r2 == 0)


def test_block_schedule_does_not_change_result(rng):
    base = EstimatorConfig(x0=(0.5,), h=0.5, gamma=2.0, k=4, basis="legendre")
    data = random_dataset(rng, 300)
    nz = poly_nuisance(base.frame, rng)
    inv = omega_hat(nz.covariate, build_second_basis(base)).inverse
    ref = assemble_second_order(data, nz, inv, base)
    for bs in (1, 7, 64, 10_000):
        cfg = EstimatorConfig(x0=(0.5,), h=0.5, gamma=2.0, k=4, basis="legendre", block_size=bs)
        out = assemble_second_order(data, nz, inv, cfg)
        np.testing.assert_allclose(out[0], ref[0], atol=1e-13)


# -- full estimate -------------------------------------------------------------------


@pytest.mark.parametrize("parametrization", ["mu0", "eta"])
@pytest.mark.parametrize("second_order", [True, False])
def test_exact_recovery_constant_effect(rng, parametrization, second_order):
    c = -0.8
    cfg = EstimatorConfig(x0=(0.4,), h=0.3, gamma=2.0, k=9, parametrization=parametrization, second_order=second_order)
    x = rng.random((400, 1))
    a = rng.integers(0, 2, 400).astype(float)
    outcome = const(0.0) if parametrization == "mu0" else const(c / 2)
    nz = uniform_nuisance(cfg.frame, const(0.5), outcome, parametrization)
    fit = fit_with_nuisance(Dataset(x, a, c * a), nz, cfg)
    assert fit.tau_hat == pytest.approx(c, abs=1e-9)
    np.testing.assert_allclose(fit.coefficients, [c, 0.0], atol=1e-9)


@pytest.mark.parametrize("parametrization", ["mu0", "eta"])
def test_exact_recovery_linear_effect_with_x2_factor(rng, parametrization):
    x0, slope = 0.5, 2.0
    tau = lambda x: 1.0 + slope * (np.atleast_2d(x)[:, 0] - x0)
    pi = lambda x: 0.3 + 0.4 * np.atleast_2d(x)[:, 0]
    mu0 = lambda x: np.sin(np.atleast_2d(x)[:, 0])
    eta = lambda x: mu0(x) + pi(x) * tau(x)
    x = rng.random((500, 1))
    a = (rng.random(500) < pi(x)).astype(float)
    y = mu0(x) + a * tau(x)
    data = Dataset(x, a, y)
    cfg = EstimatorConfig(x0=(x0,), h=0.4, gamma=2.0, k=8, parametrization=parametrization)
    nz = uniform_nuisance(cfg.frame, pi, mu0 if parametrization == "mu0" else eta, parametrization)
    assert fit_with_nuisance(data, nz, cfg).tau_hat == pytest.approx(1.0, abs=1e-9)


def test_window_smaller_than_q_raises(rng):
    cfg = EstimatorConfig(x0=(0.5,), h=0.05, gamma=4.0, k=1)
    data = Dataset(np.array([[0.5], [0.51], [0.9], [0.1]]), np.array([1.0, 0.0, 1.0, 0.0]), np.zeros(4))
    with pytest.raises(SingularMatrixError):
        fit_with_nuisance(data, uniform_nuisance(cfg.frame, const(0.5), const(0.0)), cfg)
    empty = Dataset(np.array([[0.1], [0.9]]), np.ones(2), np.ones(2))
    with pytest.raises(DegenerateFitError):
        fit_with_nuisance(empty, uniform_nuisance(cfg.frame, const(0.5), const(0.0)), cfg)


def test_q_guard_rejects_rank_deficiency():
    with pytest.raises(SingularMatrixError) as err:
        solve_guarded(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2), 1e-8)
    assert "sigma_min" in err.value.diagnostics
    sol, sv = solve_guarded(np.diag([2.0, 4.0]), np.array([2.0, 2.0]), 1e-8)
    np.testing.assert_allclose(sol, [1.0, 0.5])


def test_fit_result_serialization_and_recompute(rng):
    truth = SmoothScenario(alpha=1.5, beta=1.5, gamma=2.0)
    data = truth.sample(2000, rng)
    cfg = EstimatorConfig(x0=(0.5,), h=0.3, gamma=2.0, k=8)
    fit = estimate_cate(data, NuisanceConfig(pi_smoothness=1.5, outcome_smoothness=1.5), cfg, seed=4, truth=truth)
    assert fit.recompute() == pytest.approx(fit.tau_hat, rel=1e-12)
    payload = json.loads(fit.to_json())
    assert payload["tau_hat"] == fit.tau_hat
    assert payload["config"]["k"] == 8 and payload["n_estimation"] == 1000
    assert payload["pair_count"] == fit.n_window * (fit.n_window - 1)


def test_heavy_noise_constant_effect_monte_carlo():
    truth = SmoothScenario(alpha=1.0, beta=1.0, gamma=1.0, tau_amp=0.0, tau_base=0.7, noise=3.0)
    cfg = EstimatorConfig(x0=(0.5,), h=0.4, gamma=1.0, k=4)
    known = NuisanceConfig(mode="known")
    est = []
    for r in range(300):
        data = truth.sample(2000, np.random.default_rng(1000 + r))
        est.append(estimate_cate(data, known, cfg, truth=truth).tau_hat)
    est = np.asarray(est)
    assert abs(est.mean() - 0.7) <= 3 * est.std(ddof=1) / math.sqrt(est.size)


# -- projection oracle -----------------------------------------------------------------


def test_projection_constant():
    res = projection_oracle(const(0.3), const(2.5), const(1.0), LocalizedFrame([0.5], 0.2), 1.0)
    assert res.tau_h == pytest.approx(2.5, abs=1e-13)
    np.testing.assert_allclose(res.S, 0.0, atol=1e-13)


@pytest.mark.parametrize("seed", range(20))
def test_projection_reproduces_quadratics(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, 4)
    pi = lambda x: 0.5 + 0.35 * np.sin(5 * np.atleast_2d(x)[:, 0] + c[0])
    dens = lambda x: 1.0 + 0.5 * np.cos(7 * np.atleast_2d(x)[:, 0] + c[1])
    tau = lambda x: 1 + 2 * np.atleast_2d(x)[:, 0] - np.atleast_2d(x)[:, 0] ** 2
    x0 = float(rng.uniform(0.3, 0.7))
    res = projection_oracle(pi, tau, dens, LocalizedFrame([x0], 0.3), gamma=2.5)
    assert res.tau_h == pytest.approx(1 + 2 * x0 - x0**2, abs=1e-8)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5, 2.5])
def test_projection_bias_order(gamma):
    x0 = 0.5
    tau = lambda x: np.abs(np.atleast_2d(x)[:, 0] - x0) ** gamma
    pi = lambda x: 0.5 + 0.2 * np.atleast_2d(x)[:, 0]
    gaps = []
    for h in (0.2, 0.1):
        res = projection_oracle(pi, tau, const(1.0), LocalizedFrame([x0], h), gamma, breakpoints_x=((x0,),), order=40)
        gaps.append(abs(res.tau_h))
    assert math.log2(gaps[0] / gaps[1]) == pytest.approx(gamma, abs=0.2)


# -- tuning ------------------------------------------------------------------------------


def test_tuning_examples():
    low = tuning_rule(4096, 0.1, 0.1, 1.0, 1)
    assert low.h == pytest.approx(0.125, rel=1e-12) and low.k == 4096
    high = tuning_rule(4096, 2.0, 2.0, 1.0, 1)
    assert high.h == pytest.approx(0.0625, rel=1e-12) and high.k == 256
    lin = tuning_rule(4096, 2.0, 2.0, 1.0, 1, b_degree=1)
    assert lin.k % 2 == 0


@settings(max_examples=50, deadline=None)
@given(s=st.floats(0.05, 0.16), gamma=st.floats(0.5, 3), d=st.integers(1, 3))
def test_tuning_balances_bias_and_variance(s, gamma, d):
    """In the low regime all three error terms share one power of n."""
    expo = {}
    for n in (1e6, 1e8):
        t = tuning_rule(n, s, s, gamma, d, c_h=1e-3)
        hr, kr = t.h_unclipped, t.k_real
        terms = [hr**gamma, (hr / kr ** (1 / d)) ** (2 * s), (n * hr**d) ** -0.5 * (1 + kr / (n * hr**d)) ** 0.5]
        expo[n] = np.log(terms)
    slopes = (expo[1e8] - expo[1e6]) / math.log(100)
    if tuning_rule(1e6, s, s, gamma, d).regime == "low_smoothness":
        assert np.ptp(slopes) < 0.02
