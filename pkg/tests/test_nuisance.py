import numpy as np
import pytest

from cate_minimax.basis import LocalizedFrame, grid_quadrature
from cate_minimax.construction import LowerBoundConfig, flat_top_bump, sample
from cate_minimax.data import Dataset
from cate_minimax.dgp import ConstructionScenario, SmoothScenario
from cate_minimax.errors import ConfigError, DegenerateFitError
from cate_minimax.nuisance import (
    NuisanceConfig,
    NuisanceFit,
    fit_covariate_distribution,
    fit_local_polynomial,
    fit_nuisances,
    known_nuisances,
    nuisance_error_probe,
    split,
)


def test_split_sizes_and_determinism():
    plan = split(10, 0.5, seed=3)
    assert len(plan.train) == 5 and len(plan.estimation) == 5
    assert not set(plan.train) & set(plan.estimation)
    assert set(plan.train) | set(plan.estimation) == set(range(10))
    again = split(10, 0.5, seed=3)
    np.testing.assert_array_equal(plan.train, again.train)
    with pytest.raises(ConfigError):
        split(10, 1.0)


def test_constant_response_reproduced(rng):
    x = rng.random((300, 2))
    data = Dataset(x, np.ones(300), np.full(300, 2.5))
    for deg in (0, 1, 2):
        fit = fit_local_polynomial(data, "marginal", deg, 0.2)
        np.testing.assert_allclose(fit(rng.random((20, 2)) * 0.6 + 0.2), 2.5, atol=1e-12)


def test_linear_response_exact_at_interior(rng):
    x = rng.random((400, 1))
    data = Dataset(x, np.zeros(400), 1.0 - 3.0 * x[:, 0])
    fit = fit_local_polynomial(data, "control", 1, 0.1)
    q = np.linspace(0.2, 0.8, 13)[:, None]
    np.testing.assert_allclose(fit(q), 1.0 - 3.0 * q[:, 0], atol=1e-10)


def test_control_target_ignores_treated(rng):
    x = rng.random((200, 1))
    a = (rng.random(200) < 0.5).astype(float)
    y = np.where(a == 1, 100.0, -1.0)
    fit = fit_local_polynomial(Dataset(x, a, y), "control", 0, 0.3)
    np.testing.assert_allclose(fit(np.array([[0.5]])), -1.0)


def test_propensity_clipped(rng):
    x = rng.random((100, 1))
    fit = fit_local_polynomial(Dataset(x, np.ones(100), x[:, 0]), "propensity", 0, 0.2, clip=(0.01, 0.99))
    assert np.all(fit(np.array([[0.5]])) == 0.99)


def test_fallback_widens_then_fails():
    x = np.array([[0.1], [0.12]])
    data = Dataset(x, np.zeros(2), np.array([1.0, 3.0]))
    fit = fit_local_polynomial(data, "marginal", 1, 0.05)
    assert fit(np.array([[0.11]]))[0] == pytest.approx(2.0)  # reduced to degree 0
    assert fit(np.array([[0.2]]))[0] == pytest.approx(2.0)  # widened window
    with pytest.raises(DegenerateFitError, match="x=\\[0.9\\]"):
        fit(np.array([[0.9]]))


def test_known_uniform_density_is_uniform():
    frame = LocalizedFrame([0.5, 0.5], 0.2)
    cov = fit_covariate_distribution(None, "known", frame, lambda x: np.ones(np.atleast_2d(x).shape[0]))
    v = np.random.default_rng(0).random((10, 2))
    np.testing.assert_allclose(cov.density(v), 1.0)
    assert cov.mass == pytest.approx(1.0)
    nodes, w = cov.quadrature(4)
    assert float(np.sum(w * cov.shape(nodes) / cov.density(nodes))) == pytest.approx(1.0)


def test_histogram_normalization(rng):
    frame = LocalizedFrame([0.5], 0.4)
    x = rng.random((5000, 1))
    cov = fit_covariate_distribution(Dataset(x, np.zeros(5000), np.zeros(5000)), "histogram", frame, cells=8)
    nodes, w = grid_quadrature(cov.breakpoints(), 1)
    n_w = int(np.sum(frame.in_window(x)))
    assert float(np.sum(w * cov.density(nodes))) == pytest.approx(n_w / (5000 * 0.4), rel=1e-12)
    assert float(np.sum(w * cov.shape(nodes))) == pytest.approx(1.0, abs=1e-12)


def test_histogram_concentrates_on_subcube_tops():
    cfg = LowerBoundConfig("mu0_alpha_ge_beta", 1.0, 1.0, 1.0, 1, 0.2, 4)
    data, _ = sample(cfg, "P", 40_000, 0)
    frame = LocalizedFrame(cfg.x0, cfg.h)
    cov = fit_covariate_distribution(data, "histogram", frame, cells=16)
    nodes, w = grid_quadrature(cov.breakpoints(), 1)
    tops = cfg.in_support(frame.unstretch(nodes))
    share = float(np.sum((w * cov.shape(nodes))[tops]))
    # cells of side 1/16 straddle the tops of width 1/8; Laplace smoothing leaks a little
    assert share > 0.9


def test_error_probe_zero_for_truth():
    truth = SmoothScenario(alpha=0.5, beta=0.5, gamma=1.0)
    frame = LocalizedFrame([0.5], 0.3)
    errs = nuisance_error_probe(known_nuisances(truth, frame), truth, frame)
    assert errs.pi_error == 0 and errs.outcome_error == 0 and errs.density_ratio_error == 0


def test_error_probe_for_injected_bump():
    truth = SmoothScenario(alpha=0.5, beta=0.5, gamma=1.0)
    frame = LocalizedFrame([0.5], 0.3)
    exact = known_nuisances(truth, frame)

    def bump(x):
        return np.atleast_1d(flat_top_bump((np.atleast_2d(x) - 0.5) / 0.3))

    fit = NuisanceFit(lambda x: truth.pi(x) + 0.1 * bump(x), truth.mu0, "mu0", exact.covariate)
    errs = nuisance_error_probe(fit, truth, frame, order=16, grid_size=128)
    # independent oracle: dense midpoint rule over the stretched window, uniform density
    v = (np.arange(200_000) + 0.5) / 200_000
    ref = 0.1 * np.sqrt(np.mean(bump(frame.unstretch(v[:, None])) ** 2))
    assert errs.pi_error == pytest.approx(ref, rel=1e-6)
    assert errs.outcome_error == 0


def test_fit_nuisances_defaults_follow_smoothness(rng):
    truth = SmoothScenario(alpha=2.5, beta=1.5, gamma=1.0)
    data = truth.sample(2000, rng)
    frame = LocalizedFrame([0.5], 0.2)
    fit = fit_nuisances(data, NuisanceConfig(pi_smoothness=2.5, outcome_smoothness=1.5), frame, truth)
    assert fit.metadata["pi_degree"] == 2 and fit.metadata["outcome_degree"] == 1
    assert fit.metadata["pi_bandwidth"] == pytest.approx(2000 ** (-1 / 6))
    vals = fit.pi(rng.random((50, 1)))
    assert np.all((vals >= 0.01) & (vals <= 0.99))


def test_fit_nuisances_histogram_mode(rng):
    truth = SmoothScenario()
    data = truth.sample(3000, rng)
    frame = LocalizedFrame([0.5], 0.3)
    fit = fit_nuisances(data, NuisanceConfig(covariate_mode="histogram", parametrization="eta"), frame)
    assert fit.covariate.cells >= 1
    assert fit.covariate.mass == pytest.approx(np.mean(frame.in_window(data.x)) / 0.3)


def test_construction_truth_breakpoints_align():
    cfg = LowerBoundConfig("mu0_alpha_ge_beta", 1.0, 1.0, 1.0, 1, 0.2, 4)
    truth = ConstructionScenario(cfg)
    frame = LocalizedFrame(cfg.x0, cfg.h)
    cov = known_nuisances(truth, frame).covariate
    # mass of the window: k tops of width zeta/2 at density f, stretched by 1/h
    assert cov.mass == pytest.approx(cfg.k * cfg.zeta / 2 * cfg.f_value / cfg.h, rel=1e-12)
