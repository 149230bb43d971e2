"""Fast internal consistency checks behind ``cate-minimax check``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import TensorBasisSpec, tensor_gauss
from .construction import LowerBoundConfig, Regime, couple_parameters
from .data import Dataset
from .estimator import (
    EstimatorConfig,
    assemble_second_order,
    build_second_basis,
    fit_with_nuisance,
    omega_hat,
    second_order_naive,
)
from .hellinger import delta_bounds, elbow_threshold, minimax_exponent
from .nuisance import KnownDensityMeasure, NuisanceFit

__all__ = ["CheckResult", "CHECKS", "run_checks"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _uniform_nuisance(frame, pi: Callable, outcome: Callable, parametrization: str = "mu0") -> NuisanceFit:
    measure = KnownDensityMeasure(frame, lambda x: np.ones(np.atleast_2d(x).shape[0]))
    return NuisanceFit(pi, outcome, parametrization, measure)


def check_orthonormality() -> CheckResult:
    worst = 0.0
    for d in (1, 2, 3):
        for deg in range(5):
            spec = TensorBasisSpec(d, deg)
            nodes, w = tensor_gauss(d, deg + 1)
            vals = spec.evaluate(nodes)
            worst = max(worst, float(np.max(np.abs(vals.T @ (w[:, None] * vals) - np.eye(spec.q)))))
    return CheckResult("basis orthonormality", worst <= 1e-10, f"max deviation {worst:.2e}")


def check_u_statistic(instances: int = 10, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, 30))
        cfg = EstimatorConfig(x0=(0.5,), h=0.6, gamma=float(rng.uniform(0.5, 3.0)), k=int(rng.integers(1, 9)))
        data = Dataset(rng.random((n, 1)), rng.integers(0, 2, n).astype(float), rng.standard_normal(n))
        shift = rng.uniform(-0.2, 0.2)
        nz = _uniform_nuisance(cfg.frame, lambda x: 0.5 + shift * np.atleast_2d(x)[:, 0], lambda x: np.sin(np.atleast_2d(x)[:, 0]))
        om = omega_hat(nz.covariate, build_second_basis(cfg))
        fast = assemble_second_order(data, nz, om, cfg)
        slow = second_order_naive(data, nz, om.inverse, cfg)
        worst = max(worst, float(np.max(np.abs(fast[0] - slow[0]))), float(np.max(np.abs(fast[1] - slow[1]))))
    return CheckResult("U-statistic engine vs double loop", worst <= 1e-10, f"max deviation {worst:.2e}")


def check_exponent_elbow() -> CheckResult:
    worst = 0.0
    for gamma in (0.5, 1.0, 2.0):
        for d in (1, 2, 3):
            thr = elbow_threshold(gamma, d)
            below = minimax_exponent(thr * (1 - 1e-12), thr * (1 - 1e-12), gamma, d).exponent
            above = minimax_exponent(thr, thr, gamma, d).exponent
            worst = max(worst, abs(below - above))
    return CheckResult("rate exponent continuity at the elbow", worst <= 1e-9, f"max jump {worst:.2e}")


_REGIME_SMOOTHNESS = {
    Regime.MU0_ALPHA_GE_BETA: (0.6, 0.4),
    Regime.MU0_BETA_GE_ALPHA: (0.4, 0.6),
    Regime.ETA_ALPHA_GE_BETA: (0.6, 0.4),
    Regime.ETA_BETA_GE_ALPHA: (0.4, 0.6),
}


def check_mixture_coupling(n: float = 1e4) -> CheckResult:
    worst = 0.0
    for regime, (alpha, beta) in _REGIME_SMOOTHNESS.items():
        cp = couple_parameters(n, alpha, beta, 2.0, 1, regime=regime)
        cfg = LowerBoundConfig(regime, alpha, beta, 2.0, 1, cp.h, cp.k)
        worst = max(worst, delta_bounds(cfg).delta3)
    return CheckResult("coupled mixtures coincide (delta3 = 0)", worst == 0.0, f"max delta3 {worst:.2e}")


def check_exact_recovery(c: float = 1.7) -> CheckResult:
    rng = np.random.default_rng(1)
    n = 200
    x = rng.random((n, 1))
    a = rng.integers(0, 2, n).astype(float)
    data = Dataset(x, a, c * a)
    worst = 0.0
    for par in ("mu0", "eta"):
        cfg = EstimatorConfig(x0=(0.5,), h=0.5, gamma=2.0, k=4, parametrization=par)
        outcome = (lambda v: np.zeros(np.atleast_2d(v).shape[0])) if par == "mu0" else (lambda v: np.full(np.atleast_2d(v).shape[0], c / 2))
        nz = _uniform_nuisance(cfg.frame, lambda v: np.full(np.atleast_2d(v).shape[0], 0.5), outcome, par)
        worst = max(worst, abs(fit_with_nuisance(data, nz, cfg).tau_hat - c))
    return CheckResult("exact recovery for Y = cA", worst <= 1e-9, f"max error {worst:.2e}")


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_orthonormality,
    check_u_statistic,
    check_exponent_elbow,
    check_mixture_coupling,
    check_exact_recovery,
)


def run_checks() -> list[CheckResult]:
    return [check() for check in CHECKS]
