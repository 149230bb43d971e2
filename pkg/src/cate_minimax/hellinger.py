"""Distance arithmetic for the lower-bound mixtures and the minimax rate exponent."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from .basis import gauss_unit, tensor_gauss
from .construction import (
    ETA_CATE_LEVEL,
    LowerBoundConfig,
    Regime,
    bump_1d,
    enumerated_mixture_density,
    eval_density,
    top_density_ratios,
)
from .errors import ConfigError

__all__ = [
    "bump_l2_norm_sq",
    "DeltaComponents",
    "delta_bounds",
    "top_mismatch",
    "quadrature_deltas",
    "HellingerBound",
    "mixture_hellinger_bound",
    "RateRegime",
    "minimax_exponent",
    "elbow_threshold",
]

_BUMP_EDGE = math.sqrt(2.0) / 4.0  # the scalar bump vanishes beyond this radius


@lru_cache(maxsize=None)
def _bump_sq_1d(order: int, panels: int) -> float:
    t, w = gauss_unit(order)
    edges = np.linspace(0.25, _BUMP_EDGE, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes = lo + (hi - lo) * t
        total += float(np.sum((hi - lo) * w * bump_1d(nodes) ** 2))
    return 0.5 + 2.0 * total


def bump_l2_norm_sq(d: int = 1, order: int = 48, panels: int = 16) -> float:
    """Squared L2 norm of the d-dimensional flat-top bump.

    The bump is 1 on the inner quarter cube, so only the transition band
    ``1/4 < |t| < sqrt(2)/4`` is integrated numerically.
    """
    if d < 1:
        raise ConfigError("d must be positive")
    return _bump_sq_1d(order, panels) ** d


@dataclass(frozen=True)
class DeltaComponents:
    delta1_bound: float
    delta2_bound: float
    delta3: float
    b_norm_sq: float
    coupled: bool

    def to_dict(self) -> dict:
        return asdict(self)


def top_mismatch(cfg: LowerBoundConfig) -> float:
    """Gap between the averaged null and alternative densities on a sub-cube top, over f."""
    if cfg.regime is Regime.ETA_BETA_GE_ALPHA:
        return cfg.h**cfg.gamma / 4 - ETA_CATE_LEVEL * cfg.zeta ** (2 * cfg.alpha)
    return cfg.h**cfg.gamma / 4 - cfg.zeta ** (2 * cfg.s)


def _inverse_ratio_sum(cfg: LowerBoundConfig) -> float:
    """``max over sign of sum_{a,y} f / p`` on a sub-cube top."""
    ratios = top_density_ratios(cfg, "P")
    return max(
        sum(1.0 / ratios[sign, a, y] for a, y in itertools.product((0.0, 1.0), repeat=2))
        for sign in (-1.0, 1.0)
    )


def delta_bounds(cfg: LowerBoundConfig, coupling_tol: float = 1e-9) -> DeltaComponents:
    """Closed-form upper bounds on the two fluctuation terms and the exact mean mismatch."""
    b2 = bump_l2_norm_sq(cfg.d)
    c0 = 2 ** (cfg.d + 1) * b2 / cfg.eps
    z = cfg.zeta
    hg = cfg.h**cfg.gamma
    mismatch = top_mismatch(cfg)
    coupled = abs(mismatch) <= coupling_tol * max(hg / 4, 1e-300)
    delta3 = 0.0 if coupled else mismatch**2 * _inverse_ratio_sum(cfg)

    reg = cfg.regime
    if reg in (Regime.MU0_ALPHA_GE_BETA, Regime.ETA_ALPHA_GE_BETA):
        d1 = c0 * z ** (2 * cfg.beta)
        d2 = c0 * z ** (2 * cfg.alpha)
    elif reg is Regime.MU0_BETA_GE_ALPHA:
        d1 = (1 + hg) ** 2 * c0 * z ** (2 * cfg.alpha)
        d2 = c0 * z ** (2 * cfg.beta)
        if not coupled:
            d2 = c0 * (z**cfg.beta + hg * z**cfg.alpha) ** 2
    else:
        d1 = 0.0
        d2 = c0 * z ** (2 * cfg.alpha)
    if not coupled:
        # q - p splits into a sign term and the mean mismatch; (u+v)^2 <= 2u^2 + 2v^2.
        d2 = 2 * d2 + 2 * delta3
    return DeltaComponents(d1, d2, delta3, b2, coupled)


def quadrature_deltas(cfg: LowerBoundConfig, order: int = 6) -> DeltaComponents:
    """Fluctuation terms computed directly from the densities by quadrature.

    Integrates over every sub-cube top times {0,1}^2 and maximizes over all
    sign vectors, using the enumerated prior mean. Intended for small ``k``.
    """
    if cfg.k > 8:
        raise ConfigError("direct quadrature is limited to k <= 8")
    half = cfg.zeta / 4
    p_j = cfg.f_value * (cfg.zeta / 2) ** cfg.d
    best = [0.0, 0.0, 0.0]
    ay = list(itertools.product((0.0, 1.0), repeat=2))
    for j in range(cfg.k):
        nodes, w = tensor_gauss(cfg.d, order, cfg.midpoints[j] - half, cfg.midpoints[j] + half)
        pbar = {c: enumerated_mixture_density(cfg, "P", nodes, *c) for c in ay}
        qbar = {c: enumerated_mixture_density(cfg, "Q", nodes, *c) for c in ay}
        for signs in itertools.product((-1.0, 1.0), repeat=cfg.k):
            lam = np.array(signs)
            vals = [0.0, 0.0, 0.0]
            for c in ay:
                p = eval_density(cfg, lam, "P", nodes, *c)
                q = eval_density(cfg, lam, "Q", nodes, *c)
                denom = p * p_j
                vals[0] += float(np.sum(w * (p - pbar[c]) ** 2 / denom))
                vals[1] += float(np.sum(w * (q - p) ** 2 / denom))
                vals[2] += float(np.sum(w * (qbar[c] - pbar[c]) ** 2 / denom))
            best = [max(b, v) for b, v in zip(best, vals)]
    return DeltaComponents(best[0], best[1], best[2], bump_l2_norm_sq(cfg.d), best[2] == 0.0)


@dataclass(frozen=True)
class HellingerBound:
    """Upper bound on the squared Hellinger distance between the n-fold mixtures.

    ``value`` carries the unquantified constant ``C`` as a multiplicative
    input; ``hypothesis_ok`` reports whether the size condition on
    ``n * p_j * max(1, delta1, delta2)`` holds for the given ``b``.
    """

    value: float
    constant: float
    p_j: float
    b: float
    hypothesis_ok: bool
    ratio_ok: bool
    deltas: DeltaComponents
    note: str = "bound holds up to an unquantified constant depending only on b"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["deltas"] = self.deltas.to_dict()
        return out


def mixture_hellinger_bound(
    n: float,
    cfg: LowerBoundConfig,
    constant: float = 1.0,
    b: float | None = None,
    deltas: DeltaComponents | None = None,
) -> HellingerBound:
    """Bound ``C n (sum p_j) {n max p_j (d1 d2 + d2^2) + d3}`` with ``p_j <= 2 (h/2)^d / k``."""
    deltas = deltas or delta_bounds(cfg)
    p_j = 2 * (cfg.h / 2) ** cfg.d / cfg.k
    total_p = cfg.k * p_j
    d1, d2, d3 = deltas.delta1_bound, deltas.delta2_bound, deltas.delta3
    value = constant * n * total_p * (n * p_j * (d1 * d2 + d2**2) + d3)
    b_val = 1.0 / (2 * cfg.eps) if b is None else float(b)
    ratio_ok = _max_mean_ratio(cfg) <= b_val * (1 + 1e-12)
    hyp_ok = n * p_j * max(1.0, d1, d2) <= b_val
    return HellingerBound(float(value), constant, p_j, b_val, bool(hyp_ok), bool(ratio_ok), deltas)


def _max_mean_ratio(cfg: LowerBoundConfig) -> float:
    """Largest ``pbar / p_lambda`` over the support (tops and far region)."""
    ratios = top_density_ratios(cfg, "P")
    worst = 1.0
    for a, y in itertools.product((0.0, 1.0), repeat=2):
        pbar = 0.5 * (ratios[-1.0, a, y] + ratios[1.0, a, y])
        worst = max(worst, pbar / ratios[-1.0, a, y], pbar / ratios[1.0, a, y])
    return worst


@dataclass(frozen=True)
class RateRegime:
    exponent: float
    regime_label: Literal["low_smoothness", "high_smoothness"]
    effective_s: float
    threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


def elbow_threshold(gamma: float, d: int) -> float:
    """Nuisance smoothness at which the rate changes form."""
    return (d / 4) / (1 + d / (2 * gamma))


def minimax_exponent(
    alpha: float, beta: float, gamma: float, d: int, parametrization: str = "mu0"
) -> RateRegime:
    """Exponent ``r`` of the minimax rate ``n^{-r}`` for pointwise CATE estimation."""
    if min(alpha, beta, gamma) <= 0 or d < 1:
        raise ConfigError("exponents and dimension must be positive")
    s = (alpha + beta) / 2
    if parametrization == "mu0":
        s_eff = s
    elif parametrization == "eta":
        s_eff = min(alpha, s)
    else:
        raise ConfigError(f"unknown parametrization {parametrization!r}")
    thr = elbow_threshold(gamma, d)
    if s_eff < thr:
        return RateRegime(1 / (1 + d / (2 * gamma) + d / (4 * s_eff)), "low_smoothness", s_eff, thr)
    return RateRegime(1 / (2 + d / gamma), "high_smoothness", s_eff, thr)
