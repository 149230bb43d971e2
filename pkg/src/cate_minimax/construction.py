"""Two-mixture lower-bound constructions for pointwise CATE estimation.

Each regime perturbs the CATE with a wide flat-top bump at ``x0`` and the
nuisance functions with ``k`` small bumps inside the cube of side ``h``
around ``x0``, carrying random signs ``lam``. Covariates live on a gappy
support: the "tops" (half-width sub-cubes where every bump equals 1) plus
everything outside the cube of side ``2h``. Outcomes are binary.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterator, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit

from .basis import integer_root
from .data import Dataset
from .errors import ConstructionError

__all__ = [
    "Regime",
    "ETA_CATE_LEVEL",
    "bump_1d",
    "flat_top_bump",
    "LowerBoundConfig",
    "Components",
    "components",
    "eval_density",
    "mixture_density",
    "enumerated_mixture_density",
    "CoupledParameters",
    "couple_parameters",
    "default_coupling_constant",
    "sample",
    "smoothness_envelope",
    "rademacher",
    "top_density_ratios",
]

Hypothesis = Literal["P", "Q"]

# CATE level used under the alternative in the eta/beta>=alpha regime. A CATE of 1
# forces a negative control regression once the propensity bumps up, so the
# alternative uses this level instead and the null subtracts the bump from it.
ETA_CATE_LEVEL = 0.5


class Regime(str, Enum):
    MU0_ALPHA_GE_BETA = "mu0_alpha_ge_beta"
    MU0_BETA_GE_ALPHA = "mu0_beta_ge_alpha"
    ETA_ALPHA_GE_BETA = "eta_alpha_ge_beta"
    ETA_BETA_GE_ALPHA = "eta_beta_ge_alpha"

    @property
    def parametrization(self) -> str:
        return "mu0" if self.value.startswith("mu0") else "eta"

    @property
    def alpha_dominates(self) -> bool:
        return self.value.endswith("alpha_ge_beta")


def bump_1d(t: ArrayLike) -> NDArray[np.float64]:
    """Smooth scalar bump: 1 for ``|t| <= 1/4``, 0 for ``|t| >= sqrt(2)/4``."""
    t = np.asarray(t, dtype=float)
    s = 16.0 * t * t
    lo, hi = s - 1.0, 2.0 - s
    out = np.where(s <= 1.0, 1.0, 0.0)
    mid = (lo > 0) & (hi > 0)
    if np.any(mid):
        # 1 / (1 + e^{-1/lo} / e^{-1/hi}) written as a logistic for stability.
        out = np.where(mid, expit(1.0 / np.where(mid, lo, 1.0) - 1.0 / np.where(mid, hi, 1.0)), out)
    return out


def flat_top_bump(x: ArrayLike) -> NDArray[np.float64] | float:
    """Product of scalar bumps over the last axis (a scalar input is one-dimensional)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return float(bump_1d(x))
    out = np.prod(bump_1d(x), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def rademacher(k: int, rng: np.random.Generator) -> NDArray[np.float64]:
    return rng.choice(np.array([-1.0, 1.0]), size=k)


@dataclass(frozen=True)
class LowerBoundConfig:
    regime: Regime
    alpha: float
    beta: float
    gamma: float
    d: int
    h: float
    k: int
    x0: tuple[float, ...]
    eps: float = 0.05

    def __init__(
        self,
        regime: Regime | str,
        alpha: float,
        beta: float,
        gamma: float,
        d: int,
        h: float,
        k: int,
        x0: ArrayLike | None = None,
        eps: float = 0.05,
    ):
        set_ = object.__setattr__
        set_(self, "regime", Regime(regime))
        set_(self, "alpha", float(alpha))
        set_(self, "beta", float(beta))
        set_(self, "gamma", float(gamma))
        set_(self, "d", int(d))
        set_(self, "h", float(h))
        set_(self, "k", int(k))
        x0_arr = np.full(self.d, 0.5) if x0 is None else np.atleast_1d(np.asarray(x0, float))
        set_(self, "x0", tuple(float(c) for c in x0_arr))
        set_(self, "eps", float(eps))
        self.validate()

    # -- derived geometry -------------------------------------------------
    @property
    def s(self) -> float:
        return (self.alpha + self.beta) / 2

    @property
    def cells_per_axis(self) -> int:
        return integer_root(self.k, self.d)

    @property
    def zeta(self) -> float:
        """Side length of each sub-cube, ``h / k^{1/d}``."""
        return self.h / self.cells_per_axis

    @property
    def center(self) -> NDArray[np.float64]:
        return np.asarray(self.x0)

    @cached_property
    def midpoints(self) -> NDArray[np.float64]:
        """All sub-cube midpoints in flat-index order; only for moderate ``k``."""
        if self.k > 10**7:
            raise ConstructionError(f"k={self.k} too large to list every midpoint")
        return self.midpoint(np.arange(self.k))

    def midpoint(self, flat: ArrayLike) -> NDArray[np.float64]:
        """Midpoints of the sub-cubes with the given flat indices."""
        j = self.cells_per_axis
        multi = np.stack(np.unravel_index(np.asarray(flat, dtype=np.intp), (j,) * self.d), axis=-1)
        return self.center - self.h / 2 + self.zeta * (multi + 0.5)

    @property
    def support_measure(self) -> float:
        return 1.0 - (4.0**self.d - 1.0) / 2.0**self.d * self.h**self.d

    @property
    def f_value(self) -> float:
        return 1.0 / self.support_measure

    @property
    def cate_amplitude(self) -> float:
        return self.h**self.gamma

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        errs = []
        if self.d < 1:
            errs.append("d must be positive")
        if min(self.alpha, self.beta, self.gamma) <= 0:
            errs.append("smoothness exponents must be positive")
        if not (0 < self.h <= 0.25):
            errs.append(f"h={self.h} outside (0, 1/4]")
        if not (0 < self.eps < 0.25):
            errs.append(f"eps={self.eps} outside (0, 1/4)")
        if self.k < 1:
            errs.append("k must be positive")
        if errs:
            raise ConstructionError("; ".join(errs))
        try:
            self.cells_per_axis
        except Exception as exc:  # non-power k
            raise ConstructionError(str(exc)) from None
        if len(self.x0) != self.d:
            raise ConstructionError("x0 has wrong dimension")
        if np.any(self.center < self.h) or np.any(self.center > 1 - self.h):
            raise ConstructionError("x0 must lie in [h, 1-h]^d so the 2h-cube fits in [0,1]^d")
        if self.regime.alpha_dominates and self.alpha < self.beta:
            raise ConstructionError(f"{self.regime.value} requires alpha >= beta")
        if not self.regime.alpha_dominates and self.beta < self.alpha:
            raise ConstructionError(f"{self.regime.value} requires beta >= alpha")
        slack = 1 - 4 * self.eps - self.h**self.gamma - 2 * self.zeta ** min(self.alpha, self.beta)
        if slack < -1e-15:
            raise ConstructionError(
                "validity constraint h^gamma + 2 zeta^min(alpha,beta) <= 1 - 4 eps fails "
                f"(slack {slack:.3g})"
            )
        lo_ratio, means_ok = _extreme_values(self)
        if not means_ok:
            raise ConstructionError("a conditional mean leaves [0, 1]")
        if lo_ratio < self.eps - 1e-15:
            raise ConstructionError(f"density ratio floor {lo_ratio:.4g} below eps={self.eps}")

    def min_density_ratio(self) -> float:
        """Smallest ``density / f`` over the support, both hypotheses, all signs."""
        return _extreme_values(self)[0]

    # -- locating points ----------------------------------------------------
    def cell_index(self, x: NDArray[np.float64]) -> tuple[NDArray[np.intp], NDArray[np.bool_]]:
        """Flat sub-cube index of each point and whether it lies in the ``h``-cube."""
        j = self.cells_per_axis
        rel = (x - (self.center - self.h / 2)) / self.zeta
        inside = np.all((rel >= 0) & (rel <= j), axis=1)
        idx = np.clip(np.floor(rel).astype(np.intp), 0, j - 1)
        flat = np.ravel_multi_index(tuple(idx.T), (j,) * self.d)
        return np.asarray(flat), inside

    def in_support(self, x: ArrayLike) -> NDArray[np.bool_]:
        x = np.atleast_2d(np.asarray(x, float))
        far = np.max(np.abs(x - self.center), axis=1) > self.h
        flat, inside = self.cell_index(x)
        near_mid = np.max(np.abs(x - self.midpoint(flat)), axis=1) <= self.zeta / 4
        in_unit = np.all((x >= 0) & (x <= 1), axis=1)
        return in_unit & (far | (inside & near_mid))

    def density_f(self, x: ArrayLike) -> NDArray[np.float64]:
        return np.where(self.in_support(x), self.f_value, 0.0)


@dataclass(frozen=True)
class Components:
    """Covariate density, propensity, control regression and CATE at a set of points."""

    f: NDArray[np.float64]
    pi: NDArray[np.float64]
    mu0: NDArray[np.float64]
    tau: NDArray[np.float64]

    @property
    def mu1(self) -> NDArray[np.float64]:
        return self.mu0 + self.tau

    @property
    def eta(self) -> NDArray[np.float64]:
        return self.mu0 + self.pi * self.tau


def _signed_bump_sums(
    cfg: LowerBoundConfig, lam: NDArray[np.float64], x: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return ``sum_j lam_j B_j(x)`` and ``sum_j B_j(x)^2``.

    The small bumps vanish outside their own sub-cube, so only the cell
    containing ``x`` contributes.
    """
    flat, inside = cfg.cell_index(x)
    b = flat_top_bump((x - cfg.midpoint(flat)) / cfg.zeta)
    b = np.where(inside, np.atleast_1d(b), 0.0)
    return lam[flat] * b, b * b


def _cate_bump(cfg: LowerBoundConfig, x: NDArray[np.float64]) -> NDArray[np.float64]:
    return cfg.cate_amplitude * np.atleast_1d(flat_top_bump((x - cfg.center) / (2 * cfg.h)))


def _components_from_bumps(
    cfg: LowerBoundConfig, hypothesis: Hypothesis, signed: ArrayLike, tau_h: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """(pi, mu0, tau) given the signed small-bump sum and the CATE bump values."""
    signed = np.asarray(signed, float)
    tau_h = np.asarray(tau_h, float)
    za, zb = cfg.zeta**cfg.alpha, cfg.zeta**cfg.beta
    half = np.full_like(signed, 0.5)
    reg = cfg.regime
    if hypothesis == "Q":
        pi = 0.5 + za * signed
        if reg is Regime.ETA_BETA_GE_ALPHA:
            tau = np.full_like(signed, ETA_CATE_LEVEL)
            return pi, 0.5 - pi * tau, tau
        return pi, 0.5 + zb * signed, np.zeros_like(signed)
    if hypothesis != "P":
        raise ConstructionError(f"unknown hypothesis {hypothesis!r}")
    if reg in (Regime.MU0_ALPHA_GE_BETA, Regime.ETA_ALPHA_GE_BETA):
        return half, 0.5 + zb * signed - tau_h / 2, tau_h
    if reg is Regime.MU0_BETA_GE_ALPHA:
        return 0.5 + za * signed, 0.5 - tau_h / 2, tau_h
    tau = ETA_CATE_LEVEL - tau_h
    return half, 0.5 - tau / 2, tau


def components(
    cfg: LowerBoundConfig, lam: ArrayLike, hypothesis: Hypothesis, x: ArrayLike
) -> Components:
    """Evaluate (f, pi, mu0, tau) of ``hypothesis`` with signs ``lam`` at points ``x``."""
    lam = _check_lam(cfg, lam)
    x = np.atleast_2d(np.asarray(x, float))
    if x.shape[1] != cfg.d:
        raise ConstructionError("point dimension does not match config")
    signed, _ = _signed_bump_sums(cfg, lam, x)
    pi, mu0, tau = _components_from_bumps(cfg, hypothesis, signed, _cate_bump(cfg, x))
    return Components(cfg.density_f(x), pi, mu0, tau)


def _bernoulli_density(comp: Components, a: NDArray[np.float64], y: NDArray[np.float64]):
    mu_a = comp.mu0 + a * comp.tau
    pa = np.where(a == 1, comp.pi, 1 - comp.pi)
    py = np.where(y == 1, mu_a, 1 - mu_a)
    return comp.f * pa * py


def _check_lam(cfg: LowerBoundConfig, lam: ArrayLike) -> NDArray[np.float64]:
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != cfg.k or not np.all(np.abs(lam) == 1):
        raise ConstructionError(f"sign vector must have {cfg.k} entries in {{-1, +1}}")
    return lam


def eval_density(
    cfg: LowerBoundConfig,
    lam: ArrayLike,
    hypothesis: Hypothesis,
    x: ArrayLike,
    a: ArrayLike,
    y: ArrayLike,
) -> NDArray[np.float64] | float:
    """Joint density of (X, A, Y) with binary A and Y."""
    x_arr = np.asarray(x, float)
    scalar = x_arr.ndim <= 1 and np.ndim(a) == 0
    x2 = x_arr.reshape(-1, cfg.d) if x_arr.ndim <= 1 else x_arr
    a_arr = np.broadcast_to(np.asarray(a, float), (x2.shape[0],))
    y_arr = np.broadcast_to(np.asarray(y, float), (x2.shape[0],))
    if not np.all(np.isin(y_arr, (0.0, 1.0))) or not np.all(np.isin(a_arr, (0.0, 1.0))):
        raise ConstructionError("construction densities need binary a and y")
    out = _bernoulli_density(components(cfg, lam, hypothesis, x2), a_arr, y_arr)
    return float(out[0]) if scalar else out


def mixture_density(
    cfg: LowerBoundConfig, hypothesis: Hypothesis, x: ArrayLike, a: ArrayLike, y: ArrayLike
) -> NDArray[np.float64]:
    """Closed-form density averaged over uniform random signs."""
    x2 = np.atleast_2d(np.asarray(x, float))
    n = x2.shape[0]
    sgn = (2 * np.broadcast_to(np.asarray(a, float), (n,)) - 1) * (
        2 * np.broadcast_to(np.asarray(y, float), (n,)) - 1
    )
    f = cfg.density_f(x2)
    _, sq = _signed_bump_sums(cfg, np.ones(cfg.k), x2)
    tau_h = _cate_bump(cfg, x2)
    if cfg.regime is Regime.ETA_BETA_GE_ALPHA:
        c = ETA_CATE_LEVEL
        if hypothesis == "P":
            return f * (0.25 + sgn * (c - tau_h) / 4)
        return f * (0.25 + sgn * c * (0.25 - cfg.zeta ** (2 * cfg.alpha) * sq))
    if hypothesis == "P":
        return f * (0.25 + sgn * tau_h / 4)
    return f * (0.25 + sgn * cfg.zeta ** (2 * cfg.s) * sq)


def enumerated_mixture_density(
    cfg: LowerBoundConfig, hypothesis: Hypothesis, x: ArrayLike, a: ArrayLike, y: ArrayLike
) -> NDArray[np.float64]:
    """Mixture density by brute-force averaging over all ``2^k`` sign vectors."""
    if cfg.k > 16:
        raise ConstructionError("enumeration is limited to k <= 16")
    x2 = np.atleast_2d(np.asarray(x, float))
    total = np.zeros(x2.shape[0])
    for signs in itertools.product((-1.0, 1.0), repeat=cfg.k):
        total += eval_density(cfg, np.array(signs), hypothesis, x2, a, y)
    return total / 2**cfg.k


def top_density_ratios(cfg: LowerBoundConfig, hypothesis: Hypothesis) -> dict:
    """``density / f`` on a sub-cube top for each (sign, a, y); signs elsewhere are irrelevant."""
    out = {}
    amp = np.array([cfg.cate_amplitude])
    for sign in (-1.0, 1.0):
        pi, mu0, tau = _components_from_bumps(cfg, hypothesis, np.array([sign]), amp)
        comp = Components(np.ones(1), pi, mu0, tau)
        for a_val, y_val in itertools.product((0.0, 1.0), repeat=2):
            out[sign, a_val, y_val] = float(
                _bernoulli_density(comp, np.array([a_val]), np.array([y_val]))[0]
            )
    return out


def _extreme_values(cfg: LowerBoundConfig) -> tuple[float, bool]:
    """Minimum density ratio on the support, and whether every mean stays in [0,1].

    On the support every bump is 0 or 1, so the density ratio takes finitely
    many values. Conditional means are affine in the bump values, so checking
    the vertices (signed bump in {-1,0,1}, CATE bump in {0, full}) covers
    every point of the cube.
    """
    amp = cfg.cate_amplitude
    lo = np.inf
    means_ok = True
    vertices = [(s, t) for s in (-1.0, 0.0, 1.0) for t in (0.0, amp)]
    support_vertices = {(-1.0, amp), (1.0, amp), (0.0, 0.0)}
    for hyp in ("P", "Q"):
        for s_val, t_val in vertices:
            pi, mu0, tau = (
                np.asarray(v, float)
                for v in _components_from_bumps(cfg, hyp, np.array([s_val]), np.array([t_val]))
            )
            vals = np.concatenate([pi, mu0, mu0 + tau])
            if np.any(vals < -1e-15) or np.any(vals > 1 + 1e-15):
                means_ok = False
            if (s_val, t_val) in support_vertices:
                comp = Components(np.ones(1), pi, mu0, tau)
                for a_val, y_val in itertools.product((0.0, 1.0), repeat=2):
                    r = _bernoulli_density(comp, np.array([a_val]), np.array([y_val]))[0]
                    lo = min(lo, r)
    return float(lo), means_ok


# -- parameter coupling -------------------------------------------------------


def _coupling_exponent_and_scale(regime: Regime, alpha: float, beta: float) -> tuple[float, float]:
    """(e, kappa) such that the mixtures coincide iff ``h^gamma = kappa * zeta^{2e}``."""
    if regime is Regime.ETA_BETA_GE_ALPHA:
        return alpha, 4.0 * ETA_CATE_LEVEL
    return (alpha + beta) / 2, 4.0


def default_coupling_constant(
    regime: Regime | str, gamma: float, d: int, eps: float = 0.05, hellinger_constant: float = 1.0
) -> float:
    """Smallest constant for which the coupled Hellinger bound is at most one."""
    from .hellinger import bump_l2_norm_sq

    regime = Regime(regime)
    b2 = bump_l2_norm_sq(d)
    base = 2.0 ** (2 * d / gamma + 5) * hellinger_constant * (b2 / eps) ** 2
    return 4.0 * base if regime is Regime.MU0_BETA_GE_ALPHA else base


@dataclass(frozen=True)
class CoupledParameters:
    h: float
    k: int
    zeta: float
    h_unrounded: float
    zeta_unrounded: float
    c_star: float

    def __iter__(self) -> Iterator:
        yield self.h
        yield self.k


def couple_parameters(
    n: float,
    alpha: float,
    beta: float,
    gamma: float,
    d: int,
    c_star: float | None = None,
    regime: Regime | str = Regime.MU0_ALPHA_GE_BETA,
    eps: float = 0.05,
    x0: ArrayLike | None = None,
) -> CoupledParameters:
    """Bandwidth and sub-cube count that make the two mixtures coincide.

    The real-valued solution puts ``zeta = (C* n^2)^{-1/(d + 4e + 2ed/gamma)}``
    and ``h^gamma = kappa zeta^{2e}``. The cell count ``k^{1/d}`` is then
    rounded to an integer in the direction that does not increase ``zeta``,
    and ``zeta`` is recomputed so the coupling identity stays exact.
    """
    regime = Regime(regime)
    e, kappa = _coupling_exponent_and_scale(regime, alpha, beta)
    if c_star is None:
        c_star = default_coupling_constant(regime, gamma, d, eps)
    if n <= 0 or c_star <= 0:
        raise ConstructionError("n and C* must be positive")
    expo = d + 4 * e + 2 * e * d / gamma
    zeta_real = (1.0 / (c_star * float(n) ** 2)) ** (1.0 / expo)
    h_real = (kappa * zeta_real ** (2 * e)) ** (1.0 / gamma)
    j_real = h_real / zeta_real
    if abs(gamma - 2 * e) < 1e-12:
        raise ConstructionError("coupling is degenerate when gamma equals twice the exponent")
    j_near = round(j_real)
    if j_near >= 1 and abs(j_real - j_near) <= 1e-9 * j_real:
        j = j_near
    elif gamma > 2 * e:
        j = math.ceil(j_real)
    else:
        j = math.floor(j_real)
    if j < 1:
        raise ConstructionError(f"n={n} too small: fewer than one sub-cube per axis")
    if j == j_near and abs(j_real - j_near) <= 1e-9 * j_real:
        zeta, h = zeta_real, h_real
    else:
        zeta = (kappa / j**gamma) ** (1.0 / (gamma - 2 * e))
        h = j * zeta
    if h > 0.25:
        raise ConstructionError(f"n={n} too small for this regime: coupled h={h:.4g} > 1/4")
    slack = 1 - 4 * eps - h**gamma - 2 * zeta ** min(alpha, beta)
    if slack < 0:
        raise ConstructionError(f"n={n} too small for this regime: validity slack {slack:.3g}")
    k = j**d
    if x0 is not None:
        LowerBoundConfig(regime, alpha, beta, gamma, d, h, k, x0, eps)
    return CoupledParameters(h, k, zeta, h_real, zeta_real, c_star)


# -- sampling -----------------------------------------------------------------


def _far_boxes(cfg: LowerBoundConfig) -> list[tuple[NDArray[np.float64], NDArray[np.float64]]]:
    """Disjoint boxes tiling [0,1]^d minus the cube of side 2h around x0."""
    lo_c = cfg.center - cfg.h
    hi_c = cfg.center + cfg.h
    boxes = []
    for i in range(cfg.d):
        for below in (True, False):
            lo = np.zeros(cfg.d)
            hi = np.ones(cfg.d)
            lo[:i], hi[:i] = lo_c[:i], hi_c[:i]
            if below:
                hi[i] = lo_c[i]
            else:
                lo[i] = hi_c[i]
            if np.all(hi > lo):
                boxes.append((lo, hi))
    return boxes


def sample(
    cfg: LowerBoundConfig,
    hypothesis: Hypothesis,
    n: int,
    seed: int | np.random.SeedSequence | np.random.Generator | None = None,
    lam: ArrayLike | None = None,
) -> tuple[Dataset, NDArray[np.float64]]:
    """Draw ``n`` observations; signs come from ``lam`` or a fresh Rademacher draw.

    Returns the dataset and the sign vector used.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lam_arr = rademacher(cfg.k, rng) if lam is None else _check_lam(cfg, lam)
    if n == 0:
        return Dataset.empty(cfg.d), lam_arr
    boxes = _far_boxes(cfg)
    top_side = cfg.zeta / 2
    vols = [float(np.prod(hi - lo)) for lo, hi in boxes] + [cfg.k * top_side**cfg.d]
    probs = np.asarray(vols) / sum(vols)
    which = rng.choice(len(vols), size=n, p=probs)
    u = rng.random((n, cfg.d))
    x = np.empty((n, cfg.d))
    for b, (lo, hi) in enumerate(boxes):
        sel = which == b
        x[sel] = lo + (hi - lo) * u[sel]
    sel = which == len(boxes)
    cells = rng.integers(0, cfg.k, size=int(sel.sum()))
    x[sel] = cfg.midpoint(cells) - top_side / 2 + top_side * u[sel]
    comp = components(cfg, lam_arr, hypothesis, x)
    a = (rng.random(n) < comp.pi).astype(float)
    mu_a = comp.mu0 + a * comp.tau
    y = (rng.random(n) < mu_a).astype(float)
    return Dataset(x, a, y), lam_arr


# -- envelopes ----------------------------------------------------------------

_DEFAULT_HYP = {"tau": "P", "pi": "Q", "mu0": "Q", "eta": "Q"}


def smoothness_envelope(
    cfg: LowerBoundConfig,
    lam: ArrayLike,
    function: Literal["pi", "mu0", "eta", "tau"],
    hypothesis: Hypothesis | None = None,
    grid: ArrayLike | None = None,
    resolution: int = 201,
) -> float:
    """Largest deviation of ``function`` from its value far from ``x0``.

    The default grid covers the cube of side ``2h`` around ``x0`` and always
    includes the sub-cube midpoints and ``x0`` itself.
    """
    if function not in _DEFAULT_HYP:
        raise ConstructionError(f"unknown function {function!r}")
    hyp = hypothesis or _DEFAULT_HYP[function]
    if grid is None:
        per_axis = max(2, int(round(resolution ** (1.0 / cfg.d))))
        axes = [np.linspace(c - cfg.h, c + cfg.h, per_axis) for c in cfg.center]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, cfg.d)
        grid = np.vstack([mesh, cfg.midpoints, cfg.center[None, :]])
    pts = np.atleast_2d(np.asarray(grid, float))
    far = np.zeros((1, cfg.d))  # the origin corner is always off the bump region
    comp = components(cfg, lam, hyp, np.vstack([pts, far]))
    vals = getattr(comp, function)
    return float(np.max(np.abs(vals[:-1] - vals[-1])))
