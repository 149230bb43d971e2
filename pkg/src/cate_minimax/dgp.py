"""Synthetic data-generating processes with certified smoothness.

Nuisance perturbations are multi-scale sums of flat-top bumps: level ``l``
tiles [0,1]^d with cubes of side ``2^-l``, places one bump per cube with a
random sign, and scales it by ``2^{-l s}``. Such sums are Hölder-``s`` for
any ``s`` below the bump's smoothness, uniformly in the number of levels.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .construction import LowerBoundConfig, components, flat_top_bump, sample as sample_construction
from .data import Dataset
from .errors import ConfigError

__all__ = ["BumpSum", "SmoothScenario", "ConstructionScenario"]


@dataclass(frozen=True)
class BumpSum:
    """Signed multi-scale bump sum normalized so that ``|g| <= 1``."""

    d: int
    smoothness: float
    levels: int
    sign_seed: int
    _signs: tuple[NDArray[np.float64], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.levels < 1 or self.levels * self.d > 24:
            raise ConfigError("levels must be positive and levels*d at most 24")
        rng = np.random.default_rng(self.sign_seed)
        signs = tuple(rng.choice([-1.0, 1.0], size=2 ** (lvl * self.d)) for lvl in range(1, self.levels + 1))
        object.__setattr__(self, "_signs", signs)

    @property
    def normalizer(self) -> float:
        return float(sum(2.0 ** (-lvl * self.smoothness) for lvl in range(1, self.levels + 1)))

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        pts = np.atleast_2d(np.asarray(x, float))
        total = np.zeros(pts.shape[0])
        for lvl, signs in enumerate(self._signs, start=1):
            m = 2**lvl
            cell = np.clip(np.floor(pts * m).astype(np.intp), 0, m - 1)
            centre = (cell + 0.5) / m
            flat = np.ravel_multi_index(tuple(cell.T), (m,) * self.d)
            total += 2.0 ** (-lvl * self.smoothness) * signs[flat] * np.atleast_1d(
                flat_top_bump((pts - centre) * m)
            )
        return total / self.normalizer


@dataclass(frozen=True)
class SmoothScenario:
    """Uniform covariates, bump-sum nuisances and a power-law CATE around ``x0``.

    ``pi = 1/2 + pi_amp * g_alpha``; the control regression (or the marginal
    regression under ``parametrization="eta"``) is ``outcome_base +
    outcome_amp * g_beta``; ``tau = tau_base + tau_amp * sum_j |x_j - x0_j|^gamma``.
    With ``aligned_signs`` both bump sums share one sign pattern. Outcomes are
    Gaussian with standard deviation ``noise``, or binary when ``noise`` is None.
    """

    d: int = 1
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    x0: tuple[float, ...] = (0.5,)
    pi_amp: float = 0.3
    outcome_base: float = 0.0
    outcome_amp: float = 0.5
    tau_base: float = 1.0
    tau_amp: float = 1.0
    noise: float | None = 1.0
    levels: int = 10
    sign_seed: int = 0
    aligned_signs: bool = True
    parametrization: str = "mu0"
    _g_pi: BumpSum = field(init=False, repr=False, compare=False)
    _g_out: BumpSum = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        x0 = tuple(float(c) for c in np.atleast_1d(self.x0))
        object.__setattr__(self, "x0", x0)
        if len(x0) != self.d:
            raise ConfigError("x0 dimension mismatch")
        if not 0 <= self.pi_amp < 0.5:
            raise ConfigError("pi_amp must lie in [0, 1/2)")
        if self.parametrization not in ("mu0", "eta"):
            raise ConfigError("parametrization must be mu0 or eta")
        levels = max(1, min(self.levels, 24 // self.d))
        out_seed = self.sign_seed if self.aligned_signs else self.sign_seed + 1
        object.__setattr__(self, "_g_pi", BumpSum(self.d, self.alpha, levels, self.sign_seed))
        object.__setattr__(self, "_g_out", BumpSum(self.d, self.beta, levels, out_seed))

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if not k.startswith("_")}

    @property
    def breakpoints(self) -> None:
        return None

    def pi(self, x: ArrayLike) -> NDArray[np.float64]:
        return 0.5 + self.pi_amp * self._g_pi(x)

    def tau(self, x: ArrayLike) -> NDArray[np.float64]:
        pts = np.atleast_2d(np.asarray(x, float))
        return self.tau_base + self.tau_amp * np.sum(np.abs(pts - np.asarray(self.x0)) ** self.gamma, axis=1)

    def _outcome_curve(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.outcome_base + self.outcome_amp * self._g_out(x)

    def mu0(self, x: ArrayLike) -> NDArray[np.float64]:
        if self.parametrization == "mu0":
            return self._outcome_curve(x)
        return self._outcome_curve(x) - self.pi(x) * self.tau(x)

    def eta(self, x: ArrayLike) -> NDArray[np.float64]:
        if self.parametrization == "eta":
            return self._outcome_curve(x)
        return self.mu0(x) + self.pi(x) * self.tau(x)

    def density(self, x: ArrayLike) -> NDArray[np.float64]:
        pts = np.atleast_2d(np.asarray(x, float))
        return np.all((pts >= 0) & (pts <= 1), axis=1).astype(float)

    def tau_at_x0(self) -> float:
        return float(self.tau(np.asarray(self.x0))[0])

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        x = rng.random((n, self.d))
        a = (rng.random(n) < self.pi(x)).astype(float) if n else np.empty(0)
        mean = self.mu0(x) + a * self.tau(x) if n else np.empty(0)
        if self.noise is None:
            y = (rng.random(n) < np.clip(mean, 0, 1)).astype(float)
        else:
            y = mean + self.noise * rng.standard_normal(n)
        return Dataset(x, a, y)


@dataclass(frozen=True)
class ConstructionScenario:
    """Ground truth for one hypothesis of a lower-bound construction.

    Signs are redrawn from the prior for every sample; the nuisance
    functions exposed here use the fixed ``lam`` given at construction time.
    """

    config: LowerBoundConfig
    hypothesis: str = "P"
    lam: tuple[float, ...] | None = None

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def x0(self) -> tuple[float, ...]:
        return self.config.x0

    def _lam(self) -> NDArray[np.float64]:
        return np.ones(self.config.k) if self.lam is None else np.asarray(self.lam, float)

    def _comp(self, x):
        return components(self.config, self._lam(), self.hypothesis, x)

    @property
    def breakpoints(self) -> tuple[tuple[float, ...], ...]:
        cfg = self.config
        out = []
        for axis in range(cfg.d):
            c = cfg.x0[axis]
            j = cfg.cells_per_axis
            mids = c - cfg.h / 2 + cfg.zeta * (np.arange(j) + 0.5)
            edges = np.concatenate([[c - cfg.h, c + cfg.h], mids - cfg.zeta / 4, mids + cfg.zeta / 4])
            out.append(tuple(float(e) for e in np.sort(edges)))
        return tuple(out)

    def pi(self, x):
        return self._comp(x).pi

    def mu0(self, x):
        return self._comp(x).mu0

    def tau(self, x):
        return self._comp(x).tau

    def eta(self, x):
        return self._comp(x).eta

    def density(self, x):
        return self.config.density_f(np.atleast_2d(np.asarray(x, float)))

    def tau_at_x0(self) -> float:
        return float(self.tau(np.asarray(self.config.x0))[0])

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        data, _ = sample_construction(self.config, self.hypothesis, n, rng, lam=self.lam)
        return data
