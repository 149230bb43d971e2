"""Training-split nuisance estimation.

Propensity and outcome regressions are fitted by local polynomial least
squares with a box kernel. The covariate distribution enters only through
its restriction to the estimator's window, stretched onto the unit cube;
:class:`WindowMeasure` objects represent that stretched measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .basis import LocalizedFrame, graded_lex_indices, grid_quadrature, strict_floor
from .data import Dataset
from .errors import ConfigError, DegenerateFitError

__all__ = [
    "SplitPlan",
    "split",
    "LocalPolynomialRegression",
    "fit_local_polynomial",
    "WindowMeasure",
    "KnownDensityMeasure",
    "HistogramMeasure",
    "fit_covariate_distribution",
    "Truth",
    "NuisanceConfig",
    "NuisanceFit",
    "fit_nuisances",
    "known_nuisances",
    "nuisance_error_probe",
]

Function = Callable[[NDArray[np.float64]], NDArray[np.float64]]
Target = Literal["propensity", "control", "marginal"]


@dataclass(frozen=True)
class SplitPlan:
    train: NDArray[np.intp]
    estimation: NDArray[np.intp]
    seed: int | None


def split(data: Dataset | int, fraction: float = 0.5, seed: int | None = None) -> SplitPlan:
    """Shuffle-split into a training share ``fraction`` and an estimation remainder."""
    n = data if isinstance(data, int) else data.n
    if n < 2:
        raise ConfigError("need at least two observations to split")
    if not 0 < fraction < 1:
        raise ConfigError("fraction must lie strictly between 0 and 1")
    n_train = min(max(int(round(n * fraction)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return SplitPlan(np.sort(perm[:n_train]), np.sort(perm[n_train:]), seed)


# -- local polynomial regression ---------------------------------------------


def _design(offsets: NDArray[np.float64], degree: int) -> NDArray[np.float64]:
    idx = np.asarray(graded_lex_indices(offsets.shape[1], degree))
    return np.prod(offsets[:, None, :] ** idx[None, :, :], axis=2)


@dataclass(frozen=True)
class LocalPolynomialRegression:
    """Box-kernel local polynomial fit, evaluated lazily at query points.

    At a query point the fit uses training points within sup-norm distance
    ``bandwidth``; if that local design is rank deficient the degree is
    reduced by one and the bandwidth then widened by 1.5x, up to three times.
    """

    x: NDArray[np.float64]
    y: NDArray[np.float64]
    degree: int
    bandwidth: float
    clip: tuple[float, float] | None = None
    max_widen: int = 3
    tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.x.shape[0] == 0:
            raise DegenerateFitError("no training observations for this target")
        object.__setattr__(self, "tree", cKDTree(self.x))

    def _fit_at(self, point: NDArray[np.float64], first: list[int] | None = None) -> float:
        plans = [(self.degree, self.bandwidth)]
        deg = max(self.degree - 1, 0)
        start = 0 if deg < self.degree else 1
        plans += [(deg, self.bandwidth * 1.5**w) for w in range(start, self.max_widen + 1)]
        for attempt, (deg_try, bw) in enumerate(plans):
            nb = first if attempt == 0 and first is not None else self.tree.query_ball_point(point, r=bw, p=np.inf)
            if not nb:
                continue
            if deg_try == 0:
                return float(np.mean(self.y[nb]))
            off = (self.x[nb] - point) / bw
            design = _design(off, deg_try)
            if design.shape[0] < design.shape[1]:
                continue
            coef, _, rank, _ = np.linalg.lstsq(design, self.y[nb], rcond=None)
            if rank == design.shape[1]:
                return float(coef[0])
        raise DegenerateFitError(
            f"local polynomial design singular at x={np.round(point, 6).tolist()} after fallback"
        )

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[0] == 0:
            return np.empty(0)
        neighbours = self.tree.query_ball_point(pts, r=self.bandwidth, p=np.inf)
        out = np.array([self._fit_at(p, nb) for p, nb in zip(pts, neighbours)])
        if self.clip is not None:
            out = np.clip(out, *self.clip)
        return out


def fit_local_polynomial(
    train: Dataset,
    target: Target,
    degree: int,
    bandwidth: float,
    clip: tuple[float, float] | None = None,
) -> LocalPolynomialRegression:
    """Regress A on X (``propensity``), Y on X among controls, or Y on X (``marginal``)."""
    if bandwidth <= 0 or degree < 0:
        raise ConfigError("bandwidth must be positive and degree non-negative")
    if target == "propensity":
        x, y = train.x, train.a
    elif target == "control":
        mask = train.a == 0
        x, y = train.x[mask], train.y[mask]
    elif target == "marginal":
        x, y = train.x, train.y
    else:
        raise ConfigError(f"unknown regression target {target!r}")
    return LocalPolynomialRegression(x, y, degree, bandwidth, clip)


# -- stretched covariate measures ---------------------------------------------


class WindowMeasure:
    """Covariate measure of the window, stretched onto [0,1]^d.

    ``density(v)`` is the covariate density at ``x0 + h (v - 1/2)``, so the
    total ``mass`` is ``F(window) / h^d``; ``shape`` is the normalized version.
    """

    frame: LocalizedFrame

    def density(self, v: ArrayLike) -> NDArray[np.float64]:
        raise NotImplementedError

    def breakpoints(self) -> list[NDArray[np.float64]]:
        return [np.array([0.0, 1.0]) for _ in range(self.frame.d)]

    def quadrature(
        self, order: int, extra_breakpoints: Sequence[ArrayLike] | None = None
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Nodes in [0,1]^d and weights already multiplied by the density."""
        edges = self.breakpoints()
        if extra_breakpoints is not None:
            edges = [np.union1d(e, np.asarray(x, float)) for e, x in zip(edges, extra_breakpoints)]
        nodes, w = grid_quadrature(edges, order)
        return nodes, w * self.density(nodes)

    @property
    def mass(self) -> float:
        _, w = self.quadrature(8)
        return float(w.sum())

    def shape(self, v: ArrayLike) -> NDArray[np.float64]:
        return self.density(v) / self.mass


@dataclass(frozen=True)
class KnownDensityMeasure(WindowMeasure):
    """Wraps a known covariate density on the original scale.

    ``breakpoints_x`` lists per-axis coordinates where the density has kinks
    or jumps, so quadrature cells can be aligned with them.
    """

    frame: LocalizedFrame
    density_x: Function
    breakpoints_x: tuple[tuple[float, ...], ...] | None = None

    def density(self, v: ArrayLike) -> NDArray[np.float64]:
        pts = np.atleast_2d(np.asarray(v, float))
        return np.asarray(self.density_x(self.frame.unstretch(pts)), float).reshape(-1)

    def breakpoints(self) -> list[NDArray[np.float64]]:
        base = [0.0, 1.0]
        if self.breakpoints_x is None:
            return [np.array(base) for _ in range(self.frame.d)]
        out = []
        for axis, pts in enumerate(self.breakpoints_x):
            v = 0.5 + (np.asarray(pts, float) - self.frame.x0[axis]) / self.frame.h
            out.append(np.unique(np.clip(np.concatenate([base, v]), 0.0, 1.0)))
        return out

    @property
    def mass(self) -> float:
        _, w = self.quadrature(16)
        return float(w.sum())


@dataclass(frozen=True)
class HistogramMeasure(WindowMeasure):
    """Piecewise-constant window measure on a regular grid of ``cells**d`` sub-cubes."""

    frame: LocalizedFrame
    cells: int
    values: NDArray[np.float64]  # density value per cell, flat C order

    def density(self, v: ArrayLike) -> NDArray[np.float64]:
        pts = np.atleast_2d(np.asarray(v, float))
        idx = np.clip(np.floor(pts * self.cells).astype(np.intp), 0, self.cells - 1)
        inside = np.all((pts >= 0) & (pts <= 1), axis=1)
        flat = np.ravel_multi_index(tuple(idx.T), (self.cells,) * self.frame.d)
        return np.where(inside, self.values[flat], 0.0)

    def breakpoints(self) -> list[NDArray[np.float64]]:
        return [np.linspace(0.0, 1.0, self.cells + 1) for _ in range(self.frame.d)]

    @property
    def mass(self) -> float:
        return float(self.values.sum() / self.cells**self.frame.d)


def fit_covariate_distribution(
    train: Dataset | None,
    mode: Literal["known", "histogram"],
    frame: LocalizedFrame,
    density: Function | None = None,
    cells: int | None = None,
    breakpoints_x: Sequence[Sequence[float]] | None = None,
) -> WindowMeasure:
    """Stretched window measure, either known or a floored histogram.

    The histogram puts probability ``(count + 1) / (N_w + cells^d)`` on each
    cell and scales the total to ``N_w / (n_train h^d)``.
    """
    if mode == "known":
        if density is None:
            raise ConfigError("known mode needs a density")
        bp = None if breakpoints_x is None else tuple(tuple(map(float, b)) for b in breakpoints_x)
        return KnownDensityMeasure(frame, density, bp)
    if mode != "histogram":
        raise ConfigError(f"unknown covariate mode {mode!r}")
    if train is None or cells is None or cells < 1:
        raise ConfigError("histogram mode needs training data and a positive cell count")
    inside = frame.in_window(train.x)
    n_w = int(np.sum(inside))
    if n_w == 0:
        raise DegenerateFitError("no training covariates inside the window")
    v = frame.stretch(train.x[inside])
    idx = np.clip(np.floor(v * cells).astype(np.intp), 0, cells - 1)
    flat = np.ravel_multi_index(tuple(idx.T), (cells,) * frame.d)
    n_cells = cells**frame.d
    counts = np.bincount(flat, minlength=n_cells).astype(float)
    probs = (counts + 1.0) / (n_w + n_cells)
    mass = n_w / (train.n * frame.h**frame.d)
    values = mass * probs * n_cells  # density = probability / cell volume
    return HistogramMeasure(frame, cells, values)


# -- nuisance bundles ------------------------------------------------------------


class Truth(Protocol):
    """Simulation ground truth exposing the nuisance functions on the original scale."""

    d: int

    def pi(self, x: ArrayLike) -> NDArray[np.float64]: ...

    def mu0(self, x: ArrayLike) -> NDArray[np.float64]: ...

    def tau(self, x: ArrayLike) -> NDArray[np.float64]: ...

    def eta(self, x: ArrayLike) -> NDArray[np.float64]: ...

    def density(self, x: ArrayLike) -> NDArray[np.float64]: ...


@dataclass(frozen=True)
class NuisanceConfig:
    """How the nuisances are obtained.

    ``mode="known"`` plugs in the truth and skips the sample split.
    Degrees default to ``strict_floor`` of the declared smoothness and
    bandwidths to ``n_train^{-1/(2 s + d)}``.
    """

    mode: Literal["estimated", "known"] = "estimated"
    parametrization: Literal["mu0", "eta"] = "mu0"
    pi_smoothness: float = 1.0
    outcome_smoothness: float = 1.0
    pi_degree: int | None = None
    outcome_degree: int | None = None
    pi_bandwidth: float | None = None
    outcome_bandwidth: float | None = None
    clip: float = 0.01
    covariate_mode: Literal["known", "histogram"] = "known"
    histogram_cells: int | None = None
    train_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.mode not in ("estimated", "known"):
            raise ConfigError(f"unknown nuisance mode {self.mode!r}")
        if self.parametrization not in ("mu0", "eta"):
            raise ConfigError(f"unknown parametrization {self.parametrization!r}")
        if not 0 <= self.clip < 0.5:
            raise ConfigError("clip must lie in [0, 1/2)")


@dataclass(frozen=True)
class NuisanceFit:
    pi: Function
    outcome: Function
    parametrization: Literal["mu0", "eta"]
    covariate: WindowMeasure
    metadata: dict = field(default_factory=dict)


def _bandwidth(value: float | None, n: int, smoothness: float, d: int) -> float:
    return value if value is not None else float(n) ** (-1.0 / (2 * smoothness + d))


def fit_nuisances(
    train: Dataset,
    config: NuisanceConfig,
    frame: LocalizedFrame,
    truth: Truth | None = None,
) -> NuisanceFit:
    """Fit propensity, outcome regression and window measure on ``train``."""
    d = train.d
    pi_deg = config.pi_degree if config.pi_degree is not None else max(strict_floor(config.pi_smoothness), 0)
    out_deg = (
        config.outcome_degree
        if config.outcome_degree is not None
        else max(strict_floor(config.outcome_smoothness), 0)
    )
    n_pi = train.n
    n_out = int(np.sum(train.a == 0)) if config.parametrization == "mu0" else train.n
    pi_bw = _bandwidth(config.pi_bandwidth, n_pi, config.pi_smoothness, d)
    out_bw = _bandwidth(config.outcome_bandwidth, max(n_out, 1), config.outcome_smoothness, d)
    clip = (config.clip, 1 - config.clip) if config.clip > 0 else None
    pi_fit = fit_local_polynomial(train, "propensity", pi_deg, pi_bw, clip)
    target: Target = "control" if config.parametrization == "mu0" else "marginal"
    out_fit = fit_local_polynomial(train, target, out_deg, out_bw)
    cov = _covariate_measure(train, config, frame, truth)
    meta = {
        "pi_degree": pi_deg,
        "pi_bandwidth": pi_bw,
        "outcome_degree": out_deg,
        "outcome_bandwidth": out_bw,
        "covariate_mode": config.covariate_mode,
    }
    return NuisanceFit(pi_fit, out_fit, config.parametrization, cov, meta)


def _covariate_measure(train, config, frame, truth) -> WindowMeasure:
    if config.covariate_mode == "known":
        if truth is None:
            raise ConfigError("known covariate mode needs the true density")
        return fit_covariate_distribution(
            None, "known", frame, truth.density, breakpoints_x=getattr(truth, "breakpoints", None)
        )
    cells = config.histogram_cells
    if cells is None:
        n_w = int(np.sum(frame.in_window(train.x)))
        cells = max(1, int(np.floor(max(n_w, 1) ** (1.0 / (frame.d + 2)))))
    return fit_covariate_distribution(train, "histogram", frame, cells=cells)


def known_nuisances(
    truth: Truth, frame: LocalizedFrame, parametrization: Literal["mu0", "eta"] = "mu0"
) -> NuisanceFit:
    """Bundle the true nuisance functions (no fitting, no clipping)."""
    outcome = truth.mu0 if parametrization == "mu0" else truth.eta
    cov = fit_covariate_distribution(
        None, "known", frame, truth.density, breakpoints_x=getattr(truth, "breakpoints", None)
    )
    return NuisanceFit(truth.pi, outcome, parametrization, cov, {"mode": "known"})


# -- diagnostics -------------------------------------------------------------------


@dataclass(frozen=True)
class NuisanceErrors:
    pi_error: float
    outcome_error: float
    density_ratio_error: float

    def to_dict(self) -> dict:
        return {
            "pi_error": self.pi_error,
            "outcome_error": self.outcome_error,
            "density_ratio_error": self.density_ratio_error,
        }


def nuisance_error_probe(
    fit: NuisanceFit,
    truth: Truth,
    frame: LocalizedFrame,
    order: int = 8,
    grid_size: int = 64,
) -> NuisanceErrors:
    """Window-restricted L2 errors of the nuisances and the sup density-ratio error.

    The L2 norms are taken under the stretched true covariate measure, by
    composite Gauss quadrature on about ``grid_size`` panels in total.
    """
    true_cov = fit_covariate_distribution(
        None, "known", frame, truth.density, breakpoints_x=getattr(truth, "breakpoints", None)
    )
    panels = np.linspace(0.0, 1.0, max(1, int(round(grid_size ** (1.0 / frame.d)))) + 1)
    extra = [np.union1d(e, panels) for e in fit.covariate.breakpoints()]
    nodes, w = true_cov.quadrature(order, extra)
    x = frame.unstretch(nodes)
    outcome_truth = truth.mu0 if fit.parametrization == "mu0" else truth.eta
    pi_err = np.sqrt(np.sum(w * (np.asarray(fit.pi(x)) - truth.pi(x)) ** 2))
    out_err = np.sqrt(np.sum(w * (np.asarray(fit.outcome(x)) - outcome_truth(x)) ** 2))
    axes = [(np.arange(grid_size) + 0.5) / grid_size] * frame.d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, frame.d)
    true_dens = true_cov.density(grid)
    pos = true_dens > 0
    ratio = fit.covariate.density(grid[pos]) / true_dens[pos]
    ratio_err = float(np.max(np.abs(ratio - 1))) if ratio.size else 0.0
    return NuisanceErrors(float(pi_err), float(out_err), ratio_err)
