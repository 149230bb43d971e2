"""Higher-order local polynomial R-Learner for the CATE at a single point.

The estimate is ``rho(1/2)^T Q^{-1} R`` where ``Q`` and ``R`` are first-order
sample averages plus second-order U-statistic corrections over ordered
pairs. The second-order terms project residuals onto a localized basis
``b`` whose Gram matrix under the (stretched) covariate measure is Omega.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .basis import (
    LocalizedFrame,
    PiecewiseCubeBasis,
    TensorBasisSpec,
    eval_localized_basis,
    graded_lex_indices,
    partition_basis,
    strict_floor,
)
from .data import Dataset
from .errors import ConfigError, DegenerateFitError, SingularMatrixError
from .hellinger import minimax_exponent
from .nuisance import (
    NuisanceConfig,
    NuisanceFit,
    Truth,
    WindowMeasure,
    fit_covariate_distribution,
    fit_nuisances,
    known_nuisances,
    split,
)

__all__ = [
    "EstimatorConfig",
    "build_second_basis",
    "OmegaHat",
    "omega_hat",
    "WindowTerms",
    "window_terms",
    "assemble_first_order",
    "assemble_second_order",
    "second_order_naive",
    "FitResult",
    "solve_guarded",
    "fit_with_nuisance",
    "estimate_cate",
    "prepare_nuisance",
    "ProjectionResult",
    "projection_oracle",
    "Tuning",
    "tuning_rule",
]


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator settings.

    ``k`` is the length of the second-order basis. With ``basis="partition"``
    it must equal ``cells^d`` times the number of local polynomial terms of
    degree ``b_degree``; with ``basis="legendre"`` it must be a tensor
    Legendre length ``binom(d + m, m)``.

    ``q2_factor`` chooses which observation supplies the right-hand
    ``rho`` factor in the second-order part of ``Q``: ``"x2"`` (the default)
    uses the partner observation, ``"x1"`` repeats the first one.
    """

    x0: tuple[float, ...]
    h: float
    gamma: float
    k: int = 1
    parametrization: Literal["mu0", "eta"] = "mu0"
    basis: Literal["partition", "legendre"] = "partition"
    b_degree: int = 0
    eigen_floor: float = 1e-8
    q2_factor: Literal["x2", "x1"] = "x2"
    second_order: bool = True
    quad_order: int = 8
    block_size: int = 4096
    clip_range: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x0", tuple(float(c) for c in np.atleast_1d(self.x0)))
        if self.parametrization not in ("mu0", "eta"):
            raise ConfigError(f"unknown parametrization {self.parametrization!r}")
        if self.basis not in ("partition", "legendre"):
            raise ConfigError(f"unknown basis {self.basis!r}")
        if self.q2_factor not in ("x1", "x2"):
            raise ConfigError("q2_factor must be 'x1' or 'x2'")
        if self.k < 1 or self.gamma <= 0 or self.eigen_floor < 0:
            raise ConfigError("k, gamma must be positive and eigen_floor non-negative")
        build_second_basis(self)  # validates k

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def frame(self) -> LocalizedFrame:
        return LocalizedFrame(self.x0, self.h)

    @property
    def rho(self) -> TensorBasisSpec:
        return TensorBasisSpec.from_smoothness(self.d, self.gamma)

    @property
    def q(self) -> int:
        return self.rho.q

    def to_dict(self) -> dict:
        out = asdict(self)
        out["x0"] = list(self.x0)
        return out


def build_second_basis(config: EstimatorConfig):
    """The basis ``b`` on [0,1]^d with exactly ``config.k`` functions."""
    d = len(config.x0)
    if config.basis == "legendre":
        m = 0
        while math.comb(d + m, m) < config.k:
            m += 1
        if math.comb(d + m, m) != config.k:
            raise ConfigError(f"k={config.k} is not a tensor Legendre length in d={d}")
        return TensorBasisSpec(d, m)
    local = math.comb(d + config.b_degree, config.b_degree)
    if config.k % local:
        raise ConfigError(f"k={config.k} not divisible by the local block length {local}")
    cells = config.k // local
    j = int(round(cells ** (1.0 / d)))
    if j**d != cells:
        raise ConfigError(f"k/{local}={cells} is not a perfect {d}-th power")
    return partition_basis(j, d, config.b_degree)


# -- Omega ---------------------------------------------------------------------


@dataclass(frozen=True)
class OmegaHat:
    """Gram matrix and inverse, stored densely or as per-cube diagonal blocks."""

    eig_min: float
    eig_max: float
    dense_matrix: NDArray[np.float64] | None = None
    dense_inverse: NDArray[np.float64] | None = None
    blocks: NDArray[np.float64] | None = None
    inverse_blocks: NDArray[np.float64] | None = None

    @property
    def blockwise(self) -> bool:
        return self.blocks is not None

    @property
    def matrix(self) -> NDArray[np.float64]:
        if self.dense_matrix is not None:
            return self.dense_matrix
        return linalg.block_diag(*self.blocks)

    @property
    def inverse(self) -> NDArray[np.float64]:
        if self.dense_inverse is not None:
            return self.dense_inverse
        return linalg.block_diag(*self.inverse_blocks)

    @property
    def condition(self) -> float:
        return self.eig_max / self.eig_min if self.eig_min > 0 else math.inf

    def diagnostics(self) -> dict:
        return {"eig_min": self.eig_min, "eig_max": self.eig_max, "condition": self.condition}


def _eigen_guard(eig_min: float, trace: float, k: int, eigen_floor: float) -> None:
    floor = eigen_floor * max(trace, 0.0) / k
    if eig_min <= floor:
        raise SingularMatrixError(
            f"Omega smallest eigenvalue {eig_min:.3e} below floor {floor:.3e}",
            {"eig_min": float(eig_min), "floor": float(floor)},
        )


def omega_hat(
    measure: WindowMeasure, basis, eigen_floor: float = 1e-8, order: int | None = None
) -> OmegaHat:
    """Gram matrix of ``basis`` under the stretched covariate measure, with a guarded inverse.

    Quadrature cells are aligned with both the basis pieces and the measure's
    own breakpoints, so piecewise-polynomial integrands are integrated exactly.
    A piecewise basis gives a block-diagonal Gram matrix, which is kept in
    block form.
    """
    piecewise = isinstance(basis, PiecewiseCubeBasis)
    deg = basis.local.degree if piecewise else basis.degree
    nodes, w = measure.quadrature(max(order or 0, deg + 1), basis.breakpoints())
    if piecewise:
        owner, local = basis.evaluate_sparse(nodes)
        keep = owner >= 0
        ql = basis.local.q
        blocks = np.zeros((basis.n_cubes, ql, ql))
        np.add.at(blocks, owner[keep], w[keep, None, None] * local[keep, :, None] * local[keep, None, :])
        blocks = 0.5 * (blocks + np.swapaxes(blocks, 1, 2))
        eig = np.linalg.eigvalsh(blocks)
        _eigen_guard(float(eig.min()), float(np.trace(blocks, axis1=1, axis2=2).sum()), basis.size, eigen_floor)
        inv = np.linalg.inv(blocks)
        return OmegaHat(
            float(eig.min()), float(eig.max()), blocks=blocks, inverse_blocks=0.5 * (inv + np.swapaxes(inv, 1, 2))
        )
    vals = basis.evaluate(nodes)
    gram = vals.T @ (w[:, None] * vals)
    gram = 0.5 * (gram + gram.T)
    eig = np.linalg.eigvalsh(gram)
    k = gram.shape[0]
    _eigen_guard(float(eig[0]), float(np.trace(gram)), k, eigen_floor)
    chol = linalg.cho_factor(gram, lower=True)
    inverse = linalg.cho_solve(chol, np.eye(k))
    return OmegaHat(float(eig[0]), float(eig[-1]), dense_matrix=gram, dense_inverse=0.5 * (inverse + inverse.T))


# -- per-observation terms ---------------------------------------------------------


@dataclass(frozen=True)
class WindowTerms:
    """Quantities needed by the assembly, restricted to in-window observations.

    ``kernel`` holds ``K_h``; ``lead`` is the treatment residual multiplying
    the left ``rho``; ``treat`` and ``resid`` are the partner-side factors
    for ``Q`` and ``R``; ``phi_a1`` and ``phi_y1`` are the first-order weights.
    """

    n: int
    rho: NDArray[np.float64]
    b: NDArray[np.float64]
    kernel: float
    lead: NDArray[np.float64]
    treat: NDArray[np.float64]
    resid: NDArray[np.float64]
    phi_a1: NDArray[np.float64]
    phi_y1: NDArray[np.float64]
    b_size: int = 0
    b_cell: NDArray[np.intp] | None = None
    b_local: NDArray[np.float64] | None = None

    @property
    def n_window(self) -> int:
        return self.rho.shape[0]

    def dense_b(self) -> NDArray[np.float64]:
        if self.b is not None:
            return self.b
        ql = self.b_local.shape[1]
        out = np.zeros((self.n_window, self.b_size))
        rows = np.nonzero(self.b_cell >= 0)[0]
        out[rows[:, None], self.b_cell[rows, None] * ql + np.arange(ql)] = self.b_local[rows]
        return out


def window_terms(data: Dataset, nuisance: NuisanceFit, config: EstimatorConfig, basis=None) -> WindowTerms:
    frame = config.frame
    if data.d != config.d:
        raise ConfigError("data dimension does not match x0")
    inside = frame.in_window(data.x)
    xw = data.x[inside]
    aw, yw = data.a[inside], data.y[inside]
    basis = basis if basis is not None else build_second_basis(config)
    rho = eval_localized_basis(config.rho, frame, xw)
    if isinstance(basis, PiecewiseCubeBasis):
        bvals = None
        b_cell, b_local = basis.evaluate_sparse(frame.stretch(xw) if xw.shape[0] else np.empty((0, config.d)))
    else:
        bvals = eval_localized_basis(basis, frame, xw)
        b_cell = b_local = None
    if xw.shape[0]:
        pi_hat = np.asarray(nuisance.pi(xw), float)
        out_hat = np.asarray(nuisance.outcome(xw), float)
    else:
        pi_hat = out_hat = np.empty(0)
    lead = aw - pi_hat
    resid = yw - out_hat
    if config.parametrization == "mu0":
        phi_a1, treat = aw * lead, aw
    else:
        phi_a1, treat = lead**2, lead
    return WindowTerms(
        n=data.n,
        rho=rho,
        b=bvals,
        kernel=frame.h ** (-frame.d),
        lead=lead,
        treat=treat,
        resid=resid,
        phi_a1=phi_a1,
        phi_y1=resid * lead,
        b_size=basis.size,
        b_cell=b_cell,
        b_local=b_local,
    )


def assemble_first_order(
    data: Dataset | WindowTerms, nuisance: NuisanceFit | None = None, config: EstimatorConfig | None = None
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Sample averages of ``rho K phi_a1 rho^T`` and ``rho K phi_y1`` over all observations."""
    t = data if isinstance(data, WindowTerms) else window_terms(data, nuisance, config)
    q = t.rho.shape[1]
    if t.n == 0 or t.n_window == 0:
        return np.zeros((q, q)), np.zeros(q)
    scale = t.kernel / t.n
    q1 = (t.rho * (scale * t.phi_a1)[:, None]).T @ t.rho
    r1 = t.rho.T @ (scale * t.phi_y1)
    return q1, r1


def assemble_second_order(
    data: Dataset | WindowTerms,
    nuisance: NuisanceFit | None,
    omega_inv: NDArray[np.float64] | OmegaHat,
    config: EstimatorConfig,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Second-order U-statistic terms over ordered pairs ``i != j``.

    The full double sum factorizes through the k-vectors ``b_i``; the
    diagonal ``i = j`` is then subtracted, giving cost linear in the window
    size. ``omega_inv`` may be a dense inverse or an :class:`OmegaHat`;
    block-diagonal inverses paired with a piecewise basis only couple
    observations sharing a cube.
    """
    t = data if isinstance(data, WindowTerms) else window_terms(data, nuisance, config)
    n = t.n
    if n < 2:
        raise ConfigError("second-order terms need at least two observations")
    q = t.rho.shape[1]
    if t.n_window == 0:
        return np.zeros((q, q)), np.zeros(q)
    kk = t.kernel
    u = kk * t.lead  # left factor, kernel included
    a2 = kk * t.treat
    y2 = kk * t.resid
    if isinstance(omega_inv, OmegaHat) and omega_inv.blockwise and t.b_cell is not None:
        q2, r2 = _second_order_blocks(t, omega_inv.inverse_blocks, u, a2, y2, config.q2_factor)
    else:
        dense = omega_inv.inverse if isinstance(omega_inv, OmegaHat) else omega_inv
        q2, r2 = _second_order_dense(t, dense, u, a2, y2, config)
    norm = -1.0 / (n * (n - 1))
    return norm * q2, norm * r2


def _second_order_dense(t: WindowTerms, omega_inv, u, a2, y2, config: EstimatorConfig):
    b = t.dense_b()
    q = t.rho.shape[1]
    s_y = b.T @ y2  # (k,)
    s_a = b.T @ (a2[:, None] * t.rho)  # (k, q)
    s_a_vec = b.T @ a2  # (k,), used by the x1 variant
    q2 = np.zeros((q, q))
    r2 = np.zeros(q)
    bs = max(1, config.block_size)
    for start in range(0, t.n_window, bs):
        sl = slice(start, start + bs)
        b_blk = b[sl]
        bm = b_blk @ omega_inv  # (m, k)
        diag = np.einsum("ij,ij->i", bm, b_blk)  # b_i^T M b_i
        rho_blk = t.rho[sl]
        u_blk = u[sl]
        r2 += rho_blk.T @ (u_blk * (bm @ s_y - diag * y2[sl]))
        if config.q2_factor == "x2":
            left = rho_blk * u_blk[:, None]
            q2 += left.T @ (bm @ s_a) - (left * (diag * a2[sl])[:, None]).T @ rho_blk
        else:
            coef = u_blk * (bm @ s_a_vec - diag * a2[sl])
            q2 += (rho_blk * coef[:, None]).T @ rho_blk
    return q2, r2


def _second_order_blocks(t: WindowTerms, inverse_blocks, u, a2, y2, q2_factor: str):
    cells, slot = np.unique(t.b_cell, return_inverse=True)
    if cells[0] < 0:
        raise ConfigError("in-window observation outside every basis cube")
    bl = t.b_local
    bm = np.einsum("ij,ijk->ik", bl, inverse_blocks[cells][slot])  # b_i^T M_c
    diag = np.einsum("ij,ij->i", bm, bl)
    m = cells.size
    s_y = np.zeros((m, bl.shape[1]))
    np.add.at(s_y, slot, bl * y2[:, None])
    r2 = t.rho.T @ (u * (np.einsum("ij,ij->i", bm, s_y[slot]) - diag * y2))
    if q2_factor == "x2":
        s_a = np.zeros((m, bl.shape[1], t.rho.shape[1]))
        np.add.at(s_a, slot, bl[:, :, None] * (a2[:, None] * t.rho)[:, None, :])
        left = t.rho * u[:, None]
        full = np.einsum("ik,ikq->iq", bm, s_a[slot])
        q2 = left.T @ full - (left * (diag * a2)[:, None]).T @ t.rho
    else:
        s_av = np.zeros((m, bl.shape[1]))
        np.add.at(s_av, slot, bl * a2[:, None])
        coef = u * (np.einsum("ij,ij->i", bm, s_av[slot]) - diag * a2)
        q2 = (t.rho * coef[:, None]).T @ t.rho
    return q2, r2


def second_order_naive(
    data: Dataset, nuisance: NuisanceFit, omega_inv: NDArray[np.float64], config: EstimatorConfig
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Reference double loop over every ordered pair, kernels evaluated per pair."""
    frame = config.frame
    basis = build_second_basis(config)
    n = data.n
    q = config.q
    rho = eval_localized_basis(config.rho, frame, data.x)
    bvals = eval_localized_basis(basis, frame, data.x)
    kern = np.asarray(frame.kernel_weight(data.x), float)
    pi_hat = np.asarray(nuisance.pi(data.x), float)
    out_hat = np.asarray(nuisance.outcome(data.x), float)
    q2 = np.zeros((q, q))
    r2 = np.zeros(q)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            proj = bvals[i] @ omega_inv @ bvals[j]
            lead = data.a[i] - pi_hat[i]
            if config.parametrization == "mu0":
                phi_a2 = -lead * proj * data.a[j]
            else:
                phi_a2 = -lead * proj * (data.a[j] - pi_hat[j])
            phi_y2 = -lead * proj * (data.y[j] - out_hat[j])
            right = rho[j] if config.q2_factor == "x2" else rho[i]
            q2 += np.outer(rho[i] * kern[i] * phi_a2 * kern[j], right)
            r2 += rho[i] * kern[i] * phi_y2 * kern[j]
    return q2 / (n * (n - 1)), r2 / (n * (n - 1))


# -- solving ---------------------------------------------------------------------


def solve_guarded(
    matrix: NDArray[np.float64], rhs: NDArray[np.float64], eigen_floor: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """LU solve that first rejects near-singular matrices.

    Returns the solution and the singular values of ``matrix``.
    """
    sv = np.linalg.svd(matrix, compute_uv=False)
    q = matrix.shape[0]
    floor = eigen_floor * abs(np.trace(matrix)) / q
    if not np.all(np.isfinite(sv)) or sv[-1] <= floor:
        raise SingularMatrixError(
            f"Q smallest singular value {sv[-1]:.3e} below floor {floor:.3e}",
            {"sigma_min": float(sv[-1]), "floor": float(floor)},
        )
    return linalg.lu_solve(linalg.lu_factor(matrix), rhs), sv


@dataclass(frozen=True)
class FitResult:
    tau_hat: float
    Q: NDArray[np.float64]
    R: NDArray[np.float64]
    Q1: NDArray[np.float64]
    R1: NDArray[np.float64]
    Q2: NDArray[np.float64]
    R2: NDArray[np.float64]
    coefficients: NDArray[np.float64]
    rho_center: NDArray[np.float64]
    q_singular_values: NDArray[np.float64]
    omega: dict
    n_estimation: int
    n_window: int
    pair_count: int
    config: dict = field(default_factory=dict)
    nuisance: dict = field(default_factory=dict)

    def recompute(self) -> float:
        """Re-derive the estimate from the stored ``Q`` and ``R``."""
        return float(self.rho_center @ np.linalg.solve(self.Q, self.R))

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        return {k: conv(v) for k, v in asdict(self).items()}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def fit_with_nuisance(
    data: Dataset, nuisance: NuisanceFit, config: EstimatorConfig
) -> FitResult:
    """Assemble and solve on an estimation sample with already-fitted nuisances."""
    if nuisance.parametrization != config.parametrization:
        raise ConfigError("nuisance and estimator parametrizations differ")
    basis = build_second_basis(config)
    terms = window_terms(data, nuisance, config, basis)
    if terms.n_window == 0:
        raise DegenerateFitError("no estimation observations inside the window")
    if terms.n_window < config.q:
        raise SingularMatrixError(
            f"window holds {terms.n_window} observations, fewer than q={config.q}",
            {"n_window": terms.n_window, "q": config.q},
        )
    q1, r1 = assemble_first_order(terms)
    omega_diag: dict = {}
    if config.second_order:
        om = omega_hat(nuisance.covariate, basis, config.eigen_floor, config.quad_order)
        q2, r2 = assemble_second_order(terms, None, om, config)
        omega_diag = om.diagnostics()
    else:
        q2, r2 = np.zeros_like(q1), np.zeros_like(r1)
    Q, R = q1 + q2, r1 + r2
    coef, sv = solve_guarded(Q, R, config.eigen_floor)
    rho_c = config.rho.evaluate(np.full(config.d, 0.5))
    tau = float(rho_c @ coef)
    if config.clip_range is not None:
        tau = float(np.clip(tau, *config.clip_range))
    return FitResult(
        tau_hat=tau,
        Q=Q,
        R=R,
        Q1=q1,
        R1=r1,
        Q2=q2,
        R2=r2,
        coefficients=coef,
        rho_center=rho_c,
        q_singular_values=sv,
        omega=omega_diag,
        n_estimation=data.n,
        n_window=terms.n_window,
        pair_count=terms.n_window * (terms.n_window - 1),
        config=config.to_dict(),
        nuisance=dict(nuisance.metadata),
    )


def estimate_cate(
    data: Dataset,
    nuisance_config: NuisanceConfig,
    config: EstimatorConfig,
    seed: int | None = None,
    truth: Truth | None = None,
) -> FitResult:
    """Full pipeline: split, fit nuisances on the training part, estimate on the rest.

    With ``nuisance_config.mode == "known"`` the true nuisances from ``truth``
    are used and every observation goes to the estimation step.
    """
    if nuisance_config.parametrization != config.parametrization:
        raise ConfigError("nuisance and estimator parametrizations differ")
    fit, est = prepare_nuisance(data, nuisance_config, config.frame, seed, truth)
    return fit_with_nuisance(est, fit, config)


def prepare_nuisance(
    data: Dataset,
    nuisance_config: NuisanceConfig,
    frame: LocalizedFrame,
    seed: int | None = None,
    truth: Truth | None = None,
) -> tuple[NuisanceFit, Dataset]:
    """Nuisance bundle and the estimation sample it should be paired with."""
    if nuisance_config.mode == "known":
        if truth is None:
            raise ConfigError("known nuisance mode needs the truth")
        return known_nuisances(truth, frame, nuisance_config.parametrization), data
    plan = split(data, nuisance_config.train_fraction, seed)
    train, est = data.subset(plan.train), data.subset(plan.estimation)
    return fit_nuisances(train, nuisance_config, frame, truth), est


# -- oracle projection ------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionResult:
    tau_h: float
    theta: NDArray[np.float64]
    Q: NDArray[np.float64]
    R: NDArray[np.float64]

    @property
    def S(self) -> NDArray[np.float64]:
        """Moment residual ``R - Q theta``; zero up to round-off."""
        return self.R - self.Q @ self.theta


def projection_oracle(
    pi: Callable,
    tau: Callable,
    density: Callable,
    frame: LocalizedFrame,
    gamma: float,
    order: int = 24,
    breakpoints_x=None,
    eigen_floor: float = 1e-10,
) -> ProjectionResult:
    """Weighted least-squares projection of ``tau`` onto the localized Legendre basis.

    Weights are ``K_h pi (1 - pi) f``; integrals use composite Gauss
    quadrature on the window in stretched coordinates.
    """
    rho = TensorBasisSpec.from_smoothness(frame.d, gamma)
    measure = fit_covariate_distribution(None, "known", frame, density, breakpoints_x=breakpoints_x)
    nodes, w = measure.quadrature(order)
    x = frame.unstretch(nodes)
    p = np.asarray(pi(x), float)
    weight = w * p * (1 - p)
    vals = rho.evaluate(nodes)
    Q = vals.T @ (weight[:, None] * vals)
    R = vals.T @ (weight * np.asarray(tau(x), float))
    eig = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    if eig[0] <= eigen_floor * max(np.trace(Q), 0.0) / Q.shape[0]:
        raise SingularMatrixError(f"projection Gram matrix singular (eig_min={eig[0]:.3e})")
    theta = np.linalg.solve(Q, R)
    tau_h = float(rho.evaluate(np.full(frame.d, 0.5)) @ theta)
    return ProjectionResult(tau_h, theta, Q, R)


# -- tuning -----------------------------------------------------------------------


@dataclass(frozen=True)
class Tuning:
    h: float
    k: int
    cells_per_axis: int
    regime: str
    h_unclipped: float
    k_real: float


def tuning_rule(
    n: float,
    alpha: float,
    beta: float,
    gamma: float,
    d: int,
    parametrization: str = "mu0",
    c_h: float = 1.0,
    c_k: float = 1.0,
    b_degree: int = 0,
) -> Tuning:
    """Rate-balancing bandwidth and second-order basis size.

    Below the elbow ``h ~ n^{-(1/gamma)/D}`` and ``k ~ n^{(d/2s - d/gamma)/D}``
    with ``D = 1 + d/(2 gamma) + d/(4 s)``; above it ``h ~ n^{-1/(2 gamma + d)}``
    and ``k ~ n h^d``. ``k`` is rounded to the nearest partition size
    ``cells^d`` (times the local block length) and is at least one block.
    """
    rate = minimax_exponent(alpha, beta, gamma, d, parametrization)
    s = rate.effective_s
    if rate.regime_label == "low_smoothness":
        denom = 1 + d / (2 * gamma) + d / (4 * s)
        h_raw = c_h * n ** (-(1 / gamma) / denom)
        k_real = c_k * n ** ((d / (2 * s) - d / gamma) / denom)
    else:
        h_raw = c_h * n ** (-1 / (2 * gamma + d))
        k_real = c_k * n * min(h_raw, 1.0) ** d
    h = min(h_raw, 1.0)
    local = math.comb(d + b_degree, b_degree)
    cells = max(1, int(round((max(k_real, 1.0) / local) ** (1.0 / d))))
    return Tuning(h, cells**d * local, cells, rate.regime_label, h_raw, k_real)
