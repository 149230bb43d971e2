"""Orthonormal polynomial bases on the unit cube and their localized versions.

Everything here works on arrays of points with shape ``(n, d)``; a single
point may be passed as a 1-D array of length ``d`` and yields a 1-D result.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigError

__all__ = [
    "strict_floor",
    "legendre_shifted",
    "legendre_table",
    "graded_lex_indices",
    "TensorBasisSpec",
    "eval_tensor_basis",
    "LocalizedFrame",
    "kernel_weight",
    "eval_localized_basis",
    "Cube",
    "PiecewiseCubeBasisSpec",
    "PiecewiseCubeBasis",
    "build_piecewise_cube_basis",
    "partition_basis",
    "integer_root",
    "gauss_unit",
    "tensor_gauss",
    "grid_quadrature",
]


def strict_floor(x: float) -> int:
    """Largest integer strictly smaller than ``x``."""
    return int(math.ceil(x)) - 1


def legendre_shifted(m: int, u: ArrayLike) -> NDArray[np.float64] | float:
    """Orthonormal shifted Legendre polynomial of degree ``m`` on [0, 1].

    Evaluated from its explicit power-series coefficients. For stable batch
    evaluation of many degrees at once use :func:`legendre_table`.
    """
    if m < 0:
        raise ValueError("degree must be non-negative")
    u = np.asarray(u, dtype=float)
    coeffs = [
        (-1) ** (ell + m) * math.comb(m, ell) * math.comb(m + ell, ell)
        for ell in range(m + 1)
    ]
    # Horner from the top coefficient down.
    acc = np.zeros_like(u)
    for c in reversed(coeffs):
        acc = acc * u + c
    out = math.sqrt(2 * m + 1) * acc
    return float(out) if out.ndim == 0 else out


def legendre_table(max_degree: int, u: ArrayLike) -> NDArray[np.float64]:
    """Values of degrees ``0..max_degree`` stacked on a new last axis.

    Uses Bonnet's three-term recurrence in ``t = 2u - 1``.
    """
    u = np.asarray(u, dtype=float)
    t = 2.0 * u - 1.0
    out = np.empty(u.shape + (max_degree + 1,))
    p_prev = np.ones_like(t)
    out[..., 0] = 1.0
    if max_degree >= 1:
        p_cur = t.copy()
        out[..., 1] = math.sqrt(3.0) * p_cur
        for m in range(1, max_degree):
            p_next = ((2 * m + 1) * t * p_cur - m * p_prev) / (m + 1)
            p_prev, p_cur = p_cur, p_next
            out[..., m + 1] = math.sqrt(2 * m + 3) * p_cur
    return out


@lru_cache(maxsize=None)
def graded_lex_indices(d: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Multi-indices of total degree <= ``degree`` in graded-lex order.

    Sorted by total degree first; within a degree, lexicographically
    descending, so for ``d = 2`` the order starts (0,0), (1,0), (0,1), (2,0).
    """
    idx = [
        alpha
        for alpha in itertools.product(range(degree + 1), repeat=d)
        if sum(alpha) <= degree
    ]
    idx.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    return tuple(idx)


def _as_points(x: ArrayLike, d: int) -> tuple[NDArray[np.float64], bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ConfigError(f"expected points of dimension {d}, got shape {np.shape(x)}")
    return arr, single


class Basis(Protocol):
    """Anything with a dimension, a length and a vectorized evaluator on [0,1]^d."""

    d: int

    @property
    def size(self) -> int: ...

    def evaluate(self, v: ArrayLike) -> NDArray[np.float64]: ...

    def breakpoints(self) -> list[NDArray[np.float64]]: ...


@dataclass(frozen=True)
class TensorBasisSpec:
    """Tensor shifted-Legendre basis of total degree <= ``degree`` in ``d`` variables."""

    d: int
    degree: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ConfigError("dimension must be positive")
        if self.degree < 0:
            raise ConfigError("degree must be non-negative")

    @classmethod
    def from_smoothness(cls, d: int, gamma: float) -> "TensorBasisSpec":
        return cls(d=d, degree=max(strict_floor(gamma), 0))

    @property
    def q(self) -> int:
        return math.comb(self.d + self.degree, self.degree)

    @property
    def size(self) -> int:
        return self.q

    @property
    def multi_indices(self) -> tuple[tuple[int, ...], ...]:
        return graded_lex_indices(self.d, self.degree)

    def evaluate(self, v: ArrayLike) -> NDArray[np.float64]:
        pts, single = _as_points(v, self.d)
        table = legendre_table(self.degree, pts)  # (n, d, degree+1)
        idx = np.asarray(self.multi_indices)  # (q, d)
        cols = np.arange(self.d)
        out = np.prod(table[:, cols[None, :], idx], axis=-1)  # (n, q)
        return out[0] if single else out

    def breakpoints(self) -> list[NDArray[np.float64]]:
        return [np.array([0.0, 1.0]) for _ in range(self.d)]


def eval_tensor_basis(spec: TensorBasisSpec, v: ArrayLike) -> NDArray[np.float64]:
    """Evaluate ``spec`` at ``v``; a single point gives a vector of length ``q``."""
    return spec.evaluate(v)


@dataclass(frozen=True)
class LocalizedFrame:
    """Sup-norm window of side ``h`` centred at ``x0`` and its stretch onto [0,1]^d.

    The window is the closed cube ``max_j |x_j - x0_j| <= h/2``.
    """

    x0: tuple[float, ...]
    h: float

    def __init__(self, x0: ArrayLike, h: float):
        x0_arr = np.atleast_1d(np.asarray(x0, dtype=float))
        if x0_arr.ndim != 1:
            raise ConfigError("x0 must be a point")
        if not (0.0 < h <= 1.0):
            raise ConfigError(f"bandwidth must lie in (0, 1], got {h}")
        object.__setattr__(self, "x0", tuple(float(c) for c in x0_arr))
        object.__setattr__(self, "h", float(h))

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def center(self) -> NDArray[np.float64]:
        return np.asarray(self.x0)

    def stretch(self, x: ArrayLike) -> NDArray[np.float64]:
        """Map ``x`` to ``1/2 + (x - x0)/h``."""
        pts, single = _as_points(x, self.d)
        v = 0.5 + (pts - self.center) / self.h
        return v[0] if single else v

    def unstretch(self, v: ArrayLike) -> NDArray[np.float64]:
        pts, single = _as_points(v, self.d)
        x = self.center + self.h * (pts - 0.5)
        return x[0] if single else x

    def in_window(self, x: ArrayLike) -> NDArray[np.bool_] | bool:
        pts, single = _as_points(x, self.d)
        inside = np.max(np.abs(pts - self.center), axis=1) <= self.h / 2
        return bool(inside[0]) if single else inside

    def kernel_weight(self, x: ArrayLike) -> NDArray[np.float64] | float:
        inside = self.in_window(x)
        scale = self.h ** (-self.d)
        if isinstance(inside, bool):
            return scale if inside else 0.0
        return np.where(inside, scale, 0.0)


def kernel_weight(frame: LocalizedFrame, x: ArrayLike) -> NDArray[np.float64] | float:
    """Box kernel: ``h^{-d}`` inside the window, 0 outside."""
    return frame.kernel_weight(x)


def eval_localized_basis(basis: Basis, frame: LocalizedFrame, x: ArrayLike) -> NDArray[np.float64]:
    """Evaluate ``basis`` at the stretched point, zeroed outside the window."""
    if basis.d != frame.d:
        raise ConfigError(f"basis dimension {basis.d} != frame dimension {frame.d}")
    pts, single = _as_points(x, frame.d)
    inside = frame.in_window(pts)
    out = np.zeros((pts.shape[0], basis.size))
    if np.any(inside):
        out[inside] = basis.evaluate(frame.stretch(pts[inside]))
    return out[0] if single else out


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube ``[lower, lower + side)`` in ``len(lower)`` dimensions."""

    lower: tuple[float, ...]
    side: float

    def __init__(self, lower: ArrayLike, side: float):
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        if side <= 0:
            raise ConfigError("cube side must be positive")
        object.__setattr__(self, "lower", tuple(float(c) for c in lo))
        object.__setattr__(self, "side", float(side))

    @classmethod
    def from_center(cls, center: ArrayLike, side: float) -> "Cube":
        return cls(np.asarray(center, dtype=float) - side / 2, side)

    @property
    def center(self) -> NDArray[np.float64]:
        return np.asarray(self.lower) + self.side / 2

    @property
    def volume(self) -> float:
        return self.side ** len(self.lower)

    def overlaps(self, other: "Cube", tol: float = 1e-12) -> bool:
        a, b = np.asarray(self.lower), np.asarray(other.lower)
        lo = np.maximum(a, b)
        hi = np.minimum(a + self.side, b + other.side)
        return bool(np.all(hi - lo > tol))


@dataclass(frozen=True)
class PiecewiseCubeBasisSpec:
    cubes: tuple[Cube, ...]
    degree: int = 0

    def __init__(self, cubes: Sequence[Cube], degree: int = 0):
        object.__setattr__(self, "cubes", tuple(cubes))
        object.__setattr__(self, "degree", int(degree))


@dataclass(frozen=True)
class PiecewiseCubeBasis:
    """Blockwise Legendre basis, one block per disjoint cube.

    Block ``j`` is ``vol_j^{-1/2} rho((v - lower_j)/side_j)`` on cube ``j`` and
    zero elsewhere, so blocks are orthonormal under Lebesgue measure on their
    cube. Cubes are half-open; a face lying on the unit-cube boundary is
    closed so that every point of [0,1]^d is covered by a partition.
    """

    spec: PiecewiseCubeBasisSpec
    grid_cells: int | None = None
    local: TensorBasisSpec = field(init=False)
    _lower: NDArray[np.float64] = field(init=False, repr=False)
    _side: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        cubes = self.spec.cubes
        if not cubes:
            raise ConfigError("at least one cube is required")
        d = len(cubes[0].lower)
        if any(len(c.lower) != d for c in cubes):
            raise ConfigError("cubes must share one dimension")
        lower = np.array([c.lower for c in cubes])
        side = np.array([c.side for c in cubes])
        if self.grid_cells is None:
            # Pairwise overlap check, vectorised over cube pairs.
            upper = lower + side[:, None]
            lo = np.maximum(lower[:, None, :], lower[None, :, :])
            hi = np.minimum(upper[:, None, :], upper[None, :, :])
            clash = np.all(hi - lo > 1e-12, axis=2)
            np.fill_diagonal(clash, False)
            if np.any(clash):
                i, j = np.argwhere(clash)[0]
                raise ConfigError(f"cubes {i} and {j} overlap")
        elif len(cubes) != self.grid_cells**d:
            raise ConfigError("grid_cells does not match the number of cubes")
        object.__setattr__(self, "local", TensorBasisSpec(d, self.spec.degree))
        object.__setattr__(self, "_lower", lower)
        object.__setattr__(self, "_side", side)

    @property
    def d(self) -> int:
        return self.local.d

    @property
    def n_cubes(self) -> int:
        return len(self.spec.cubes)

    @property
    def size(self) -> int:
        return self.n_cubes * self.local.q

    def membership(self, v: ArrayLike) -> NDArray[np.intp]:
        """Index of the cube containing each point, or -1."""
        pts, _ = _as_points(v, self.d)
        if self.grid_cells is not None:
            j = self.grid_cells
            inside = np.all((pts >= 0) & (pts <= 1), axis=1)
            idx = np.clip(np.floor(pts * j).astype(np.intp), 0, j - 1)
            flat = np.ravel_multi_index(tuple(idx.T), (j,) * self.d)
            return np.where(inside, flat, -1)
        upper = self._lower + self._side[:, None]
        closed_top = np.abs(upper - 1.0) < 1e-12
        ge = pts[:, None, :] >= self._lower[None] - 1e-15
        lt = (pts[:, None, :] < upper[None]) | (closed_top[None] & (pts[:, None, :] <= upper[None] + 1e-15))
        hit = np.all(ge & lt, axis=2)
        found = hit.any(axis=1)
        return np.where(found, np.argmax(hit, axis=1), -1)

    def evaluate_sparse(self, v: ArrayLike) -> tuple[NDArray[np.intp], NDArray[np.float64]]:
        """Owning cube per point (-1 if none) and the scaled local block values there."""
        pts, _ = _as_points(v, self.d)
        owner = self.membership(pts)
        local = np.zeros((pts.shape[0], self.local.q))
        rows = np.nonzero(owner >= 0)[0]
        if rows.size:
            j = owner[rows]
            u = np.clip((pts[rows] - self._lower[j]) / self._side[j, None], 0.0, 1.0)
            local[rows] = self.local.evaluate(u) * (self._side[j] ** (-self.d / 2))[:, None]
        return owner, local

    def evaluate(self, v: ArrayLike) -> NDArray[np.float64]:
        pts, single = _as_points(v, self.d)
        q = self.local.q
        out = np.zeros((pts.shape[0], self.size))
        owner, local = self.evaluate_sparse(pts)
        rows = np.nonzero(owner >= 0)[0]
        if rows.size:
            cols = owner[rows, None] * q + np.arange(q)[None, :]
            out[rows[:, None], cols] = local[rows]
        return out[0] if single else out

    def breakpoints(self) -> list[NDArray[np.float64]]:
        if self.grid_cells is not None:
            return [np.linspace(0.0, 1.0, self.grid_cells + 1) for _ in range(self.d)]
        edges = []
        for axis in range(self.d):
            e = np.concatenate([self._lower[:, axis], self._lower[:, axis] + self._side])
            edges.append(np.unique(np.clip(np.concatenate([e, [0.0, 1.0]]), 0.0, 1.0)))
        return edges


def build_piecewise_cube_basis(spec: PiecewiseCubeBasisSpec) -> PiecewiseCubeBasis:
    return PiecewiseCubeBasis(spec)


def integer_root(k: int, d: int) -> int:
    """Return ``j`` with ``j**d == k`` or raise."""
    j = int(round(k ** (1.0 / d)))
    for cand in (j - 1, j, j + 1):
        if cand >= 1 and cand**d == k:
            return cand
    raise ConfigError(f"{k} is not a perfect {d}-th power")


def partition_basis(cells_per_axis: int, d: int, degree: int = 0) -> PiecewiseCubeBasis:
    """Piecewise basis on the regular partition of [0,1]^d into ``cells_per_axis**d`` cubes."""
    if cells_per_axis < 1:
        raise ConfigError("need at least one cell per axis")
    side = 1.0 / cells_per_axis
    cubes = [
        Cube(np.asarray(corner, dtype=float) * side, side)
        for corner in itertools.product(range(cells_per_axis), repeat=d)
    ]
    return PiecewiseCubeBasis(PiecewiseCubeBasisSpec(cubes, degree), grid_cells=cells_per_axis)


@lru_cache(maxsize=64)
def _gauss_unit_cached(order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_unit(order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Legendre rule with ``order`` nodes on [0, 1]; exact to degree ``2*order-1``."""
    if order < 1:
        raise ValueError("order must be positive")
    return _gauss_unit_cached(order)


def tensor_gauss(
    d: int, order: int, lower: ArrayLike | None = None, upper: ArrayLike | None = None
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Tensor Gauss rule on a box (default the unit cube)."""
    lo = np.zeros(d) if lower is None else np.broadcast_to(np.asarray(lower, float), (d,))
    hi = np.ones(d) if upper is None else np.broadcast_to(np.asarray(upper, float), (d,))
    t, w = gauss_unit(order)
    axes = [lo[i] + (hi[i] - lo[i]) * t for i in range(d)]
    wts = [(hi[i] - lo[i]) * w for i in range(d)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    weights = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), axis=-1).reshape(-1, d), axis=1)
    return nodes, weights


def grid_quadrature(
    edges: Sequence[ArrayLike], order: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Composite tensor Gauss rule over the grid cells cut by per-axis ``edges``.

    Exact for integrands that are polynomials of per-axis degree
    ``<= 2*order-1`` on every grid cell.
    """
    t, w = gauss_unit(order)
    axes, wts = [], []
    for e in edges:
        e = np.unique(np.asarray(e, dtype=float))
        widths = np.diff(e)
        keep = widths > 0
        lo, widths = e[:-1][keep], widths[keep]
        axes.append((lo[:, None] + widths[:, None] * t[None, :]).ravel())
        wts.append((widths[:, None] * w[None, :]).ravel())
    d = len(axes)
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    weights = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), axis=-1).reshape(-1, d), axis=1)
    return nodes, weights
