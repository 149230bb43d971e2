import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from cate_minimax.basis import (
    Cube,
    LocalizedFrame,
    PiecewiseCubeBasisSpec,
    TensorBasisSpec,
    build_piecewise_cube_basis,
    eval_localized_basis,
    eval_tensor_basis,
    graded_lex_indices,
    grid_quadrature,
    integer_root,
    kernel_weight,
    legendre_shifted,
    legendre_table,
    partition_basis,
    strict_floor,
    tensor_gauss,
)
from cate_minimax.errors import ConfigError


def numpy_shifted_legendre(m, u):
    coef = np.zeros(m + 1)
    coef[m] = 1.0
    return math.sqrt(2 * m + 1) * npleg.legval(2 * np.asarray(u) - 1, coef)


@pytest.mark.parametrize(
    "m,u,expected", [(0, 0.37, 1.0), (1, 0.5, 0.0), (2, 0.0, math.sqrt(5))]
)
def test_legendre_known_values(m, u, expected):
    assert legendre_shifted(m, u) == pytest.approx(expected, abs=1e-14)


def test_legendre_matches_numpy_and_recurrence():
    u = np.linspace(0, 1, 57)
    table = legendre_table(8, u)
    for m in range(9):
        ref = numpy_shifted_legendre(m, u)
        np.testing.assert_allclose(legendre_shifted(m, u), ref, atol=1e-10)
        np.testing.assert_allclose(table[:, m], ref, atol=1e-10)


@pytest.mark.parametrize("x,expected", [(2.0, 1), (2.5, 2), (1.0, 0), (0.3, 0), (3.0001, 3)])
def test_strict_floor(x, expected):
    assert strict_floor(x) == expected


def test_basis_length_is_binomial():
    assert TensorBasisSpec(1, 2).q == 3
    assert TensorBasisSpec(2, 2).q == 6
    for d in range(1, 5):
        for deg in range(5):
            spec = TensorBasisSpec(d, deg)
            assert spec.q == math.comb(d + deg, deg) == len(spec.multi_indices)
    assert len(eval_tensor_basis(TensorBasisSpec(2, 2), np.array([0.2, 0.9]))) == 6


def test_graded_lex_order():
    assert graded_lex_indices(2, 2) == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert graded_lex_indices(3, 1)[0] == (0, 0, 0)


def test_tensor_basis_at_center():
    np.testing.assert_allclose(eval_tensor_basis(TensorBasisSpec(2, 1), np.array([0.5, 0.5])), [1, 0, 0], atol=1e-15)


def test_smoothness_to_degree():
    assert TensorBasisSpec.from_smoothness(1, 2.0).degree == 1
    assert TensorBasisSpec.from_smoothness(1, 2.5).degree == 2
    assert TensorBasisSpec.from_smoothness(2, 0.5).degree == 0


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4])
def test_orthonormal_under_gauss(d, degree):
    spec = TensorBasisSpec(d, degree)
    nodes, w = tensor_gauss(d, degree + 1)
    vals = spec.evaluate(nodes)
    np.testing.assert_allclose(vals.T @ (w[:, None] * vals), np.eye(spec.q), atol=1e-10)


def test_kernel_weight_values():
    f1 = LocalizedFrame([0.5], 0.5)
    assert kernel_weight(f1, np.array([0.6])) == pytest.approx(2.0)
    assert kernel_weight(f1, np.array([0.9])) == 0.0
    f2 = LocalizedFrame([0.5, 0.5], 0.2)
    assert kernel_weight(f2, np.array([0.55, 0.55])) == pytest.approx(25.0, rel=1e-12)


def test_window_is_closed_sup_norm_cube():
    f = LocalizedFrame([0.5, 0.5], 0.2)
    assert f.in_window(np.array([0.6, 0.4]))
    assert not f.in_window(np.array([0.6001, 0.5]))
    # a Euclidean ball of diameter h would exclude this corner point
    assert f.in_window(np.array([0.59, 0.59]))


@given(
    x0=st.floats(0.2, 0.8),
    h=st.floats(0.01, 0.4),
    v=st.floats(0.0, 1.0),
)
def test_stretch_is_bijection_on_window(x0, h, v):
    f = LocalizedFrame([x0], h)
    x = f.unstretch(np.array([v]))
    assert f.in_window(x) or abs(abs(x[0] - x0) - h / 2) < 1e-12
    np.testing.assert_allclose(f.stretch(x), [v], atol=1e-12)


def test_localized_basis_center_and_edges():
    spec = TensorBasisSpec(1, 3)
    for h in (0.1, 0.37, 1.0):
        f = LocalizedFrame([0.5], h)
        np.testing.assert_array_equal(eval_localized_basis(spec, f, np.array([0.5])), spec.evaluate(np.array([0.5])))
    f = LocalizedFrame([0.5], 0.4)
    np.testing.assert_allclose(eval_localized_basis(spec, f, np.array([0.3])), spec.evaluate(np.array([0.0])), atol=1e-14)
    np.testing.assert_array_equal(eval_localized_basis(spec, f, np.array([0.75])), np.zeros(4))


def test_kernel_integrates_to_one_inside_cube():
    f = LocalizedFrame([0.4, 0.6], 0.3)
    edges = [np.array([0.0, 0.25, 0.55, 1.0]), np.array([0.0, 0.45, 0.75, 1.0])]
    nodes, w = grid_quadrature(edges, 2)
    assert float(np.sum(w * f.kernel_weight(nodes))) == pytest.approx(1.0, abs=1e-12)
    g = LocalizedFrame([0.05], 0.3)  # hangs over the boundary
    nodes, w = grid_quadrature([np.array([0.0, 0.2, 1.0])], 2)
    assert float(np.sum(w * g.kernel_weight(nodes))) < 1.0


def test_single_cube_is_plain_legendre():
    basis = build_piecewise_cube_basis(PiecewiseCubeBasisSpec([Cube(np.zeros(2), 1.0)], 2))
    v = np.random.default_rng(0).random((20, 2))
    np.testing.assert_allclose(basis.evaluate(v), TensorBasisSpec(2, 2).evaluate(v), atol=1e-13)


def test_two_cubes_indicator_and_gram():
    spec = PiecewiseCubeBasisSpec([Cube([0.0], 0.25), Cube([0.5], 0.5)], 1)
    basis = build_piecewise_cube_basis(spec)
    vals = basis.evaluate(np.array([[0.1]]))
    assert np.all(vals[0, 2:] == 0) and np.any(vals[0, :2] != 0)
    nodes, w = grid_quadrature(basis.breakpoints(), 2)
    mask = basis.membership(nodes) >= 0
    vals = basis.evaluate(nodes)
    np.testing.assert_allclose((vals * (w * mask)[:, None]).T @ vals, np.eye(4), atol=1e-12)


def test_overlapping_cubes_rejected():
    with pytest.raises(ConfigError):
        build_piecewise_cube_basis(PiecewiseCubeBasisSpec([Cube([0.0], 0.5), Cube([0.25], 0.5)], 0))


@pytest.mark.parametrize("d,cells,degree", [(1, 5, 0), (1, 3, 2), (2, 3, 1), (3, 2, 0)])
def test_partition_basis_orthonormal(d, cells, degree):
    basis = partition_basis(cells, d, degree)
    nodes, w = grid_quadrature(basis.breakpoints(), degree + 1)
    vals = basis.evaluate(nodes)
    np.testing.assert_allclose(vals.T @ (w[:, None] * vals), np.eye(basis.size), atol=1e-11)


def test_partition_fast_membership_matches_generic():
    fast = partition_basis(4, 2, 1)
    generic = build_piecewise_cube_basis(fast.spec)
    v = np.vstack([np.random.default_rng(3).random((200, 2)), [[1.0, 1.0], [0.25, 0.5], [0.0, 1.0], [1.2, 0.5]]])
    np.testing.assert_array_equal(fast.membership(v), generic.membership(v))
    np.testing.assert_allclose(fast.evaluate(v), generic.evaluate(v), atol=1e-14)


def test_integer_root():
    assert integer_root(27, 3) == 3
    with pytest.raises(ConfigError):
        integer_root(10, 2)


@settings(max_examples=40, deadline=None)
@given(
    f_coef=st.lists(st.floats(-2, 2), min_size=4, max_size=4),
    g_coef=st.lists(st.floats(-2, 2), min_size=6, max_size=6),
    w_coef=st.lists(st.floats(0.05, 2), min_size=2, max_size=2),
)
def test_weighted_projection_is_orthogonal(f_coef, g_coef, w_coef):
    """Weighted L2 projection onto low-degree Legendre terms leaves orthogonal residuals."""
    nodes, w = tensor_gauss(1, 12)
    u = nodes[:, 0]
    weight = w * (w_coef[0] + w_coef[1] * u)
    rho = TensorBasisSpec(1, 2).evaluate(nodes)
    gram = rho.T @ (weight[:, None] * rho)

    def project(vals):
        return rho @ np.linalg.solve(gram, rho.T @ (weight * vals))

    f = np.polyval(f_coef, u)
    g = np.polyval(g_coef, u)
    pf, pg = project(f), project(g)
    assert abs(np.sum(pf * (g - pg) * weight)) < 1e-9 * (1 + np.sum(f**2 * weight) + np.sum(g**2 * weight))
    assert np.sum(pf**2 * weight) <= np.sum(f**2 * weight) * (1 + 1e-12) + 1e-14
