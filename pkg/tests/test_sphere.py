import itertools
from math import gamma

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from onsager_limit import sphere

unit_vectors = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(
    lambda v: np.linalg.norm(v) > 1e-3
).map(lambda v: np.asarray(v) / np.linalg.norm(v))
vectors = st.tuples(*[st.floats(-10, 10, allow_nan=False)] * 3).map(np.asarray)


def sphere_monomial(a, b, c):
    # closed form of int_{S^2} x^a y^b z^c
    if a % 2 or b % 2 or c % 2:
        return 0.0
    ba, bb, bc = (a + 1) / 2, (b + 1) / 2, (c + 1) / 2
    return 2 * gamma(ba) * gamma(bb) * gamma(bc) / gamma(ba + bb + bc)


def test_grid_invariants(grid):
    assert np.max(np.abs(np.linalg.norm(grid.nodes, axis=1) - 1)) <= 1e-14
    assert abs(grid.weights.sum() - 4 * np.pi) <= 1e-12
    assert grid.weights.min() > 0
    second = np.einsum("q,qi,qj->ij", grid.weights, grid.nodes, grid.nodes)
    np.testing.assert_allclose(second, 4 * np.pi / 3 * np.eye(3), atol=1e-12)
    assert grid.exact_degree == 47


@pytest.mark.parametrize("n_polar,n_azimuth", [(3, 8), (6, 10), (8, 20)])
def test_monomial_exactness(n_polar, n_azimuth):
    g = sphere.build_grid(n_polar, n_azimuth)
    assert g.exact_degree == min(2 * n_polar - 1, n_azimuth - 1)
    x, y, z = g.nodes.T
    for a, b, c in itertools.product(range(g.exact_degree + 1), repeat=3):
        if a + b + c > g.exact_degree:
            continue
        val = sphere.integrate(g, x**a * y**b * z**c)
        assert abs(val - sphere_monomial(a, b, c)) <= 1e-12


def test_degree_is_sharp():
    g = sphere.build_grid(3, 8)  # exact to degree 5
    z = g.nodes[:, 2]
    assert abs(sphere.integrate(g, z**6) - sphere_monomial(0, 0, 6)) > 1e-6


def test_build_grid_rejects_small():
    with pytest.raises(ValueError):
        sphere.build_grid(1, 8)
    with pytest.raises(ValueError):
        sphere.build_grid(4, 3)


def test_integrate_examples(grid):
    assert abs(sphere.integrate(grid, np.ones(grid.size)) - 4 * np.pi) <= 1e-12
    x, y, z = grid.nodes.T
    assert abs(sphere.integrate(grid, x * y)) <= 1e-13
    assert abs(sphere.integrate(grid, z**2) - 4 * np.pi / 3) <= 1e-12
    # axisymmetric reduction: int exp(z^2) = 4 pi int_0^1 exp(t^2) dt
    ref = 4 * np.pi * quad(lambda t: np.exp(t * t), 0, 1, epsabs=1e-14)[0]
    assert abs(sphere.integrate(grid, np.exp(z**2)) - ref) <= 1e-12


def test_integrate_length_mismatch(grid):
    with pytest.raises(ValueError):
        sphere.integrate(grid, np.ones(grid.size + 1))


@given(unit_vectors)
@settings(max_examples=30, deadline=None)
def test_fourth_moment_any_axis(nu):
    g = sphere.default_grid()
    assert abs(sphere.integrate(g, (g.nodes @ nu) ** 4) - 4 * np.pi / 5) <= 1e-12


def test_fourth_moment_oracle():
    # 1D Legendre-moment oracle: 2 pi int_{-1}^1 t^4 dt
    ref = 2 * np.pi * quad(lambda t: t**4, -1, 1)[0]
    assert abs(ref - 4 * np.pi / 5) <= 1e-14


def test_rotational_identity_examples():
    e1, e3 = np.eye(3)[0], np.eye(3)[2]
    np.testing.assert_allclose(sphere.rotational_gradient_linear(e3, e1), [0, -1, 0], atol=0)
    assert max(sphere.rotational_identity_check(e3, e1)) == 0.0
    m = np.array([0.0, 0.6, 0.8])
    assert max(sphere.rotational_identity_check(m, m)) <= 1e-15
    with pytest.raises(ValueError):
        sphere.rotational_identity_check(e3, 2 * e1)


@given(vectors, unit_vectors)
@settings(max_examples=100, deadline=None)
def test_rotational_identity_random(u, m):
    a, b = sphere.rotational_identity_check(u, m)
    assert a <= 1e-13 * max(1.0, np.linalg.norm(u))
    assert b <= 1e-13 * max(1.0, np.linalg.norm(u))


def test_integration_by_parts(grid):
    rng = np.random.default_rng(3)
    for _ in range(10):
        A, B = rng.normal(size=(2, 3, 3))
        assert sphere.integration_by_parts_residual(grid, A, B) <= 1e-10
