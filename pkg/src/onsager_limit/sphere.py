"""Quadrature on the unit sphere and the rotational gradient R = m ^ grad_S.

Nodes are a product of Gauss-Legendre points in cos(theta) and a uniform
trapezoid rule in phi, so the exactness degree can be raised freely for
refinement studies.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SphereGrid",
    "build_grid",
    "default_grid",
    "integrate",
    "rotational_gradient_linear",
    "rotational_identity_check",
    "integration_by_parts_residual",
]

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True, eq=False)
class SphereGrid:
    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int
    n_polar: int
    n_azimuth: int

    @property
    def size(self):
        return self.weights.shape[0]


@lru_cache(maxsize=32)
def build_grid(n_polar: int, n_azimuth: int) -> SphereGrid:
    """Product grid exact for spherical polynomials of degree
    ``min(2 * n_polar - 1, n_azimuth - 1)``."""
    n_polar = int(n_polar)
    n_azimuth = int(n_azimuth)
    if n_polar < 2:
        raise ValueError(f"n_polar must be >= 2, got {n_polar}")
    if n_azimuth < 4:
        raise ValueError(f"n_azimuth must be >= 4, got {n_azimuth}")

    z, wz = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    wphi = 2.0 * np.pi / n_azimuth

    zz, pp = np.meshgrid(z, phi, indexing="ij")
    rho = np.sqrt(1.0 - zz**2)
    nodes = np.stack([rho * np.cos(pp), rho * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    # renormalize to remove the last ulp of drift from sqrt/cos/sin
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    weights = np.repeat(wz * wphi, n_azimuth)

    nodes.setflags(write=False)
    weights.setflags(write=False)
    degree = min(2 * n_polar - 1, n_azimuth - 1)
    return SphereGrid(nodes, weights, degree, n_polar, n_azimuth)


def default_grid() -> SphereGrid:
    return build_grid(24, 48)


def grid_for_degree(degree: int) -> SphereGrid:
    degree = max(int(degree), 3)
    return build_grid((degree + 2) // 2, degree + 1)


def integrate(grid: SphereGrid, values) -> np.ndarray:
    """Quadrature sum over the last axis of ``values``."""
    values = np.asarray(values)
    if values.shape[-1] != grid.size:
        raise ValueError(
            f"values has {values.shape[-1]} entries on its last axis, grid has {grid.size} nodes"
        )
    return values @ grid.weights


def _check_unit(m, tol=1e-12):
    m = np.asarray(m, dtype=float)
    if abs(np.linalg.norm(m) - 1.0) > tol:
        raise ValueError("m must be a unit vector")
    return m


def _tangential_projection(m):
    return np.eye(3) - np.outer(m, m)


def rotational_gradient_linear(u, m) -> np.ndarray:
    """R(m . u) at the point m, from R = m ^ grad_S with grad_S the tangential gradient."""
    m = np.asarray(m, dtype=float)
    return np.cross(m, _tangential_projection(m) @ np.asarray(u, dtype=float))


def rotational_identity_check(u, m):
    """Residuals of R(m.u) = m ^ u and R.(m ^ u) = -2 m.u at a single point."""
    u = np.asarray(u, dtype=float)
    m = _check_unit(m)
    res_a = np.linalg.norm(rotational_gradient_linear(u, m) - np.cross(m, u))

    # R_j m_k: rotational gradient of the coordinate function m -> m_k, column k
    rm = np.stack([rotational_gradient_linear(e, m) for e in np.eye(3)], axis=1)
    # (m ^ u)_j = eps_jab m_a u_b, linear in m, so R_j acts on m_a only
    eps = _levi_civita()
    div = np.einsum("jab,b,ja->", eps, u, rm)
    res_b = abs(div + 2.0 * (m @ u))
    return float(res_a), float(res_b)


def integration_by_parts_residual(grid: SphereGrid, A, B) -> float:
    """|int (R f1) f2 + int f1 (R f2)| for f1 = m.Am, f2 = m.Bm (symmetric A, B)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    m = grid.nodes
    f1 = np.einsum("qi,ij,qj->q", m, A, m)
    f2 = np.einsum("qi,ij,qj->q", m, B, m)
    rf1 = 2.0 * np.cross(m, m @ A)
    rf2 = 2.0 * np.cross(m, m @ B)
    total = integrate(grid, (rf1 * f2[:, None] + f1[:, None] * rf2).T)
    return float(np.max(np.abs(total)))


@lru_cache(maxsize=1)
def _levi_civita():
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    eps.setflags(write=False)
    return eps
