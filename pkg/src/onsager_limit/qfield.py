"""Lattices with analytic domain masks, Q-tensor and director fields,
director extraction and sign-consistent lifting of line fields."""
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateQ, LiftInconsistency

__all__ = [
    "Square",
    "Disk",
    "LatticeBox",
    "QTensorField",
    "DirectorField",
    "uniaxial_q",
    "director_extract",
    "director_field",
    "uniaxiality_residual",
    "orient_lift",
    "validate_q",
]

DEFAULT_DEGENERACY_TOL = 1e-6
INTERIOR, SHELL, EXTERIOR = 0, 1, 2


@dataclass(frozen=True)
class Square:
    """Axis-aligned square (d=2) or cube (d=3) centered at the origin."""

    half_width: float = 0.5

    def signed_distance(self, x):
        """Distance to the boundary, positive inside, negative outside."""
        q = np.abs(x) - self.half_width
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return -(outside + inside)

    def bounding_radius(self, d):
        return self.half_width * np.sqrt(d)

    def bounding_box(self, d):
        return -self.half_width * np.ones(d), self.half_width * np.ones(d)


@dataclass(frozen=True)
class Disk:
    """Ball of given radius centered at the origin."""

    radius: float = 0.5

    def signed_distance(self, x):
        return self.radius - np.linalg.norm(x, axis=-1)

    def bounding_radius(self, d):
        return self.radius

    def bounding_box(self, d):
        return -self.radius * np.ones(d), self.radius * np.ones(d)


class LatticeBox:
    """Cell-centered lattice on [-R, R]^d with N nodes per axis.

    Nodes sit at x_j = -R + (j + 1/2) h with h = 2R/N. Region labels use the
    exact signed distance of the analytic domain: Omega^delta (the pinned
    shell) is dist <= delta, Omega_delta (the free interior) is dist > delta.
    """

    def __init__(self, d, R, N, domain=None, delta=0.0):
        if d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {d}")
        if N < 2:
            raise ValueError(f"N must be >= 2, got {N}")
        self.d = int(d)
        self.R = float(R)
        self.N = int(N)
        self.h = 2.0 * self.R / self.N
        self.domain = Square() if domain is None else domain
        self.delta = float(delta)
        if self.domain.bounding_radius(self.d) >= self.R / 4.0:
            raise ValueError(
                f"domain must lie inside B_(R/4): bounding radius "
                f"{self.domain.bounding_radius(self.d):.4g} >= R/4 = {self.R / 4:.4g}"
            )

    @property
    def shape(self):
        return (self.N,) * self.d

    @property
    def cell_volume(self):
        return self.h**self.d

    @cached_property
    def axis(self):
        return -self.R + (np.arange(self.N) + 0.5) * self.h

    @cached_property
    def coords(self):
        grids = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(grids, axis=-1)

    @cached_property
    def distance(self):
        return self.domain.signed_distance(self.coords)

    @cached_property
    def omega(self):
        return self.distance > 0.0

    @cached_property
    def interior(self):
        """Omega_delta: free nodes."""
        return self.distance > self.delta

    @cached_property
    def shell(self):
        """Omega^delta: boundary layer nodes."""
        return self.omega & ~self.interior

    @cached_property
    def exterior(self):
        return ~self.omega

    @cached_property
    def labels(self):
        lab = np.full(self.shape, EXTERIOR, dtype=np.int8)
        lab[self.shell] = SHELL
        lab[self.interior] = INTERIOR
        return lab

    def with_delta(self, delta):
        return LatticeBox(self.d, self.R, self.N, self.domain, delta)

    def window(self, margin=0):
        """Index slices of the smallest node block containing Omega, grown by
        ``margin`` nodes per side (clipped to the lattice)."""
        idx = np.nonzero(self.omega)
        return tuple(
            slice(max(int(i.min()) - margin, 0), min(int(i.max()) + 1 + margin, self.N))
            for i in idx
        )

    def integrate(self, values, mask=None):
        """Midpoint-rule integral over the lattice (or over ``mask``)."""
        values = np.asarray(values)
        if mask is not None:
            values = values[mask]
        return float(np.sum(values) * self.cell_volume)


def validate_q(q, tol=1e-13):
    q = np.asarray(q, dtype=float)
    if np.max(np.abs(q - np.swapaxes(q, -1, -2)), initial=0.0) > tol:
        raise ValueError("Q is not symmetric")
    if np.max(np.abs(np.trace(q, axis1=-2, axis2=-1)), initial=0.0) > tol:
        raise ValueError("Q is not traceless")
    if np.max(np.linalg.norm(q, axis=(-2, -1)), initial=0.0) > np.sqrt(2.0 / 3.0) + 1e-10:
        raise ValueError("Q exceeds the Frobenius bound sqrt(2/3)")
    return q


@dataclass
class QTensorField:
    lattice: LatticeBox
    values: np.ndarray  # shape lattice.shape + (3, 3)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expect = self.lattice.shape + (3, 3)
        if self.values.shape != expect:
            raise ValueError(f"Q values must have shape {expect}, got {self.values.shape}")

    def check(self, tol=1e-12):
        validate_q(self.values, tol)
        return self


@dataclass
class DirectorField:
    lattice: LatticeBox
    values: np.ndarray  # shape lattice.shape + (3,), NaN where undefined
    mask: np.ndarray

    def check(self, tol=1e-12):
        n = np.linalg.norm(self.values[self.mask], axis=-1)
        if n.size and np.max(np.abs(n - 1.0)) > tol:
            raise ValueError("director field is not unit length on its mask")
        return self


def uniaxial_q(s, nu):
    """s (nu nu - I/3), broadcasting over leading axes of nu."""
    nu = np.asarray(nu, dtype=float)
    s = np.asarray(s, dtype=float)
    return s[..., None, None] * (np.einsum("...i,...j->...ij", nu, nu) - np.eye(3) / 3.0)


def _sign_convention(v):
    # first component with |v_i| > 1e-12 made positive
    v = np.array(v, dtype=float)
    flat = v.reshape(-1, 3)
    big = np.abs(flat) > 1e-12
    first = np.argmax(big, axis=1)
    sgn = np.sign(flat[np.arange(flat.shape[0]), first])
    sgn[sgn == 0] = 1.0
    return (flat * sgn[:, None]).reshape(v.shape)


def director_field(q, degeneracy_tol=DEFAULT_DEGENERACY_TOL):
    """Vectorized director extraction: returns (s, nu, degenerate_mask)."""
    q = np.asarray(q, dtype=float)
    lam, vec = np.linalg.eigh(q)
    nu = _sign_convention(vec[..., :, 2])
    s = 1.5 * lam[..., 2]
    degenerate = (lam[..., 2] - lam[..., 1]) < degeneracy_tol
    return s, nu, degenerate


def director_extract(q, degeneracy_tol=DEFAULT_DEGENERACY_TOL):
    """(s, nu) with nu the top eigenvector of q and s = 1.5 * lambda_max."""
    q = np.asarray(q, dtype=float)
    if q.shape != (3, 3):
        raise ValueError(f"expected a 3x3 tensor, got shape {q.shape}")
    s, nu, degenerate = director_field(q, degeneracy_tol)
    if degenerate:
        raise DegenerateQ("top two eigenvalues closer than degeneracy_tol")
    return float(s), nu


def uniaxiality_residual(q):
    """min over (s, nu) of |q - s(nu nu - I/3)|_F.

    For traceless q with eigenvalues l_1 <= l_2 <= l_3 the best fit takes nu
    along the eigenvector of l_k with s = 3 l_k / 2, leaving
    |l_i - l_j| / sqrt(2) for the other pair; the minimum is the smaller
    adjacent eigenvalue gap. Written as a gap it has no cancellation, so
    exactly uniaxial input gives a residual at rounding level.
    """
    q = np.asarray(q, dtype=float)
    lam = np.linalg.eigvalsh(q)
    gaps = np.minimum(lam[..., 1] - lam[..., 0], lam[..., 2] - lam[..., 1])
    return np.maximum(gaps, 0.0) / np.sqrt(2.0)


def orient_lift(field, region, degeneracy_tol=DEFAULT_DEGENERACY_TOL, seed_index=None):
    """Sign-consistent director on ``region`` by breadth-first propagation.

    Every adjacent pair in the region must end with n(x).n(x') > 0; a
    contradiction (e.g. a half-integer defect or a hole) raises
    LiftInconsistency.
    """
    values = field.values if isinstance(field, QTensorField) else np.asarray(field)
    lattice = field.lattice if isinstance(field, QTensorField) else None
    region = np.asarray(region, dtype=bool)
    shape = region.shape
    _, nu, degenerate = director_field(values, degeneracy_tol)
    if np.any(degenerate & region):
        bad = np.argwhere(degenerate & region)[0]
        raise DegenerateQ(f"degenerate Q-tensor at node {tuple(int(i) for i in bad)}")

    out = np.full(shape + (3,), np.nan)
    done = np.zeros(shape, dtype=bool)
    if not region.any():
        return DirectorField(lattice, out, region)
    ndim = len(shape)
    steps = []
    for ax in range(ndim):
        for sgn in (-1, 1):
            e = [0] * ndim
            e[ax] = sgn
            steps.append(tuple(e))

    # each connected component gets its own seed (lowest flat index)
    flat_region = np.flatnonzero(region)
    if seed_index is not None:
        flat_region = np.concatenate([[np.ravel_multi_index(seed_index, shape)], flat_region])
    for flat in flat_region:
        start = np.unravel_index(flat, shape)
        if done[start]:
            continue
        out[start] = nu[start]
        done[start] = True
        queue = deque([start])
        while queue:
            p = queue.popleft()
            for e in steps:
                nb = tuple(p[i] + e[i] for i in range(ndim))
                if any(c < 0 or c >= shape[i] for i, c in enumerate(nb)):
                    continue
                if not region[nb] or done[nb]:
                    continue
                v = nu[nb]
                out[nb] = v if v @ out[p] >= 0 else -v
                done[nb] = True
                queue.append(nb)

    # consistency over every adjacent pair
    for ax in range(ndim):
        a = [slice(None)] * ndim
        b = [slice(None)] * ndim
        a[ax] = slice(0, -1)
        b[ax] = slice(1, None)
        a, b = tuple(a), tuple(b)
        both = region[a] & region[b]
        dots = np.einsum("...i,...i->...", out[a], out[b])
        if np.any(dots[both] <= 0.0):
            bad = np.argwhere(both & (dots <= 0.0))[0]
            raise LiftInconsistency(
                f"sign contradiction between adjacent nodes along axis {ax} at {tuple(int(i) for i in bad)}"
            )
    return DirectorField(lattice, out, region)
