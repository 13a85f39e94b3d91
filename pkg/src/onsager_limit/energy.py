"""Boundary data, admissible states and the nonlocal free energy in Q-tensor form.

With the Maier-Saupe interaction written so that homogeneous critical points
satisfy B = alpha Q, the energy of a density f on Omega is

    A_eps[f] = int_Omega f log f - (alpha/2) int_Omega |Q|^2
               + (alpha/2) int_Omega Q : (Q - Q *_Omega g_eps)
               + (alpha/3) int_Omega (1_Omega * g_eps),

whose Euler-Lagrange density is Bingham with B = alpha (Q *_Omega g_eps).
"""
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import bingham, kernel, sphere
from .errors import InvariantViolation
from .qfield import LatticeBox

__all__ = [
    "BoundaryData",
    "Problem",
    "State",
    "EnergyReport",
    "cutoff",
    "constant_profile",
    "planar_linear_profile",
    "parse_profile",
    "make_boundary",
    "boundary_state",
    "state_from_interior",
    "energy",
    "homogeneous_density",
    "apriori_quantity",
    "minimality_gap",
    "pack_sym",
    "unpack_sym",
]

_IU = (np.array([0, 0, 0, 1, 1, 2]), np.array([0, 1, 2, 1, 2, 2]))


def pack_sym(Q):
    """(..., 3, 3) symmetric -> (..., 6) upper-triangle components."""
    return Q[..., _IU[0], _IU[1]]


def unpack_sym(v):
    Q = np.empty(v.shape[:-1] + (3, 3), dtype=v.dtype)
    Q[..., _IU[0], _IU[1]] = v
    Q[..., _IU[1], _IU[0]] = v
    return Q


def _frob_weights():
    # |Q|^2 = sum_k w_k v_k^2 for packed components
    return np.array([1.0, 2.0, 2.0, 1.0, 2.0, 1.0])


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def cutoff(r, R):
    """Radial cutoff: 1 on B_(R/2), 0 outside B_R, smooth monotone in between."""
    return 1.0 - _smooth_step((np.asarray(r) - 0.5 * R) / (0.5 * R))


def constant_profile(v=(0.0, 0.0, 1.0)):
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)

    def prof(x):
        return np.broadcast_to(v, x.shape[:-1] + (3,)).copy()

    prof.description = "constant:" + ",".join(f"{c:.17g}" for c in v)
    return prof


def planar_linear_profile(kx, ky, psi0=0.0):
    """n = (cos psi, sin psi, 0) with psi = psi0 + kx x + ky y."""

    def prof(x):
        psi = psi0 + kx * x[..., 0] + ky * x[..., 1]
        return np.stack([np.cos(psi), np.sin(psi), np.zeros_like(psi)], axis=-1)

    prof.description = f"planar-linear:{kx:.17g},{ky:.17g}"
    prof.angle = lambda x: psi0 + kx * x[..., 0] + ky * x[..., 1]
    return prof


def parse_profile(text):
    """Parse ``constant[:nx,ny,nz]`` or ``planar-linear:kx,ky[,psi0]``."""
    text = text.strip()
    name, _, args = text.partition(":")
    vals = [float(v) for v in args.split(",")] if args.strip() else []
    if name == "constant":
        if vals and len(vals) != 3:
            raise ValueError("constant profile takes three components")
        return constant_profile(vals if vals else (0.0, 0.0, 1.0))
    if name == "planar-linear":
        if len(vals) not in (2, 3):
            raise ValueError("planar-linear profile takes kx,ky[,psi0]")
        return planar_linear_profile(*vals)
    raise ValueError(f"unknown boundary profile {name!r}")


@dataclass
class BoundaryData:
    """Extended anchoring director n_b on the whole lattice and its h_{n_b} data."""

    lattice: LatticeBox
    eta: float
    n_b: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    entropy: np.ndarray
    profile: object = None

    @property
    def h_nb_Q(self):
        return self.Q


def make_boundary(lattice, profile, eta, grid=None, unit_tol=1e-12):
    """n_b = chi(|x|) * profile(x) with h_{n_b} proportional to exp(eta (m.n_b)^2).

    Q and entropy of h_{n_b} come from the Bingham moments of eta n_b n_b, which
    stays valid where |n_b| < 1 in the cutoff ramp.
    """
    x = lattice.coords
    prof = profile(x)
    norms = np.linalg.norm(prof[lattice.omega], axis=-1)
    if norms.size and np.max(np.abs(norms - 1.0)) > unit_tol:
        raise ValueError("boundary profile is not unit length on Omega")
    chi = cutoff(np.linalg.norm(x, axis=-1), lattice.R)
    n_b = chi[..., None] * prof
    n_b[lattice.omega] = prof[lattice.omega]

    B = eta * np.einsum("...i,...j->...ij", n_b, n_b)
    B = bingham.traceless(B)
    Q = np.zeros_like(B)
    ent = np.full(lattice.shape, -np.log(4.0 * np.pi))
    live = chi > 0
    if live.any():
        q, e, _ = bingham.moments(B[live], grid)
        Q[live] = q
        ent[live] = e
    return BoundaryData(lattice, float(eta), n_b, B, Q, ent, profile)


@dataclass
class Problem:
    """Everything fixed during one solve: lattice with its delta, boundary data,
    kernel, eps, alpha and the sphere grid."""

    lattice: LatticeBox
    boundary: BoundaryData
    spec: kernel.KernelSpec
    eps: float
    alpha: float
    sigma: float = 0.25
    grid: sphere.SphereGrid = field(default_factory=sphere.default_grid)
    coupling: str = "omega"

    def __post_init__(self):
        if self.coupling not in ("omega", "full"):
            raise ValueError(f"coupling must be 'omega' or 'full', got {self.coupling!r}")
        if self.boundary.lattice is not self.lattice and self.boundary.lattice.shape != self.lattice.shape:
            raise ValueError("boundary data lives on a different lattice")

    @property
    def delta(self):
        return self.lattice.delta

    @property
    def h(self):
        return self.lattice.h

    @cached_property
    def pad(self):
        return kernel.default_pad(self.spec, self.eps, self.h)

    @cached_property
    def window(self):
        """Node block used for convolutions: Omega's bounding box, grown by the
        kernel padding for the full-space coupling."""
        margin = self.pad if self.coupling == "full" else 0
        return self.lattice.window(margin)

    @cached_property
    def omega_w(self):
        return self.lattice.omega[self.window]

    @cached_property
    def free_w(self):
        return self.lattice.interior[self.window]

    @cached_property
    def region_mass(self):
        """(1_Omega * g_eps) on the window."""
        return kernel.convolve(self.omega_w.astype(float), self.spec, self.eps, self.h, self.pad)

    @cached_property
    def C1(self):
        vals = self.region_mass[self.omega_w]
        return (self.alpha / 3.0) * float(np.sum(vals)) * self.lattice.cell_volume

    def with_eps(self, eps, sigma=None):
        sigma = self.sigma if sigma is None else sigma
        lat = self.lattice.with_delta(eps ** (0.5 - sigma))
        bd = replace(self.boundary, lattice=lat)
        return Problem(lat, bd, self.spec, eps, self.alpha, sigma, self.grid, self.coupling)

    def mean_field_packed(self, Qp_w):
        """alpha * (Q 1_Omega) * g_eps (or alpha * Q * g_eps for the full-space
        coupling) on the window, for packed Q values."""
        if self.coupling == "omega":
            src = Qp_w * self.omega_w[..., None]
        else:
            src = Qp_w
        return self.alpha * kernel.convolve(src, self.spec, self.eps, self.h, self.pad)


@dataclass
class State:
    """Bingham exponent, Q-tensor and entropy density on the full lattice."""

    problem: Problem
    B: np.ndarray
    Q: np.ndarray
    entropy: np.ndarray

    def copy(self):
        return State(self.problem, self.B.copy(), self.Q.copy(), self.entropy.copy())

    def check_pinned(self):
        """Q and B on Omega^delta and the exterior must equal the h_{n_b} data."""
        bd = self.problem.boundary
        pinned = ~self.problem.lattice.interior
        if not (np.array_equal(self.Q[pinned], bd.Q[pinned]) and np.array_equal(self.B[pinned], bd.B[pinned])):
            raise InvariantViolation("state differs from h_{n_b} on the pinned region")
        return self


def boundary_state(problem):
    """The competitor f = h_{n_b} everywhere."""
    bd = problem.boundary
    return State(problem, bd.B.copy(), bd.Q.copy(), bd.entropy.copy())


def state_from_interior(problem, B_free):
    """State with the given exponents on the free nodes and h_{n_b} elsewhere."""
    st = boundary_state(problem)
    free = problem.lattice.interior
    B_free = bingham.traceless(B_free)
    q, e, _ = bingham.moments(B_free, problem.grid)
    st.B[free] = B_free
    st.Q[free] = q
    st.entropy[free] = e
    return st


@dataclass
class EnergyReport:
    eps: float
    alpha: float
    delta: float
    entropy: float
    bulk: float
    nonlocal_: float
    C1: float
    total: float
    apriori: float = float("nan")
    min_gap: float = float("nan")

    FIELDS = ("eps", "alpha", "delta", "entropy", "bulk", "nonlocal", "C1", "total", "apriori", "min_gap")

    def row(self):
        return [self.eps, self.alpha, self.delta, self.entropy, self.bulk, self.nonlocal_,
                self.C1, self.total, self.apriori, self.min_gap]


def energy(state, check=True):
    """Energy breakdown of a state over Omega."""
    pr = state.problem
    if check:
        state.check_pinned()
    lat = pr.lattice
    w = pr.window
    om = pr.omega_w
    dv = lat.cell_volume
    Qp = pack_sym(state.Q[w])
    fw = _frob_weights()
    conv = kernel.convolve(Qp * om[..., None], pr.spec, pr.eps, pr.h, pr.pad)
    ent = float(np.sum(state.entropy[w][om])) * dv
    q2 = np.sum(Qp * Qp * fw, axis=-1)
    bulk = -0.5 * pr.alpha * float(np.sum(q2[om])) * dv
    qc = np.sum(Qp * (Qp - conv) * fw, axis=-1)
    nonloc = 0.5 * pr.alpha * float(np.sum(qc[om])) * dv
    total = ent + bulk + nonloc + pr.C1
    return EnergyReport(pr.eps, pr.alpha, pr.delta, ent, bulk, nonloc, pr.C1, total)


def homogeneous_density(entropy, Q, alpha):
    """Pointwise f log f + (alpha/2)(2/3 - |Q|^2)."""
    return entropy + 0.5 * alpha * (2.0 / 3.0 - np.sum(Q * Q, axis=(-2, -1)))


def apriori_quantity(state, boundary=None):
    """(1/eps) int (A[f] - A[h_nb]) + (alpha / (2 eps)) int int |Q(x) - Q(y)|^2 g_eps(x - y)
    for the extended field, with the double integral taken as
    2 int Q : (Q - Q * g_eps) over the whole lattice."""
    pr = state.problem
    bd = pr.boundary if boundary is None else boundary
    lat = pr.lattice
    dv = lat.cell_volume
    a_state = homogeneous_density(state.entropy, state.Q, pr.alpha)
    a_ref = homogeneous_density(bd.entropy, bd.Q, pr.alpha)
    om = lat.omega
    first = float(np.sum((a_state - a_ref)[om])) * dv / pr.eps
    Qp = pack_sym(state.Q)
    conv = kernel.convolve(Qp, pr.spec, pr.eps, pr.h, pr.pad)
    double = 2.0 * float(np.sum(Qp * (Qp - conv) * _frob_weights())) * dv
    return first + pr.alpha / (2.0 * pr.eps) * double


def minimality_gap(state, reference=None):
    """A_eps[state] - A_eps[h_{n_b}]."""
    ref = boundary_state(state.problem) if reference is None else reference
    return energy(state).total - energy(ref).total
