"""Bingham densities exp(m.Bm)/Z on the sphere and the homogeneous
Maier-Saupe phase diagram.

Energies use the convention in which the homogeneous free energy is

    A[f] = int f log f + (alpha / 2) (2/3 - |Q|^2),

so that critical points satisfy B = alpha * Q (up to gauge) and the nematic
branch has s2 = eta / alpha.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize

from . import sphere
from ._workers import parallel_map
from .errors import NoBracket, QuadratureInsufficient

__all__ = [
    "BinghamParam",
    "PhasePoint",
    "traceless",
    "required_degree",
    "grid_for",
    "moments",
    "partition",
    "log_partition",
    "moment_Q",
    "entropy",
    "moment_covariance",
    "homogeneous_energy",
    "homogeneous_gradient",
    "alpha_of_eta",
    "s2_of_eta",
    "eta_star",
    "eta_branches",
    "eta1",
    "minimize_homogeneous",
]

ALPHA_ISOTROPIC = 7.5
_QUAD_OPTS = dict(epsabs=1e-15, epsrel=1e-13, limit=200)
_CHUNK = 2048


@dataclass(frozen=True)
class BinghamParam:
    """Exponent of the density exp(m.Bm), stored in traceless gauge."""

    B: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.shape != (3, 3):
            raise ValueError(f"B must be 3x3, got shape {B.shape}")
        B = traceless(B)
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @classmethod
    def uniaxial(cls, eta, nu):
        nu = np.asarray(nu, dtype=float)
        nu = nu / np.linalg.norm(nu)
        return cls(eta * np.outer(nu, nu))


@dataclass
class PhasePoint:
    alpha: float
    eta_branches: dict = field(default_factory=dict)
    s2: dict = field(default_factory=dict)

    @property
    def stable_eta(self):
        """Largest root; zero when only the isotropic branch exists."""
        return max(self.eta_branches.values())


def _as_matrix(p):
    if isinstance(p, BinghamParam):
        return p.B
    return np.asarray(p, dtype=float)


def traceless(B):
    """Symmetrize and remove the trace (the gauge freedom B -> B + cI)."""
    B = np.asarray(B, dtype=float)
    B = 0.5 * (B + np.swapaxes(B, -1, -2))
    tr = np.trace(B, axis1=-2, axis2=-1)
    return B - (tr / 3.0)[..., None, None] * np.eye(3)


def required_degree(B):
    """Grid exactness needed for exponent(s) B: max(30, 6 * max ||B||_op)."""
    B = traceless(B)
    if B.size == 0:
        return 30
    lam = np.linalg.eigvalsh(B.reshape(-1, 3, 3))
    op = float(np.max(np.abs(lam))) if lam.size else 0.0
    return max(30, int(np.ceil(6.0 * op)))


def grid_for(B, grid=None, auto_upgrade=True):
    """Return ``grid`` if it resolves B, else an upgraded grid (or raise)."""
    grid = sphere.default_grid() if grid is None else grid
    need = required_degree(B)
    if grid.exact_degree >= need:
        return grid
    if not auto_upgrade:
        raise QuadratureInsufficient(
            f"sphere grid exact to degree {grid.exact_degree}, exponent needs {need}"
        )
    if need > 400:
        raise QuadratureInsufficient(f"Bingham exponent too large: needs degree {need}")
    return sphere.grid_for_degree(need)


def _moments_block(lam, grid):
    # lam: (K, 3) eigenvalues, shifted so the max is 0
    m2 = grid.nodes**2  # (nq, 3)
    ex = np.exp(lam @ m2.T)  # (K, nq)
    ex *= grid.weights
    z = ex.sum(axis=1)
    mom = (ex @ m2) / z[:, None]
    return z, mom


def moments(B, grid=None, auto_upgrade=True):
    """Bingham moments for one exponent or a stack of exponents.

    Returns ``(Q, entropy, log_Z)`` with ``Q`` of shape ``B.shape`` and the
    scalars of shape ``B.shape[:-2]``. Evaluation happens in the eigenframe
    of each B with the exponent shifted by its largest eigenvalue.
    """
    B = traceless(B)
    batch = B.shape[:-2]
    flat = B.reshape(-1, 3, 3)
    grid = grid_for(flat, grid, auto_upgrade)
    lam, vec = np.linalg.eigh(flat)
    top = lam[:, -1].copy()
    shifted = lam - top[:, None]

    starts = range(0, flat.shape[0], _CHUNK)
    blocks = parallel_map(lambda s: _moments_block(shifted[s:s + _CHUNK], grid), starts)
    if blocks:
        z = np.concatenate([b[0] for b in blocks])
        mom = np.concatenate([b[1] for b in blocks])
    else:
        z = np.zeros(0)
        mom = np.zeros((0, 3))

    log_z = np.log(z) + top
    ent = np.einsum("ki,ki->k", lam, mom) - log_z
    diag = mom - 1.0 / 3.0
    Q = np.einsum("kij,kj,klj->kil", vec, diag, vec)
    Q = 0.5 * (Q + np.swapaxes(Q, -1, -2))
    return Q.reshape(batch + (3, 3)), ent.reshape(batch), log_z.reshape(batch)


def log_partition(p, grid=None):
    return float(moments(_as_matrix(p), grid)[2])


def partition(p, grid=None):
    """Z = int exp(m.Bm) dm for B as given (the gauge is not removed here)."""
    B = _as_matrix(p)
    B = 0.5 * (B + B.T)
    shift = np.trace(B) / 3.0
    return float(np.exp(moments(B, grid)[2] + shift))


def moment_Q(p, grid=None):
    return moments(_as_matrix(p), grid)[0]


def entropy(p, grid=None):
    """int f log f for the normalized Bingham density."""
    return float(moments(_as_matrix(p), grid)[1])


def moment_covariance(p, grid=None):
    """Fourth-moment covariance J_ijkl = <m_i m_j m_k m_l> - <m_i m_j><m_k m_l>.

    This is the derivative dQ/dB of the Q-moment.
    """
    B = traceless(_as_matrix(p))
    grid = grid_for(B, grid)
    m = grid.nodes
    ex = np.einsum("qi,ij,qj->q", m, B, m)
    f = np.exp(ex - ex.max()) * grid.weights
    f /= f.sum()
    mm = np.einsum("qi,qj->qij", m, m)
    second = np.einsum("q,qij->ij", f, mm)
    fourth = np.einsum("q,qij,qkl->ijkl", f, mm, mm)
    return fourth - np.einsum("ij,kl->ijkl", second, second)


def homogeneous_energy(p, alpha, grid=None):
    """int f log f + (alpha/2)(2/3 - |Q|^2) for the Bingham density of p."""
    Q, ent, _ = moments(_as_matrix(p), grid)
    return float(ent + 0.5 * alpha * (2.0 / 3.0 - np.sum(Q * Q)))


def homogeneous_gradient(p, alpha, grid=None):
    """Gradient of homogeneous_energy with respect to B: J : (B - alpha Q)."""
    B = traceless(_as_matrix(p))
    Q = moment_Q(B, grid)
    J = moment_covariance(B, grid)
    return np.einsum("ijkl,kl->ij", J, B - alpha * Q)


# ---------------------------------------------------------------------------
# one-dimensional integrals of the uniaxial family


def _weighted_integrals(eta):
    # exponent shifted by max(eta, 0) to keep the integrand <= 1
    shift = eta if eta > 0 else 0.0

    def base(z):
        return np.exp(eta * z * z - shift)

    i0 = _integrate.quad(base, 0.0, 1.0, **_QUAD_OPTS)[0]
    i2 = _integrate.quad(lambda z: z * z * base(z), 0.0, 1.0, **_QUAD_OPTS)[0]
    i24 = _integrate.quad(lambda z: z * z * (1.0 - z * z) * base(z), 0.0, 1.0, **_QUAD_OPTS)[0]
    return i0, i2, i24


def alpha_of_eta(eta):
    """alpha(eta) = int_0^1 e^{eta z^2} / int_0^1 z^2 (1 - z^2) e^{eta z^2}."""
    i0, _, i24 = _weighted_integrals(float(eta))
    return i0 / i24


def s2_of_eta(eta):
    """Degree of orientation <P2(m.nu)> of the density exp(eta (m.nu)^2)."""
    i0, i2, _ = _weighted_integrals(float(eta))
    return 1.5 * i2 / i0 - 0.5


_ETA_STAR = None


def eta_star():
    """Location and value (eta*, alpha*) of the minimum of alpha(eta)."""
    global _ETA_STAR
    if _ETA_STAR is None:
        res = optimize.minimize_scalar(
            alpha_of_eta, bracket=(0.5, 2.0, 5.0), method="golden", tol=1e-10
        )
        _ETA_STAR = (float(res.x), float(res.fun))
    return _ETA_STAR


def _root(alpha, lo, hi):
    g = lambda e: alpha_of_eta(e) - alpha
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise NoBracket(f"no sign change for alpha={alpha} on [{lo}, {hi}]")
    root, info = optimize.brentq(g, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps,
                                 maxiter=500, full_output=True)
    if not info.converged:
        raise NoBracket(f"root finding failed for alpha={alpha}: {info.flag}")
    return float(root)


def eta_branches(alpha):
    """Solutions eta of alpha(eta) = alpha, labeled '0', 'eta2', 'eta1'.

    For alpha > 7.5 the lower nontrivial root is negative (oblate branch),
    so its bracket extends to negative eta.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    es, astar = eta_star()
    point = PhasePoint(alpha=alpha)
    point.eta_branches["0"] = 0.0
    if alpha > astar:
        hi = max(2.0 * es, 10.0)
        while alpha_of_eta(hi) < alpha:
            hi *= 2.0
            if hi > 1e4:
                raise NoBracket(f"cannot bracket eta1 for alpha={alpha}")
        point.eta_branches["eta1"] = _root(alpha, es, hi)

        if alpha < ALPHA_ISOTROPIC:
            point.eta_branches["eta2"] = _root(alpha, 0.0, es)
        elif alpha == ALPHA_ISOTROPIC:
            point.eta_branches["eta2"] = 0.0
        else:
            lo = -10.0
            while alpha_of_eta(lo) < alpha:
                lo *= 2.0
                if lo < -1e4:
                    raise NoBracket(f"cannot bracket eta2 for alpha={alpha}")
            point.eta_branches["eta2"] = _root(alpha, lo, 0.0)
    for key, eta in point.eta_branches.items():
        point.s2[key] = s2_of_eta(eta) if eta != 0.0 else 0.0
    return point


def eta1(alpha):
    """Largest root of alpha(eta) = alpha (the stable nematic branch for alpha > 7.5)."""
    point = eta_branches(alpha)
    if "eta1" not in point.eta_branches:
        raise NoBracket(f"alpha={alpha} is below alpha*; no nematic branch")
    return point.eta_branches["eta1"]


# ---------------------------------------------------------------------------
# homogeneous minimization over the 5-dimensional traceless B space

_S2 = np.sqrt(2.0)
_S6 = np.sqrt(6.0)
_BASIS = np.array([
    [[1, 0, 0], [0, -1, 0], [0, 0, 0]],
    [[-1, 0, 0], [0, -1, 0], [0, 0, 2]],
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
    [[0, 0, 1], [0, 0, 0], [1, 0, 0]],
    [[0, 0, 0], [0, 0, 1], [0, 1, 0]],
], dtype=float) / np.array([_S2, _S6, _S2, _S2, _S2])[:, None, None]


def _from_coords(c):
    return np.einsum("k,kij->ij", c, _BASIS)


def _to_coords(B):
    return np.einsum("kij,ij->k", _BASIS, traceless(B))


def minimize_homogeneous(alpha, grid=None, starts=8, seed=0, max_norm=8.0):
    """Multistart minimization of the homogeneous energy over traceless B.

    Each start runs BFGS with the analytic gradient and is then polished by
    the fixed-point map B <- alpha * Q(B). Returns ``(B, energy, runs)`` for
    the lowest-energy result; ``runs`` lists ``(energy, B)`` per start.
    """
    rng = np.random.default_rng(seed)
    grid = sphere.default_grid() if grid is None else grid

    def fun(c):
        B = _from_coords(c)
        return homogeneous_energy(B, alpha, grid), _to_coords(homogeneous_gradient(B, alpha, grid))

    runs = []
    for k in range(starts):
        c0 = rng.normal(size=5)
        c0 *= rng.uniform(0.1, max_norm) / np.linalg.norm(c0)
        res = optimize.minimize(fun, c0, jac=True, method="BFGS", options={"gtol": 1e-11, "maxiter": 500})
        B = _polish(_from_coords(res.x), alpha, grid)
        runs.append((homogeneous_energy(B, alpha, grid), B))
    best = min(runs, key=lambda r: r[0])
    return best[1], best[0], runs


def _polish(B, alpha, grid, tol=1e-14, max_iter=2000):
    for _ in range(max_iter):
        B_new = alpha * moment_Q(B, grid)
        if np.max(np.abs(B_new - B)) <= tol:
            return B_new
        B = B_new
    return B
