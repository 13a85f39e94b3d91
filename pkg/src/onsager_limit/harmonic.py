"""Harmonic maps into S^2 on lattice blocks: projected heat flow, weak
residual, Dirichlet and Oseen-Frank energies, and director comparison."""
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import NonConvergence, ZeroVector

__all__ = [
    "OFConstants",
    "HeatFlowResult",
    "dirichlet_nodes",
    "discrete_laplacian",
    "heat_flow",
    "weak_residual",
    "dirichlet_energy",
    "oseen_frank_energy",
    "saddle_splay_integral",
    "compare_directors",
    "harmonic_extension",
    "equatorial_map",
]


@dataclass(frozen=True)
class OFConstants:
    k1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    k4: float = 0.0


@dataclass
class HeatFlowResult:
    values: np.ndarray
    mask: np.ndarray
    dirichlet: np.ndarray
    iterations: int
    residual: float
    energy_trace: list = field(default_factory=list)


def dirichlet_nodes(mask):
    """Nodes of ``mask`` with a lattice neighbor outside it (or on the array edge)."""
    mask = np.asarray(mask, dtype=bool)
    inner = np.ones_like(mask)
    for ax in range(mask.ndim):
        for shift in (-1, 1):
            nb = np.zeros_like(mask)
            src = [slice(None)] * mask.ndim
            dst = [slice(None)] * mask.ndim
            if shift == 1:
                src[ax], dst[ax] = slice(1, None), slice(0, -1)
            else:
                src[ax], dst[ax] = slice(0, -1), slice(1, None)
            nb[tuple(dst)] = mask[tuple(src)]
            inner &= nb
    return mask & ~inner


def discrete_laplacian(n, h):
    """Standard (2d+1)-point Laplacian over the leading spatial axes; zero on
    the outermost layer of the block."""
    d = n.ndim - 1
    lap = np.zeros_like(n)
    core = tuple([slice(1, -1)] * d)
    for ax in range(d):
        lo = [slice(1, -1)] * d
        hi = [slice(1, -1)] * d
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        lap[core] += n[tuple(lo)] + n[tuple(hi)] - 2.0 * n[core]
    return lap / h**2


def _normalize(v):
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise ZeroVector("normalization of a (near) zero vector; reduce the step")
    return v / norm


def heat_flow(n0, mask, h, step=None, tol=1e-10, max_iter=200000, dirichlet=None,
              energy_every=0, raise_on_failure=True):
    """Projected gradient flow n <- normalize(n + step * Lap_h n) on free nodes.

    Stops when max |P_n Lap_h n| over free nodes is <= tol, where P_n is the
    projection onto the tangent space at n.
    """
    n = np.array(n0, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    d = n.ndim - 1
    if np.any(np.abs(np.linalg.norm(n[mask], axis=-1) - 1.0) > 1e-12):
        raise ValueError("initial field must be unit length on the mask")
    dirichlet = dirichlet_nodes(mask) if dirichlet is None else np.asarray(dirichlet, dtype=bool)
    free = mask & ~dirichlet
    step = 0.9 * h**2 / (2 * d) if step is None else float(step)
    trace = []
    res = np.inf
    it = 0
    for it in range(max_iter + 1):
        lap = discrete_laplacian(n, h)
        tang = lap - np.sum(lap * n, axis=-1, keepdims=True) * n
        res = float(np.max(np.linalg.norm(tang[free], axis=-1), initial=0.0))
        if energy_every and it % energy_every == 0:
            trace.append(dirichlet_energy(n, h, mask, scheme="edge"))
        if res <= tol:
            break
        if it == max_iter:
            break
        upd = n[free] + step * lap[free]
        n[free] = _normalize(upd)
    result = HeatFlowResult(n, mask, dirichlet, it, res, trace)
    if res > tol and raise_on_failure:
        raise NonConvergence(f"heat flow residual {res:.3e} > tol {tol:.1e} after {it} iterations", result)
    return result


def _hat_1d(L, center, width):
    idx = np.arange(L)
    return np.maximum(0.0, 1.0 - np.abs(idx - center) / width)


def weak_residual(n, h, mask=None, test_resolution=4, dirichlet=None):
    """max over hat test fields phi of |sum_j int d_j phi . (n x d_j n)|.

    Derivatives are forward differences on lattice edges, so the value is
    the exact weak form of the discrete harmonic-map equation. Test fields
    are tensor-product hats of half-width ``test_resolution`` nodes centered
    on a stride-``test_resolution`` sublattice, times each unit vector, and
    supported on free nodes only.
    """
    n = np.asarray(n, dtype=float)
    d = n.ndim - 1
    shape = n.shape[:-1]
    mask = np.ones(shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    dirichlet = dirichlet_nodes(mask) if dirichlet is None else dirichlet
    free = mask & ~dirichlet
    s = int(test_resolution)
    if s < 1:
        raise ValueError("test_resolution must be >= 1")

    # w_j on edges (x, x + e_j): n(x) x (n(x + e_j) - n(x)) / h, zero off-mask
    ws = []
    for ax in range(d):
        a = [slice(None)] * d
        b = [slice(None)] * d
        a[ax] = slice(0, -1)
        b[ax] = slice(1, None)
        a, b = tuple(a), tuple(b)
        w = np.zeros(shape + (3,))
        both = mask[a] & mask[b]
        val = np.cross(n[a], n[b] - n[a]) / h
        val[~both] = 0.0
        w[a] = val
        ws.append(w)

    centers = [np.arange(s, L - s, s) for L in shape]
    worst = 0.0
    for c in np.array(np.meshgrid(*centers, indexing="ij")).reshape(d, -1).T:
        lo = [int(ci) - s for ci in c]
        hi = [int(ci) + s + 1 for ci in c]
        sl = tuple(slice(l, u) for l, u in zip(lo, hi))
        if not np.all(free[tuple(slice(l + 1, u - 1) for l, u in zip(lo, hi))]):
            continue
        hats = [_hat_1d(u - l, s, s) for l, u in zip(lo, hi)]
        H = hats[0]
        for extra in hats[1:]:
            H = np.multiply.outer(H, extra)
        total = np.zeros(3)
        for ax in range(d):
            dH = np.zeros_like(H)
            a = [slice(None)] * d
            b = [slice(None)] * d
            a[ax] = slice(0, -1)
            b[ax] = slice(1, None)
            dH[tuple(a)] = (H[tuple(b)] - H[tuple(a)]) / h
            total += np.sum(dH[..., None] * ws[ax][sl], axis=tuple(range(d)))
        worst = max(worst, float(np.max(np.abs(total))) * h**d)
    return worst


def _gradients(n, h, scheme="central"):
    """G[i] = d_i n over the spatial axes, shape (d, ..., 3)."""
    d = n.ndim - 1
    if scheme == "central":
        return np.stack([np.gradient(n, h, axis=i, edge_order=2) for i in range(d)])
    raise ValueError(scheme)


def dirichlet_energy(n, h, mask=None, scheme="central"):
    """(1/2) int |grad n|^2.

    ``scheme='central'`` uses second-order central differences (one-sided at
    the block edge); ``scheme='edge'`` sums squared forward differences over
    edges inside the mask, the energy whose gradient flow is heat_flow.
    """
    n = np.asarray(n, dtype=float)
    d = n.ndim - 1
    if mask is None:
        mask = np.ones(n.shape[:-1], dtype=bool)
    if scheme == "edge":
        total = 0.0
        for ax in range(d):
            a = [slice(None)] * d
            b = [slice(None)] * d
            a[ax] = slice(0, -1)
            b[ax] = slice(1, None)
            a, b = tuple(a), tuple(b)
            both = mask[a] & mask[b]
            diff = (n[b] - n[a])[both] / h
            total += float(np.sum(diff * diff))
        return 0.5 * total * h**d
    G = _gradients(n, h, scheme)
    dens = np.sum(G * G, axis=(0, -1))
    return 0.5 * float(np.sum(dens[mask])) * h**d


def _of_terms(n, h):
    n = np.asarray(n, dtype=float)
    d = n.ndim - 1
    G = _gradients(n, h)
    full = np.zeros((3,) + n.shape)  # full[i, ..., j] = d_i n_j, zero for i >= d
    full[:d] = G
    div = sum(full[i, ..., i] for i in range(3))
    curl = np.stack([
        full[1, ..., 2] - full[2, ..., 1],
        full[2, ..., 0] - full[0, ..., 2],
        full[0, ..., 1] - full[1, ..., 0],
    ], axis=-1)
    twist = np.sum(n * curl, axis=-1)
    bend = np.cross(n, curl)
    tr_sq = sum(full[i, ..., j] * full[j, ..., i] for i in range(3) for j in range(3))
    return div, twist, bend, tr_sq


def saddle_splay_integral(n, h, mask=None):
    """int (tr(grad n)^2 - (div n)^2)."""
    div, _, _, tr_sq = _of_terms(n, h)
    dens = tr_sq - div**2
    if mask is None:
        mask = np.ones(dens.shape, dtype=bool)
    return float(np.sum(dens[mask])) * h ** (np.asarray(n).ndim - 1)


def oseen_frank_energy(n, h, c=OFConstants(), mask=None):
    """int k1/2 (div n)^2 + k2/2 (n.curl n)^2 + k3/2 |n x curl n|^2
    + (k2 + k4)/2 (tr(grad n)^2 - (div n)^2)."""
    div, twist, bend, tr_sq = _of_terms(n, h)
    dens = (0.5 * c.k1 * div**2 + 0.5 * c.k2 * twist**2 + 0.5 * c.k3 * np.sum(bend * bend, axis=-1)
            + 0.5 * (c.k2 + c.k4) * (tr_sq - div**2))
    if mask is None:
        mask = np.ones(dens.shape, dtype=bool)
    return float(np.sum(dens[mask])) * h ** (np.asarray(n).ndim - 1)


def compare_directors(n_a, n_b, region, h=None):
    """min over sigma = +-1 of ||n_a - sigma n_b||_{L2(region)}."""
    n_a = np.asarray(n_a, dtype=float)
    n_b = np.asarray(n_b, dtype=float)
    region = np.asarray(region, dtype=bool)
    d = region.ndim
    dv = 1.0 if h is None else h**d
    a = n_a[region]
    b = n_b[region]
    plus = np.sum((a - b) ** 2) * dv
    minus = np.sum((a + b) ** 2) * dv
    return float(np.sqrt(min(plus, minus)))


def harmonic_extension(values, mask, dirichlet=None):
    """Discrete harmonic extension of a scalar field: the (2d+1)-point
    Laplacian vanishes on free nodes, values are kept on Dirichlet nodes."""
    values = np.asarray(values, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    dirichlet = dirichlet_nodes(mask) if dirichlet is None else dirichlet
    free = mask & ~dirichlet
    shape = values.shape
    d = len(shape)
    idx = -np.ones(shape, dtype=np.int64)
    idx[free] = np.arange(int(free.sum()))
    rows, cols, vals = [], [], []
    rhs = np.zeros(int(free.sum()))
    fidx = np.argwhere(free)
    me = idx[free]
    rows.append(me)
    cols.append(me)
    vals.append(np.full(me.shape, -2.0 * d))
    for ax in range(d):
        for sh in (-1, 1):
            nb = fidx.copy()
            nb[:, ax] += sh
            nb_t = tuple(nb.T)
            j = idx[nb_t]
            inner = j >= 0
            rows.append(me[inner])
            cols.append(j[inner])
            vals.append(np.ones(int(inner.sum())))
            rhs[~inner] -= values[nb_t][~inner]
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(me.size, me.size))
    out = values.copy()
    out[free] = spsolve(A.tocsc(), rhs)
    return out


def equatorial_map(psi):
    """(cos psi, sin psi, 0)."""
    psi = np.asarray(psi, dtype=float)
    return np.stack([np.cos(psi), np.sin(psi), np.zeros_like(psi)], axis=-1)
