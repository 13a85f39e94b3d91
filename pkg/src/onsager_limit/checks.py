"""Diagnostic suites shared by the command line and the demos.

Each suite returns rows ``(check, value, tolerance, passed)`` where
``passed`` means ``value <= tolerance`` unless stated otherwise.
"""
import numpy as np

from . import bingham, kernel, sphere
from .qfield import director_extract, uniaxiality_residual

__all__ = [
    "band_limited_field",
    "bump",
    "smooth_cutoff",
    "periodic_grid",
    "bingham_suite",
    "kernel_suite",
    "operator_suite",
    "t_limit_errors",
    "factorization_residual",
    "commutator_ratios",
]


def periodic_grid(n, h, d=2):
    """Centered coordinates of an n^d periodic block with spacing h."""
    ax = (np.arange(n) - n // 2) * h
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)


def band_limited_field(rng, n, h, d=2, cutoff=4.0):
    """Real random field whose spectrum is supported in |xi| <= cutoff."""
    U = np.fft.fftn(rng.normal(size=(n,) * d))
    f = np.fft.fftfreq(n, d=h)
    r2 = sum(g * g for g in np.meshgrid(*([f] * d), indexing="ij"))
    U[r2 > cutoff**2] = 0.0
    return np.fft.ifftn(U).real


def bump(x, width2=0.1):
    """exp(-|x|^2 / width2) and its gradient (leading axis = direction)."""
    r2 = np.sum(x * x, axis=-1)
    u = np.exp(-r2 / width2)
    grad = np.moveaxis(-2.0 * x / width2 * u[..., None], -1, 0)
    return u, grad


def smooth_cutoff(x, radius=0.8):
    """C-infinity function supported in the ball of given radius, and its gradient."""
    r2 = np.sum(x * x, axis=-1) / radius**2
    inside = r2 < 1.0
    phi = np.zeros(r2.shape)
    t = np.where(inside, 1.0 - r2, 1.0)
    phi[inside] = np.exp(1.0 - 1.0 / t[inside])
    # d/dx exp(1 - 1/(1 - r2)) = phi * (-1/(1-r2)^2) * 2x / radius^2
    coef = np.where(inside, -phi / t**2 * 2.0 / radius**2, 0.0)
    grad = np.moveaxis(coef[..., None] * x, -1, 0)
    return phi, grad


def factorization_residual(u, spec, eps, h):
    """||A_eps u - sum_k T^k T^k u|| / ||u|| on the periodic block."""
    A = kernel.A_eps(u, spec, eps, h, pad=0)
    T = kernel.T_eps(u, spec, eps, h, pad=0)
    TT = sum(kernel.apply_T_component(T[k], k, spec, eps, h, pad=0) for k in range(spec.d))
    return float(np.linalg.norm(A - TT) / np.linalg.norm(u))


def t_limit_errors(spec, eps_values, n=201, h=0.02, width2=0.1):
    """E(eps) = ||T_eps u + i c* grad u|| for a Gaussian bump u."""
    x = periodic_grid(n, h, spec.d)
    u, grad = bump(x, width2)
    out = []
    for eps in eps_values:
        T = kernel.T_eps(u, spec, eps, h, pad=0)
        out.append(kernel.l2_norm(T + 1j * spec.limit_const * grad, h, spec.d))
    return out


def commutator_ratios(spec, eps_values, samples=20, seed=0, n=201, h=0.02, radius=0.8):
    """Per eps: (max norm ratio over random u, max limit error)."""
    rng = np.random.default_rng(seed)
    x = periodic_grid(n, h, spec.d)
    phi, grad_phi = smooth_cutoff(x, radius)
    fields = [band_limited_field(rng, n, h, spec.d) for _ in range(samples)]
    out = []
    for eps in eps_values:
        ratios, limits = [], []
        for u in fields:
            r, lim = kernel.commutator_diag(phi, u, spec, eps, h, pad=0, grad_phi=grad_phi)
            ratios.append(r)
            limits.append(lim / kernel.l2_norm(u, h, spec.d))
        out.append((max(ratios), max(limits)))
    return out


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def bingham_suite(alpha=8.0, grid=None, seed=0, starts=8):
    grid = sphere.default_grid() if grid is None else grid
    rng = np.random.default_rng(seed)
    rows = []

    def add(name, value, tol):
        rows.append((name, float(value), float(tol), bool(value <= tol)))

    add("sphere_total_weight", abs(grid.weights.sum() - 4 * np.pi), 1e-12)
    add("sphere_m3_squared", abs(sphere.integrate(grid, grid.nodes[:, 2] ** 2) - 4 * np.pi / 3), 1e-12)
    nu = rng.normal(size=3)
    nu /= np.linalg.norm(nu)
    add("sphere_m_dot_nu_fourth", abs(sphere.integrate(grid, (grid.nodes @ nu) ** 4) - 4 * np.pi / 5), 1e-12)

    res_a = res_b = 0.0
    for _ in range(100):
        u = rng.normal(size=3)
        m = rng.normal(size=3)
        m /= np.linalg.norm(m)
        a, b = sphere.rotational_identity_check(u, m)
        res_a, res_b = max(res_a, a), max(res_b, b)
    add("rotational_identity_a", res_a, 1e-13)
    add("rotational_identity_b", res_b, 1e-13)
    ibp = max(sphere.integration_by_parts_residual(grid, rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
              for _ in range(20))
    add("integration_by_parts", ibp, 1e-10)

    add("alpha_of_eta_at_0", abs(bingham.alpha_of_eta(0.0) - 7.5), 1e-9)
    es, astar = bingham.eta_star()
    add("alpha_star_vs_6.7314", abs(astar - 6.7314), 5e-3)
    for eta in (0.5, 1.0, 2.0, 5.0, 10.0, 20.0):
        add(f"s2_minus_eta_over_alpha_eta={eta:g}", abs(bingham.s2_of_eta(eta) - eta / bingham.alpha_of_eta(eta)), 1e-8)

    e1 = bingham.eta1(alpha)
    worst = 0.0
    for _ in range(10):
        nu = rng.normal(size=3)
        nu /= np.linalg.norm(nu)
        Q = bingham.moment_Q(e1 * np.outer(nu, nu), grid)
        target = (e1 / alpha) * (np.outer(nu, nu) - np.eye(3) / 3)
        worst = max(worst, np.linalg.norm(Q - target))
    add(f"uniaxial_moment_identity_alpha={alpha:g}", worst, 1e-8)

    B, E, _ = bingham.minimize_homogeneous(alpha, grid, starts=starts, seed=seed)
    Q = bingham.moment_Q(B, grid)
    add("homogeneous_min_uniaxiality", float(uniaxiality_residual(Q)), 1e-6)
    s, _ = director_extract(Q)
    add("homogeneous_min_s_minus_eta1_over_alpha", abs(s - e1 / alpha), 1e-6)

    R = _random_rotation(rng)
    Bt = bingham.traceless(rng.normal(size=(3, 3)) * 2)
    Qr = bingham.moment_Q(R.T @ Bt @ R, grid)
    add("moment_equivariance", np.linalg.norm(Qr - R.T @ bingham.moment_Q(Bt, grid) @ R), 1e-10)
    return rows


def kernel_suite(a=np.pi / 2, d=2, seed=0, eps_values=(1e-1, 1e-2, 1e-3)):
    spec = kernel.KernelSpec(d, a)
    rows = []

    def add(name, value, tol, passed=None):
        rows.append((name, float(value), float(tol), bool(value <= tol) if passed is None else bool(passed)))

    chk = kernel.assumption_check(spec, xi_max=8.0)
    add("ghat_min_nonnegative", -chk["ghat_min"], 0.0)
    add("ghat_max_minus_1", chk["ghat_max"] - 1.0, 0.0)
    add("assumption_margin_violation", max(-chk["margin_min"], 0.0), 0.0)
    add("mu_quadrature_error", abs(kernel.mu_quadrature(spec) - spec.d / (2 * spec.a)), 1e-10)
    add("grad_ghat_at_zero", float(np.max(np.abs(kernel.grad_ghat_at_zero(spec)))), 1e-8)

    rng = np.random.default_rng(seed)
    n, h = 81, 0.05
    u = band_limited_field(rng, n, h, d)
    for eps in eps_values:
        add(f"factorization_eps={eps:g}", factorization_residual(u, spec, eps, h), 1e-10)
    E = t_limit_errors(spec, eps_values)
    for eps, e in zip(eps_values, E):
        rows.append((f"T_limit_error_eps={eps:g}", float(e), float("nan"), True))
    for k in range(1, len(E)):
        ratio = E[k] / E[k - 1]
        add(f"T_limit_ratio_{k}", ratio, 0.2)
    return rows


def operator_suite(a=np.pi / 2, d=2, seed=0, eps_values=(1.0, 1e-2, 1e-4), samples=20):
    spec = kernel.KernelSpec(d, a)
    res = commutator_ratios(spec, eps_values, samples=samples, seed=seed)
    rows = []
    for eps, (ratio, lim) in zip(eps_values, res):
        rows.append((f"commutator_ratio_eps={eps:g}", ratio, float("nan"), True))
        rows.append((f"commutator_limit_error_eps={eps:g}", lim, float("nan"), True))
    ratios = [r for r, _ in res]
    spread = max(ratios) / min(ratios)
    rows.append(("commutator_ratio_spread", spread, 10.0, bool(spread < 10.0)))
    return rows
