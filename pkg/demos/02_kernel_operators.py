"""Gaussian interaction kernel and the operators A_eps and T_eps.

Checks the kernel assumptions, the factorization A_eps = sum_k T^k T^k,
the first-order limit T_eps u -> -i c* grad u and the eps-uniform
commutator bound.
"""
import numpy as np

from onsager_limit import checks, kernel
from onsager_limit.kernel import KernelSpec

spec = KernelSpec(2, np.pi / 2)
chk = kernel.assumption_check(spec, xi_max=8.0)
print(f"a = pi/2: ghat in [{chk['ghat_min']:.2e}, {chk['ghat_max']:.2f}], worst margin {chk['margin_min']:.3e}")
print(f"mu by quadrature {kernel.mu_quadrature(spec):.12f}  closed form {spec.d / (2 * spec.a):.12f}")
print(f"limit constant c* = {spec.limit_const:.6f}")

rng = np.random.default_rng(0)
u = checks.band_limited_field(rng, 81, 0.05)
for eps in (1e-1, 1e-2, 1e-3):
    print(f"eps = {eps:g}: factorization residual {checks.factorization_residual(u, spec, eps, 0.05):.2e}")

E = checks.t_limit_errors(spec, (1e-1, 1e-2, 1e-3))
print("\n||T_eps u + i c* grad u||:", " ".join(f"{e:.3e}" for e in E))
print("ratios:", " ".join(f"{b / a:.3f}" for a, b in zip(E, E[1:])))

res = checks.commutator_ratios(spec, (1.0, 1e-2, 1e-4), samples=20)
print("\nmax ||[T_eps, phi] u|| / ||u|| over 20 fields:")
for eps, (ratio, lim) in zip((1.0, 1e-2, 1e-4), res):
    print(f"  eps = {eps:g}: {ratio:.4f}   (distance to limit commutator {lim:.2e})")
