"""Homogeneous phase diagram of the Maier-Saupe model.

Prints alpha(eta) and s2(eta) along the Bingham branch, the turning point
(eta*, alpha*) and the three critical points at alpha = 8.
"""
import numpy as np

from onsager_limit import bingham

print(f"{'eta':>6} {'alpha(eta)':>12} {'s2(eta)':>10} {'s2 - eta/alpha':>15}")
for eta in np.linspace(0.0, 20.0, 11):
    a = bingham.alpha_of_eta(eta)
    s2 = bingham.s2_of_eta(eta)
    print(f"{eta:6.1f} {a:12.6f} {s2:10.6f} {s2 - eta / a:15.2e}")

es, astar = bingham.eta_star()
print(f"\nturning point: eta* = {es:.6f}, alpha* = {astar:.6f}")
print(f"isotropic instability threshold alpha(0) = {bingham.alpha_of_eta(0.0):.12f}")

pp = bingham.eta_branches(8.0)
print("\ncritical points at alpha = 8:")
for label, eta in pp.eta_branches.items():
    print(f"  {label}: eta = {eta:+.8f}, s2 = {pp.s2[label]:+.8f}")

B, E, _ = bingham.minimize_homogeneous(8.0)
print(f"\nmultistart minimum: energy {E:.10f}, eigenvalues of Q {np.linalg.eigvalsh(bingham.moment_Q(B))}")
