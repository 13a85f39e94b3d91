"""Small-eps trend with an in-plane boundary director.

The boundary angle is psi = (pi/4)(x + y). For each eps the minimizer's
director field (lifted from Q) is compared with the heat-flow harmonic map.
This takes several minutes on one core.
"""
import numpy as np

from onsager_limit import bingham, solver
from onsager_limit.energy import make_boundary, parse_profile
from onsager_limit.qfield import LatticeBox, Square

alpha = 8.0
lat = LatticeBox(2, 3.0, 384, Square(0.5))
bd = make_boundary(lat, parse_profile(f"planar-linear:{np.pi / 4},{np.pi / 4}"), bingham.eta1(alpha))
cfg = solver.SolverConfig(alpha=alpha, sigma=0.25, tol_q=1e-12)


def progress(eps, rep, qe, de):
    print(f"eps = {eps:.1e}: converged {rep.converged}, Q error {qe:.3e}, director error {de:.3e}, "
          f"apriori {rep.apriori:.3f}")


res = solver.eps_scan(cfg, [4e-3, 2e-3, 1e-3], bd, progress=progress)
d = res.director_error
print("director error ratios:", " ".join(f"{b / a:.3f}" for a, b in zip(d, d[1:])))
