"""Self-consistent mean-field minimization of the nonlocal energy with
Euler-Lagrange certification and continuation in eps."""
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import bingham, harmonic, kernel, sphere
from .energy import (
    Problem,
    State,
    apriori_quantity,
    boundary_state,
    energy,
    pack_sym,
    state_from_interior,
    unpack_sym,
)
from .errors import ConfigError, NonConvergence
from .qfield import orient_lift, uniaxial_q

__all__ = [
    "SolverConfig",
    "SolverReport",
    "ScanResult",
    "make_problem",
    "mean_field",
    "scf_step",
    "el_residual",
    "solve",
    "minimize",
    "eps_scan",
]

GAP_TOL = 1e-8
THETA_FLOOR = 1.0 / 64.0
ANDERSON_SWITCH = 1e-2


@dataclass
class SolverConfig:
    alpha: float = 8.0
    eps: float = 4e-3
    sigma: float = 0.25
    theta: float = 0.5
    tol_q: float = 1e-8
    tol_el: float = 1e-6
    max_iter: int = 2000
    restarts: int = 4
    seed: int = 0
    anderson_depth: int = 6
    coupling: str = "omega"

    @property
    def delta(self):
        return self.eps ** (0.5 - self.sigma)

    def validate(self, h=None):
        if not self.alpha > bingham.ALPHA_ISOTROPIC:
            raise ConfigError(f"alpha must exceed 7.5 for limit runs, got {self.alpha}", "alpha")
        if not 0.0 < self.sigma < 0.5:
            raise ConfigError(f"sigma must lie in (0, 1/2), got {self.sigma}", "sigma")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError(f"theta must lie in (0, 1], got {self.theta}", "theta")
        if not 0.0 < self.eps < 1.0:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}", "eps_list")
        if self.tol_q <= 0 or self.tol_el <= 0:
            raise ConfigError("tolerances must be positive", "tol_q" if self.tol_q <= 0 else "tol_el")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive", "max_iter")
        if self.restarts < 0:
            raise ConfigError("restarts must be >= 0", "restarts")
        if self.delta < np.sqrt(self.eps):
            raise ConfigError("delta = eps^(1/2 - sigma) must be >= sqrt(eps)", "sigma")
        if h is not None and self.delta < 2.0 * h:
            raise ConfigError(
                f"delta = {self.delta:.4g} is not resolved: needs >= 2 lattice spacings ({2 * h:.4g})",
                "lattice_n",
            )
        return self


@dataclass
class SolverReport:
    eps: float
    alpha: float
    delta: float
    restart: int
    init: str
    converged: bool
    accepted: bool
    iterations: int
    residual_q: float
    el_residual: float
    entropy: float
    bulk: float
    nonlocal_: float
    C1: float
    total: float
    apriori: float
    min_gap: float
    theta: float
    seconds: float
    runs: list = field(default_factory=list, repr=False)

    @classmethod
    def columns(cls):
        names = [f.name for f in fields(cls) if f.name != "runs"]
        return [("nonlocal" if n == "nonlocal_" else n) for n in names]

    def row(self):
        return [getattr(self, f.name) for f in fields(self) if f.name != "runs"]


def make_problem(config, boundary, spec=None, grid=None):
    lat = boundary.lattice.with_delta(config.delta)
    config.validate(lat.h)
    spec = kernel.KernelSpec(lat.d, 0.5) if spec is None else spec
    grid = sphere.default_grid() if grid is None else grid
    bd = replace(boundary, lattice=lat)
    return Problem(lat, bd, spec, config.eps, config.alpha, config.sigma, grid, config.coupling)


# ---------------------------------------------------------------------------
# fixed-point map


class _Map:
    """The map B_free -> alpha * M(Q(B_free)) restricted to the free nodes."""

    def __init__(self, problem):
        self.pr = problem
        w = problem.window
        self.Qb_w = pack_sym(problem.boundary.Q[w])
        self.free_w = problem.free_w

    def moments(self, B_free):
        return bingham.moments(B_free, self.pr.grid)

    def field(self, Q_free):
        Qw = self.Qb_w.copy()
        Qw[self.free_w] = pack_sym(Q_free)
        return self.pr.mean_field_packed(Qw)

    def __call__(self, Q_free):
        M = self.field(Q_free)[self.free_w]
        return bingham.traceless(unpack_sym(M))


def mean_field(state):
    """alpha * (Q *_Omega g_eps) on the window (alpha * (Q * g_eps) for the
    full-space coupling), as a (window shape, 3, 3) array in traceless gauge."""
    pr = state.problem
    M = pr.mean_field_packed(pack_sym(state.Q[pr.window]))
    return bingham.traceless(unpack_sym(M))


def scf_step(state, theta=0.5):
    """One damped fixed-point step on the free nodes.

    Q_candidate = moment_Q(alpha M); the new Q is (1 - theta) Q_old +
    theta Q_candidate, realized by the Bingham density whose exponent is the
    same mixture of exponents. Returns ``(new_state, residual)`` with
    residual = max |Q_candidate - Q_old|_F.
    """
    pr = state.problem
    free = pr.lattice.interior
    Bc = mean_field(state)[pr.free_w]
    Qc = bingham.moments(Bc, pr.grid)[0]
    res = float(np.max(np.linalg.norm(Qc - state.Q[free], axis=(-2, -1)), initial=0.0))
    if theta == 0:
        return state.copy(), res
    B_new = (1.0 - theta) * state.B[free] + theta * Bc
    return state_from_interior(pr, B_new), res


def el_residual(state):
    """max over free nodes of |sum_i Q^i x (Q^i *_Omega g_eps)| (rows Q^i)."""
    pr = state.problem
    M = mean_field(state)[pr.free_w] / pr.alpha
    Q = state.Q[pr.lattice.interior]
    C = Q @ M
    v = np.stack([C[:, 1, 2] - C[:, 2, 1], C[:, 2, 0] - C[:, 0, 2], C[:, 0, 1] - C[:, 1, 0]], axis=-1)
    return float(np.max(np.linalg.norm(v, axis=-1), initial=0.0))


# ---------------------------------------------------------------------------
# Anderson-accelerated damped iteration


def solve(problem, B0_free, config, callback=None):
    """Iterate from the free-node exponents ``B0_free`` until the Q-residual
    drops below ``config.tol_q``. Returns ``(state, info)``.

    The undamped step is a convex-concave splitting step (the kernel is
    positive semidefinite), so plain damped steps are used while the residual
    is above ``ANDERSON_SWITCH``; below it Anderson mixing accelerates the
    slow rotational modes. If an accelerated iterate is much worse than the
    best one seen, the iteration returns to the best iterate and drops the
    mixing history. Damping halves after two consecutive residual increases.
    """
    fmap = _Map(problem)
    x = bingham.traceless(np.asarray(B0_free, dtype=float))
    K = x.shape[0]
    theta = config.theta
    depth = max(int(config.anderson_depth), 0)
    dX, dF = [], []
    x_prev = f_prev = None
    history = []
    increases = 0
    converged = False
    bound = 6.0 * problem.alpha
    best = (np.inf, x)
    cooldown = 0
    it = 0
    Gx = x
    for it in range(1, config.max_iter + 1):
        Qx = fmap.moments(x)[0]
        Gx = fmap(Qx)
        Qc = fmap.moments(Gx)[0]
        res = float(np.max(np.linalg.norm(Qc - Qx, axis=(-2, -1)), initial=0.0))
        if not np.isfinite(res):
            break
        history.append(res)
        if callback is not None:
            callback(it, res, theta)
        if res <= config.tol_q:
            converged = True
            break
        if res < best[0]:
            best = (res, x)
        if len(history) >= 2 and history[-1] > history[-2]:
            increases += 1
        else:
            increases = 0
        if increases >= 2:
            theta = max(0.5 * theta, THETA_FLOOR)
            increases = 0
            dX.clear()
            dF.clear()
            x_prev = f_prev = None

        accelerate = depth > 0 and res < ANDERSON_SWITCH and cooldown == 0
        if accelerate and res > 10.0 * best[0]:
            # restart from the best iterate with plain steps for a while
            x = best[1]
            Qx = fmap.moments(x)[0]
            Gx = fmap(Qx)
            dX.clear()
            dF.clear()
            x_prev = f_prev = None
            cooldown = 10
            accelerate = False
        cooldown = max(cooldown - 1, 0)

        f = (Gx - x).reshape(K, 9)
        xf = x.reshape(K, 9)
        if not accelerate:
            x = bingham.traceless(x + theta * (Gx - x))
            x_prev = f_prev = None
            dX.clear()
            dF.clear()
            continue
        if x_prev is not None:
            dX.append((xf - x_prev).ravel())
            dF.append((f - f_prev).ravel())
            if len(dX) > depth:
                dX.pop(0)
                dF.pop(0)
        x_prev, f_prev = xf.copy(), f.copy()
        step = theta * f.ravel()
        if dF:
            Fm = np.stack(dF, axis=1)
            Xm = np.stack(dX, axis=1)
            gamma = np.linalg.lstsq(Fm, f.ravel(), rcond=1e-12)[0]
            step = step - (Xm + theta * Fm) @ gamma
        x_new = bingham.traceless((xf.ravel() + step).reshape(K, 3, 3))
        if K and np.max(np.abs(np.linalg.eigvalsh(x_new))) > bound:
            # extrapolation ran away: plain damped step, fresh history
            x_new = bingham.traceless(x + theta * (Gx - x))
            dX.clear()
            dF.clear()
            x_prev = f_prev = None
        x = x_new

    state = state_from_interior(problem, Gx)
    info = {
        "converged": converged,
        "iterations": it,
        "residual_q": history[-1] if history else float("nan"),
        "theta": theta,
        "history": history,
    }
    return state, info


def _smooth_random_directors(rng, coords, eta, modes=4, scale=1.0):
    """Uniaxial exponents eta n n with n a normalized sum of random
    low-frequency Fourier modes (smooth, few defects)."""
    d = coords.shape[-1]
    v = np.zeros(coords.shape[:-1] + (3,))
    for _ in range(modes):
        k = rng.normal(size=d) * (np.pi / scale)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal(size=3)
        v += np.cos(coords @ k + phase)[..., None] * amp
    v += 1e-3 * rng.normal(size=3)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return eta * np.einsum("...i,...j->...ij", v, v)


def _initial_guesses(problem, config, warm=None):
    free = problem.lattice.interior
    K = int(free.sum())
    eta = problem.boundary.eta
    guesses = []
    if warm is not None:
        guesses.append(("warm", warm[free]))
    guesses.append(("h_nb", problem.boundary.B[free]))
    extra = []
    if config.restarts >= 1:
        extra.append(("isotropic", np.zeros((K, 3, 3))))
    rng = np.random.default_rng(config.seed)
    coords = problem.lattice.coords[free]
    while len(extra) < config.restarts:
        extra.append((f"random{len(extra)}", _smooth_random_directors(rng, coords, eta)))
    return guesses + extra


def _report_for(state, info, restart, init, config, seconds, ref_total):
    pr = state.problem
    rep = energy(state)
    el = el_residual(state)
    gap = rep.total - ref_total
    apr = apriori_quantity(state)
    accepted = bool(info["converged"] and el <= config.tol_el and gap <= GAP_TOL)
    return SolverReport(
        eps=pr.eps, alpha=pr.alpha, delta=pr.delta, restart=restart, init=init,
        converged=bool(info["converged"]), accepted=accepted, iterations=info["iterations"],
        residual_q=info["residual_q"], el_residual=el, entropy=rep.entropy, bulk=rep.bulk,
        nonlocal_=rep.nonlocal_, C1=rep.C1, total=rep.total, apriori=apr, min_gap=gap,
        theta=info["theta"], seconds=seconds,
    )


def minimize(config, boundary, spec=None, grid=None, warm=None, raise_on_failure=False):
    """Multistart solve; returns ``(best_state, report)``.

    Starts: an optional warm start (full-lattice exponent field), h_{n_b}
    everywhere, the isotropic interior and randomized uniaxial interiors
    (``config.restarts`` in total beyond h_{n_b}). The lowest-energy converged
    run wins; if none converged, the lowest-residual run is returned with
    ``report.converged = False``.
    """
    problem = boundary if isinstance(boundary, Problem) else make_problem(config, boundary, spec, grid)
    ref_total = energy(boundary_state(problem)).total
    results = []
    for k, (label, B0) in enumerate(_initial_guesses(problem, config, warm)):
        t0 = time.perf_counter()
        st, info = solve(problem, B0, config)
        rep = _report_for(st, info, k, label, config, time.perf_counter() - t0, ref_total)
        results.append((st, rep))
    conv = [r for r in results if r[1].converged]
    if conv:
        best_state, best = min(conv, key=lambda r: r[1].total)
    else:
        best_state, best = min(results, key=lambda r: r[1].residual_q)
    best.runs = [r[1] for r in results]
    if raise_on_failure and not best.converged:
        raise NonConvergence(f"no run reached tol_q={config.tol_q} within {config.max_iter} iterations",
                             (best_state, best))
    return best_state, best


# ---------------------------------------------------------------------------
# eps continuation


@dataclass
class ScanResult:
    reports: list
    q_error: list
    director_error: list
    apriori: list
    states: list = field(default_factory=list, repr=False)
    reference: object = None

    COLUMNS = ("eps", "delta", "converged", "accepted", "iterations", "el_residual", "total",
               "min_gap", "apriori", "q_error", "director_error")

    def rows(self):
        out = []
        for rep, qe, de in zip(self.reports, self.q_error, self.director_error):
            out.append([rep.eps, rep.delta, rep.converged, rep.accepted, rep.iterations,
                        rep.el_residual, rep.total, rep.min_gap, rep.apriori, qe, de])
        return out


def reference_director(boundary, tol=1e-10, max_iter=200000):
    """Heat-flow harmonic map on Omega with Dirichlet data n_b, started from n_b."""
    lat = boundary.lattice
    w = lat.window(0)
    mask = lat.omega[w]
    n0 = boundary.n_b[w]
    return harmonic.heat_flow(n0, mask, lat.h, tol=tol, max_iter=max_iter)


def eps_scan(config, eps_list, boundary, spec=None, grid=None, keep_states=False, reference=None,
             progress=None):
    """Solve along a strictly decreasing eps sequence with warm starts and
    compare each minimizer with the harmonic-map limit."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps_list must be strictly decreasing", "eps_list")
    lat = boundary.lattice
    w = lat.window(0)
    omega_w = lat.omega[w]
    if reference is None:
        reference = reference_director(boundary).values
    s2 = bingham.eta1(config.alpha) / config.alpha
    q_limit = uniaxial_q(np.full(reference.shape[:-1], s2), reference)

    reports, q_err, d_err, apr, states = [], [], [], [], []
    warm = None
    for eps in eps_list:
        cfg = SolverConfig(**{**config.__dict__, "eps": eps})
        st, rep = minimize(cfg, boundary, spec, grid, warm=warm)
        warm = st.B
        free_w = st.problem.free_w
        diff = st.Q[w] - q_limit
        qe = np.sqrt(np.sum(diff[free_w] ** 2) * lat.cell_volume)
        lifted = orient_lift(st.Q[w], omega_w)
        de = harmonic.compare_directors(lifted.values, reference, omega_w, lat.h)
        reports.append(rep)
        q_err.append(float(qe))
        d_err.append(float(de))
        apr.append(rep.apriori)
        if keep_states:
            states.append(st)
        if progress is not None:
            progress(eps, rep, qe, de)
    return ScanResult(reports, q_err, d_err, apr, states, reference)
