"""Command-line driver.

Usage::

    onsager-limit [COMMAND] CONFIG [--out-dir DIR]

CONFIG is a plain ``key = value`` file; ``command`` may be given there or on
the command line. Every run writes ``<command>_<timestamp>.csv`` (plus
companion files for some commands) and ``manifest.txt`` into ``out_dir``.

Exit status: 0 success, 2 configuration error, 3 solver non-convergence,
4 invariant violation. Errors are reported as one line on stderr:
``error code=<n> kind=<kind> key=<key> message="<text>"``.
"""
import argparse
import datetime as _dt
import sys
from pathlib import Path

import numpy as np

from . import bingham, checks, energy, harmonic, io, solver, sphere
from .errors import ConfigError, InvariantViolation, NonConvergence
from .kernel import KernelSpec
from .qfield import Disk, LatticeBox, Square, orient_lift

COMMANDS = ("phase-diagram", "bingham-check", "kernel-check", "operator-check", "minimize", "eps-scan",
            "harmonic-map")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4

# key -> (parser, default); default None means "required where used"
_FLOAT_LIST = "float_list"
KEYS = {
    "command": (str, None),
    "out_dir": (str, None),
    "alpha": (float, None),
    "eps_list": (_FLOAT_LIST, None),
    "sigma": (float, 0.25),
    "theta": (float, 0.5),
    "tol_q": (float, 1e-8),
    "tol_el": (float, 1e-6),
    "max_iter": (int, 2000),
    "restarts": (int, 4),
    "lattice_n": (int, None),
    "lattice_r": (float, None),
    "sphere_polar": (int, 24),
    "sphere_azimuth": (int, 48),
    "boundary_profile": (str, None),
    "seed": (int, 0),
    # additional keys
    "kernel_a": (float, None),
    "dimension": (int, 2),
    "coupling": (str, "omega"),
    "anderson_depth": (int, 6),
    "eta_min": (float, 0.0),
    "eta_max": (float, 20.0),
    "eta_count": (int, 201),
    "domain": (str, "square"),
    "domain_size": (float, 0.5),
}

REQUIRED = {
    "phase-diagram": (),
    "bingham-check": ("alpha",),
    "kernel-check": (),
    "operator-check": (),
    "minimize": ("alpha", "eps_list", "lattice_n", "lattice_r", "boundary_profile"),
    "eps-scan": ("alpha", "eps_list", "lattice_n", "lattice_r", "boundary_profile"),
    "harmonic-map": ("lattice_n", "lattice_r", "boundary_profile"),
}


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment. Returns raw strings."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value", None)
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r} on line {lineno}", key)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} on line {lineno}", key)
        raw[key] = value.strip()
    return raw


def _convert(key, text):
    kind = KEYS[key][0]
    try:
        if kind == _FLOAT_LIST:
            vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
            if not vals:
                raise ValueError("empty list")
            return vals
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key}={text!r}: {exc}", key) from None


def resolve_config(raw, command=None):
    """Typed, validated configuration with defaults filled in."""
    cfg = {k: _convert(k, v) for k, v in raw.items()}
    if command is not None:
        cfg["command"] = command
    if "command" not in cfg:
        raise ConfigError("missing required key 'command'", "command")
    cmd = cfg["command"]
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}", "command")
    if "out_dir" not in cfg:
        raise ConfigError("missing required key 'out_dir'", "out_dir")
    for key in REQUIRED[cmd]:
        if key not in cfg:
            raise ConfigError(f"missing required key {key!r} for {cmd}", key)
    for key, (_, default) in KEYS.items():
        if key not in cfg and default is not None:
            cfg[key] = default
    if "kernel_a" not in cfg:
        cfg["kernel_a"] = 0.5 if cmd in ("minimize", "eps-scan") else float(np.pi / 2)
    _validate(cfg)
    return cfg


def _validate(cfg):
    cmd = cfg["command"]
    if not 0.0 < cfg["kernel_a"] < np.pi:
        raise ConfigError("kernel_a must lie in (0, pi)", "kernel_a")
    if cfg["dimension"] not in (2, 3):
        raise ConfigError("dimension must be 2 or 3", "dimension")
    if not 0.0 < cfg["sigma"] < 0.5:
        raise ConfigError("sigma must lie in (0, 1/2)", "sigma")
    if not 0.0 < cfg["theta"] <= 1.0:
        raise ConfigError("theta must lie in (0, 1]", "theta")
    if cfg["sphere_polar"] < 2 or cfg["sphere_azimuth"] < 4:
        raise ConfigError("sphere grid needs sphere_polar >= 2 and sphere_azimuth >= 4", "sphere_polar")
    if cfg["coupling"] not in ("omega", "full"):
        raise ConfigError("coupling must be omega or full", "coupling")
    if cfg["domain"] not in ("square", "disk"):
        raise ConfigError("domain must be square or disk", "domain")
    if cmd in ("minimize", "eps-scan"):
        if not cfg["alpha"] > 7.5:
            raise ConfigError("alpha must exceed 7.5 for limit runs", "alpha")
        if any(not 0.0 < e < 1.0 for e in cfg["eps_list"]):
            raise ConfigError("eps values must lie in (0, 1)", "eps_list")
    if cmd == "bingham-check" and not cfg["alpha"] > bingham.eta_star()[1]:
        raise ConfigError("alpha must exceed alpha* for the nematic branch", "alpha")
    if cmd in ("minimize", "eps-scan", "harmonic-map"):
        if cfg["lattice_n"] < 8:
            raise ConfigError("lattice_n must be >= 8", "lattice_n")
        if cfg["lattice_r"] <= 0:
            raise ConfigError("lattice_r must be positive", "lattice_r")
        try:
            energy.parse_profile(cfg["boundary_profile"])
        except ValueError as exc:
            raise ConfigError(str(exc), "boundary_profile") from None


def _timestamp():
    return _dt.datetime.now().strftime("%Y%m%dT%H%M%S")


class _Out:
    def __init__(self, out_dir, command):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        stem = f"{command}_{_timestamp()}"
        k = 1
        while (self.dir / f"{stem}.csv").exists():
            stem = f"{command}_{_timestamp()}_{k}"
            k += 1
        self.stem = stem
        self.files = []

    def path(self, suffix=""):
        p = self.dir / f"{self.stem}{suffix}.csv"
        self.files.append(p.name)
        return p


def _write_manifest(out, cfg):
    lines = [f"{k} = {_fmt_value(cfg[k])}" for k in sorted(cfg)]
    lines += [f"file = {name}" for name in out.files]
    (out.dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _fmt_value(v):
    if isinstance(v, list):
        return ",".join(io.fmt(x) for x in v)
    return io.fmt(v)


def _grid(cfg):
    return sphere.build_grid(cfg["sphere_polar"], cfg["sphere_azimuth"])


def _lattice(cfg):
    dom = Square(cfg["domain_size"]) if cfg["domain"] == "square" else Disk(cfg["domain_size"])
    try:
        return LatticeBox(cfg["dimension"], cfg["lattice_r"], cfg["lattice_n"], dom)
    except ValueError as exc:
        raise ConfigError(str(exc), "lattice_r") from None


def _solver_config(cfg, eps):
    return solver.SolverConfig(
        alpha=cfg["alpha"], eps=eps, sigma=cfg["sigma"], theta=cfg["theta"], tol_q=cfg["tol_q"],
        tol_el=cfg["tol_el"], max_iter=cfg["max_iter"], restarts=cfg["restarts"], seed=cfg["seed"],
        anderson_depth=cfg["anderson_depth"], coupling=cfg["coupling"],
    )


def _suite_rows(rows):
    return [[name, value, tol, passed] for name, value, tol, passed in rows]


def cmd_phase_diagram(cfg, out):
    etas = np.linspace(cfg["eta_min"], cfg["eta_max"], cfg["eta_count"])
    rows = []
    for eta in etas:
        a = bingham.alpha_of_eta(eta)
        s2 = bingham.s2_of_eta(eta)
        rows.append([float(eta), a, s2, s2 - float(eta) / a])
    io.write_table(out.path(), ["eta", "alpha", "s2", "s2_minus_eta_over_alpha"], rows)
    es, astar = bingham.eta_star()
    summary = [["eta_star", es], ["alpha_star", astar], ["alpha_at_eta_0", bingham.alpha_of_eta(0.0)]]
    if "alpha" in cfg:
        pp = bingham.eta_branches(cfg["alpha"])
        for label, eta in pp.eta_branches.items():
            summary.append([f"branch_{label}_eta", eta])
            summary.append([f"branch_{label}_s2", pp.s2[label]])
    io.write_table(out.path("_summary"), ["quantity", "value"], summary)
    return EXIT_OK


def _suite(out, rows):
    io.write_table(out.path(), ["check", "value", "tolerance", "passed"], _suite_rows(rows))
    return EXIT_OK if all(r[3] for r in rows) else EXIT_INVARIANT


def cmd_bingham_check(cfg, out):
    return _suite(out, checks.bingham_suite(cfg["alpha"], _grid(cfg), cfg["seed"]))


def cmd_kernel_check(cfg, out):
    return _suite(out, checks.kernel_suite(cfg["kernel_a"], cfg["dimension"], cfg["seed"]))


def cmd_operator_check(cfg, out):
    return _suite(out, checks.operator_suite(cfg["kernel_a"], cfg["dimension"], cfg["seed"]))


def _boundary(cfg):
    lat = _lattice(cfg)
    eta = bingham.eta1(cfg["alpha"])
    return energy.make_boundary(lat, energy.parse_profile(cfg["boundary_profile"]), eta, _grid(cfg))


def cmd_minimize(cfg, out):
    eps = cfg["eps_list"][0]
    bd = _boundary(cfg)
    spec = KernelSpec(cfg["dimension"], cfg["kernel_a"])
    scfg = _solver_config(cfg, eps)
    state, rep = solver.minimize(scfg, bd, spec, _grid(cfg))
    cols = [c for c in solver.SolverReport.columns() if c != "seconds"]
    rows = [[v for c, v in zip(solver.SolverReport.columns(), r.row()) if c != "seconds"] for r in rep.runs]
    io.write_table(out.path(), cols, rows)
    er = energy.energy(state)
    er.apriori, er.min_gap = rep.apriori, rep.min_gap
    io.write_table(out.path("_energy"), list(energy.EnergyReport.FIELDS), [er.row()])
    lat = state.problem.lattice
    w = lat.window(0)
    io.write_qfield(out.path("_qfield"), lat, state.Q[w], lat.omega[w], eps=eps, alpha=cfg["alpha"], block=w)
    out.files.append(out.files[-1] + ".meta")
    try:
        lifted = orient_lift(state.Q[w], lat.omega[w])
        io.write_directors(out.path("_director"), lat.coords[w], lifted.values, lat.omega[w])
    except Exception as exc:  # a failed lift is reported, the solve itself stands
        print(f"warning: director lift failed: {exc}", file=sys.stderr)
    if not rep.converged:
        raise NonConvergence(f"no restart reached tol_q={scfg.tol_q}")
    return EXIT_OK


def cmd_eps_scan(cfg, out):
    bd = _boundary(cfg)
    spec = KernelSpec(cfg["dimension"], cfg["kernel_a"])
    scfg = _solver_config(cfg, cfg["eps_list"][0])
    result = solver.eps_scan(scfg, cfg["eps_list"], bd, spec, _grid(cfg))
    io.write_table(out.path(), list(solver.ScanResult.COLUMNS), result.rows())
    cols = [c for c in solver.SolverReport.columns() if c != "seconds"]
    runs = []
    for rep in result.reports:
        for r in rep.runs:
            runs.append([v for c, v in zip(solver.SolverReport.columns(), r.row()) if c != "seconds"])
    io.write_table(out.path("_runs"), cols, runs)
    if not all(r.converged for r in result.reports):
        raise NonConvergence("an eps value did not converge")
    return EXIT_OK


def cmd_harmonic_map(cfg, out):
    lat = _lattice(cfg)
    prof = energy.parse_profile(cfg["boundary_profile"])
    w = lat.window(0)
    mask = lat.omega[w]
    nb = prof(lat.coords[w])
    res = harmonic.heat_flow(nb, mask, lat.h, tol=1e-10, max_iter=cfg["max_iter"] * 100)
    io.write_directors(out.path(), lat.coords[w], res.values, mask)
    summary = [
        ["iterations", res.iterations],
        ["projected_gradient", res.residual],
        ["weak_residual", harmonic.weak_residual(res.values, lat.h, mask)],
        ["dirichlet_energy", harmonic.dirichlet_energy(res.values, lat.h, mask)],
        ["max_deviation_from_data", float(np.max(np.linalg.norm(res.values - nb, axis=-1)[mask]))],
    ]
    io.write_table(out.path("_summary"), ["quantity", "value"], summary)
    return EXIT_OK


HANDLERS = {
    "phase-diagram": cmd_phase_diagram,
    "bingham-check": cmd_bingham_check,
    "kernel-check": cmd_kernel_check,
    "operator-check": cmd_operator_check,
    "minimize": cmd_minimize,
    "eps-scan": cmd_eps_scan,
    "harmonic-map": cmd_harmonic_map,
}


def _error(code, kind, message, key=None):
    msg = str(message).replace("\n", " ").replace('"', "'")
    print(f'error code={code} kind={kind} key={key or "-"} message="{msg}"', file=sys.stderr)
    return code


def run(command, config_path, out_dir=None):
    """Run one command from a config file; returns the exit status."""
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        return _error(EXIT_CONFIG, "config", f"cannot read config: {exc}")
    try:
        raw = parse_config_text(text)
        if out_dir is not None:
            raw["out_dir"] = out_dir
        cfg = resolve_config(raw, command)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, "config", exc, exc.key)

    out = _Out(cfg["out_dir"], cfg["command"])
    try:
        status = HANDLERS[cfg["command"]](cfg, out)
    except ConfigError as exc:
        status = _error(EXIT_CONFIG, "config", exc, exc.key)
    except NonConvergence as exc:
        status = _error(EXIT_SOLVER, "solver", exc)
    except InvariantViolation as exc:
        status = _error(EXIT_INVARIANT, "invariant", exc)
    else:
        if status == EXIT_INVARIANT:
            _error(EXIT_INVARIANT, "invariant", "a check exceeded its tolerance; see the CSV")
    _write_manifest(out, cfg)
    return status


def main(argv=None):
    parser = argparse.ArgumentParser(prog="onsager-limit", description=__doc__.split("\n\n")[0])
    parser.add_argument("args", nargs="+", metavar="[COMMAND] CONFIG")
    parser.add_argument("--out-dir", default=None)
    ns = parser.parse_args(argv)
    if len(ns.args) == 1:
        command, config = None, ns.args[0]
    elif len(ns.args) == 2:
        command, config = ns.args
        if command not in COMMANDS:
            return _error(EXIT_CONFIG, "config", f"unknown command {command!r}", "command")
    else:
        return _error(EXIT_CONFIG, "config", "expected [COMMAND] CONFIG")
    return run(command, config, ns.out_dir)


if __name__ == "__main__":
    sys.exit(main())
