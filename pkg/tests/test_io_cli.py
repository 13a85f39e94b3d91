import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from onsager_limit import bingham, cli, io
from onsager_limit.errors import ConfigError
from onsager_limit.qfield import LatticeBox, Square, uniaxial_q

SMALL_SOLVE = """\
alpha = 8
eps_list = 0.02
sigma = 0.1
lattice_n = 120
lattice_r = 3
boundary_profile = constant
restarts = 1
tol_q = 1e-10
"""


def write_config(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def outputs(out_dir, command):
    return sorted(Path(out_dir).glob(f"{command}_*.csv"))


def test_qfield_roundtrip(tmp_path):
    lat = LatticeBox(2, 3.0, 48, Square(0.5), delta=0.2)
    rng = np.random.default_rng(0)
    Q = bingham.traceless(rng.normal(size=lat.shape + (3, 3)))
    p = io.write_qfield(tmp_path / "q.csv", lat, Q, lat.omega, eps=0.01, alpha=8.0)
    coords, Qr, meta = io.read_qfield(p)
    assert coords.shape == (int(lat.omega.sum()), 2)
    np.testing.assert_array_equal(Qr, Q[lat.omega])
    np.testing.assert_array_equal(coords, lat.coords[lat.omega])
    assert meta == {"R": 3.0, "N": 48.0, "d": 2.0, "delta": 0.2, "eps": 0.01, "alpha": 8.0}
    header = p.read_text().splitlines()[0]
    assert header == "x,y,Q11,Q12,Q13,Q22,Q23,Q33"


def test_director_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    coords = rng.normal(size=(5, 6, 2))
    n = rng.normal(size=(5, 6, 3))
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    mask = rng.random((5, 6)) < 0.7
    p = io.write_directors(tmp_path / "n.csv", coords, n, mask)
    c, v = io.read_directors(p)
    np.testing.assert_array_equal(c, coords[mask])
    np.testing.assert_array_equal(v, n[mask])
    assert p.read_text().splitlines()[0] == "x,y,nx,ny,nz"


def test_fmt():
    assert io.fmt(True) == "1" and io.fmt(np.int64(3)) == "3"
    assert float(io.fmt(0.1 + 0.2)) == 0.1 + 0.2
    assert io.fmt("a") == "a"


def test_parse_config():
    raw = cli.parse_config_text("# comment\nalpha = 8  # inline\n\neps_list = 0.1, 0.05\n")
    assert raw == {"alpha": "8", "eps_list": "0.1, 0.05"}
    cfg = cli.resolve_config({**raw, "out_dir": "x", "lattice_n": "64", "lattice_r": "3",
                              "boundary_profile": "constant"}, "eps-scan")
    assert cfg["eps_list"] == [0.1, 0.05] and cfg["alpha"] == 8.0
    assert cfg["kernel_a"] == 0.5 and cfg["sigma"] == 0.25
    assert cli.resolve_config({"out_dir": "x"}, "kernel-check")["kernel_a"] == pytest.approx(np.pi / 2)


@pytest.mark.parametrize("text,key", [
    ("bogus = 1", "bogus"),
    ("alpha = 8\nalpha = 9", "alpha"),
    ("alpha = eight", "alpha"),
])
def test_parse_errors(text, key):
    with pytest.raises(ConfigError) as exc:
        cli.resolve_config(cli.parse_config_text(text), "bingham-check")
    assert exc.value.key == key


@pytest.mark.parametrize("extra,key", [
    ({"alpha": "7.4"}, "alpha"),
    ({"sigma": "0.5"}, "sigma"),
    ({"kernel_a": "3.2"}, "kernel_a"),
    ({"boundary_profile": "spiral"}, "boundary_profile"),
    ({"eps_list": "1.5"}, "eps_list"),
])
def test_range_errors(extra, key):
    raw = {"out_dir": "x", "alpha": "8", "eps_list": "0.01", "lattice_n": "64", "lattice_r": "3",
           "boundary_profile": "constant", **extra}
    with pytest.raises(ConfigError) as exc:
        cli.resolve_config(raw, "minimize")
    assert exc.value.key == key


def test_missing_key_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "alpha = 8\neps_list = 0.01\nlattice_n = 64\nlattice_r = 3\n")
    rc = cli.main(["minimize", str(cfg), "--out-dir", str(tmp_path / "out")])
    assert rc == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error code=2 kind=config key=boundary_profile ")
    assert len(err.splitlines()) == 1


def test_unknown_command_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "")
    assert cli.main(["fly", str(cfg)]) == 2
    assert "key=command" in capsys.readouterr().err
    assert cli.main([str(tmp_path / "missing.cfg")]) == 2


def test_phase_diagram(tmp_path):
    cfg = write_config(tmp_path, "command = phase-diagram\nalpha = 8\n")
    out = tmp_path / "out"
    assert cli.main([str(cfg), "--out-dir", str(out)]) == 0
    table, summary = outputs(out, "phase-diagram")
    header, rows = io.read_table(table)
    assert header == ["eta", "alpha", "s2", "s2_minus_eta_over_alpha"]
    data = np.array(rows, dtype=float)
    assert data[0, 0] == 0.0 and data[-1, 0] == 20.0
    assert abs(data[:, 1].min() - 6.7314) <= 5e-3
    assert np.max(np.abs(data[:, 3])) <= 1e-8
    vals = dict(io.read_table(summary)[1])
    assert abs(float(vals["alpha_star"]) - 6.7314) <= 5e-3
    assert abs(float(vals["alpha_at_eta_0"]) - 7.5) <= 1e-9
    assert float(vals["branch_eta1_eta"]) == pytest.approx(bingham.eta1(8.0), abs=1e-12)

    manifest = (out / "manifest.txt").read_text().splitlines()
    assert "command = phase-diagram" in manifest
    assert "alpha = 8.0" in manifest
    assert f"file = {table.name}" in manifest and f"file = {summary.name}" in manifest


@pytest.mark.parametrize("command", ["bingham-check", "kernel-check", "operator-check"])
def test_suite_commands(tmp_path, command):
    cfg = write_config(tmp_path, "alpha = 8\n")
    out = tmp_path / "out"
    assert cli.main([command, str(cfg), "--out-dir", str(out)]) == 0
    (table,) = outputs(out, command)
    header, rows = io.read_table(table)
    assert header == ["check", "value", "tolerance", "passed"]
    assert rows and all(r[3] == "1" for r in rows)


def test_minimize_command(tmp_path):
    cfg = write_config(tmp_path, SMALL_SOLVE)
    out = tmp_path / "out"
    assert cli.main(["minimize", str(cfg), "--out-dir", str(out)]) == 0
    names = {p.name.split("_", 2)[-1] if p.name.count("_") > 1 else "" for p in outputs(out, "minimize")}
    assert {"energy.csv", "qfield.csv", "director.csv"} <= names
    runs = [p for p in outputs(out, "minimize") if p.name.count("_") == 1][0]
    header, rows = io.read_table(runs)
    gap = [float(r[header.index("min_gap")]) for r in rows]
    assert min(gap) <= 1e-8
    qf = [p for p in outputs(out, "minimize") if p.name.endswith("_qfield.csv")][0]
    coords, Q, meta = io.read_qfield(qf)
    assert meta["eps"] == 0.02 and meta["alpha"] == 8.0 and meta["N"] == 120
    assert coords.shape[0] == 20 * 20
    center = np.argmin(np.sum(coords**2, axis=1))
    target = uniaxial_q(bingham.eta1(8.0) / 8.0, np.array([0, 0, 1.0]))
    assert np.linalg.norm(Q[center] - target) <= 1e-2


def test_minimize_nonconvergence_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL_SOLVE.replace("constant", "planar-linear:0.785398,0.785398")
                       + "max_iter = 2\n")
    assert cli.main(["minimize", str(cfg), "--out-dir", str(tmp_path / "out")]) == 3
    assert "kind=solver" in capsys.readouterr().err


def test_harmonic_map_command(tmp_path):
    cfg = write_config(tmp_path, "lattice_n = 96\nlattice_r = 3\nboundary_profile = planar-linear:0.785398,0.785398\n")
    out = tmp_path / "out"
    assert cli.main(["harmonic-map", str(cfg), "--out-dir", str(out)]) == 0
    table, summary = outputs(out, "harmonic-map")
    coords, n = io.read_directors(table)
    psi = 0.785398 * (coords[:, 0] + coords[:, 1])
    ref = np.stack([np.cos(psi), np.sin(psi), 0 * psi], -1)
    assert np.max(np.abs(np.sum(n * ref, axis=1)) - 1) <= 1e-12
    assert np.min(np.abs(np.sum(n * ref, axis=1))) >= 1 - 1e-12
    vals = dict(io.read_table(summary)[1])
    assert float(vals["weak_residual"]) <= 1e-9


def test_deterministic_csv(tmp_path):
    cfg = write_config(tmp_path, SMALL_SOLVE.replace("constant", "planar-linear:0.785398,0.785398"))
    contents = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert cli.main(["minimize", str(cfg), "--out-dir", str(out)]) == 0
        contents.append([p.read_bytes() for p in outputs(out, "minimize")])
    assert len(contents[0]) == 4
    assert contents[0] == contents[1]


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, "command = kernel-check\n")
    proc = subprocess.run([sys.executable, "-m", "onsager_limit", str(cfg), "--out-dir", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "manifest.txt").exists()
