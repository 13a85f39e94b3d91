"""CSV formats: QFIELD-CSV with a metadata sidecar, director dumps and
generic report tables. Floats are written with repr(), which round-trips
exactly and keeps repeated runs byte-identical."""
import csv
from pathlib import Path

import numpy as np

__all__ = [
    "fmt",
    "write_table",
    "read_table",
    "write_qfield",
    "read_qfield",
    "write_directors",
    "read_directors",
]

_AXES = ("x", "y", "z")
Q_COLUMNS = ("Q11", "Q12", "Q13", "Q22", "Q23", "Q33")
_Q_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_table(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _node_rows(coords, mask):
    # row-major traversal (last axis fastest) restricted to mask
    idx = np.argwhere(mask)
    return idx, coords[tuple(idx.T)]


def write_qfield(path, lattice, Q, mask=None, eps=float("nan"), alpha=float("nan"), delta=None, block=None):
    """QFIELD-CSV: ``x,y[,z],Q11,Q12,Q13,Q22,Q23,Q33`` plus ``<path>.meta``.

    ``block`` selects a node block of the lattice (tuple of slices) when Q
    covers only part of it.
    """
    d = lattice.d
    coords = lattice.coords if block is None else lattice.coords[block]
    Q = np.asarray(Q)
    mask = np.ones(Q.shape[:d], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    idx, x = _node_rows(coords, mask)
    q = Q[tuple(idx.T)]
    header = list(_AXES[:d]) + list(Q_COLUMNS)
    rows = [list(xi) + [qi[i, j] for i, j in _Q_INDEX] for xi, qi in zip(x, q)]
    path = write_table(path, header, rows)
    meta = {
        "R": lattice.R,
        "N": lattice.N,
        "d": d,
        "delta": lattice.delta if delta is None else delta,
        "eps": eps,
        "alpha": alpha,
    }
    with Path(str(path) + ".meta").open("w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={fmt(v)}\n")
    return path


def read_qfield(path):
    """Returns ``(coords, Q, meta)`` with Q of shape (rows, 3, 3)."""
    header, rows = read_table(path)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    d = len(header) - 6
    Q = np.zeros((data.shape[0], 3, 3))
    for c, (i, j) in enumerate(_Q_INDEX):
        Q[:, i, j] = data[:, d + c]
        Q[:, j, i] = data[:, d + c]
    meta = {}
    meta_path = Path(str(path) + ".meta")
    if meta_path.exists():
        for line in meta_path.read_text().splitlines():
            k, _, v = line.partition("=")
            meta[k] = float(v)
    return data[:, :d], Q, meta


def write_directors(path, coords, n, mask=None):
    """Director dump ``x,y[,z],nx,ny,nz``."""
    n = np.asarray(n)
    d = coords.shape[-1]
    mask = np.ones(n.shape[:-1], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    idx, x = _node_rows(coords, mask)
    v = n[tuple(idx.T)]
    header = list(_AXES[:d]) + ["nx", "ny", "nz"]
    rows = [list(xi) + list(vi) for xi, vi in zip(x, v)]
    return write_table(path, header, rows)


def read_directors(path):
    header, rows = read_table(path)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    d = len(header) - 3
    return data[:, :d], data[:, d:]
