"""Binary snapshots (QHD1 fields, MON1 ensembles) and CSV/plot writers.

Both binary formats start with ASCII ``key value`` lines, one per line.
The header ends at the ``kind`` line (QHD1) or the ``step`` line (MON1);
little-endian float64 data follows immediately.  Unknown keys before the
terminating line are ignored by the readers.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .fields import MadelungPair, WaveField
from .grid import LatticeGrid

QHD_MAGIC = "QHD1"
MON_MAGIC = "MON1"
_LE = np.dtype("<f8")


def _fmt(x: float) -> str:
    return repr(float(x))


# --- QHD1 ------------------------------------------------------------------

@dataclass
class FieldSnapshot:
    kind: str  # complex | real | pair
    dims: tuple[int, ...]
    lengths: tuple[float, ...]
    data: np.ndarray | tuple[np.ndarray, np.ndarray]
    particles: tuple[int, int] | None = None
    hbar: float = 1.0
    mass: float = 1.0

    @property
    def rank(self) -> int:
        return len(self.dims)

    def grid(self) -> LatticeGrid:
        n, d = self.particles or ((1, self.rank) if self.rank <= 3 else (self.rank, 1))
        return LatticeGrid(n, d, self.dims, self.lengths, allow_large=True)

    def to_state(self) -> WaveField | MadelungPair | np.ndarray:
        if self.kind == "complex":
            return WaveField(self.grid(), self.data, self.hbar, self.mass)
        if self.kind == "pair":
            rho, S = self.data
            return MadelungPair(self.grid(), rho, S)
        return np.asarray(self.data)


def write_qhd1(path, kind: str, dims: Sequence[int], lengths: Sequence[float], data,
               *, particles: tuple[int, int] | None = None, hbar: float | None = None,
               mass: float | None = None) -> Path:
    """Low-level writer; ``data`` is an array, or a ``(rho, S)`` tuple for pairs."""
    dims = tuple(int(n) for n in dims)
    if kind == "complex":
        arr = np.asarray(data, np.complex128).reshape(dims)
        flat = np.empty(arr.size * 2)
        flat[0::2] = arr.real.ravel()
        flat[1::2] = arr.imag.ravel()
    elif kind == "real":
        flat = np.asarray(data, float).reshape(dims).ravel()
    elif kind == "pair":
        rho, S = data
        flat = np.concatenate([np.asarray(rho, float).reshape(dims).ravel(),
                               np.asarray(S, float).reshape(dims).ravel()])
    else:
        raise ValidationError(f"unknown snapshot kind {kind!r}")
    lines = [f"magic {QHD_MAGIC}", f"rank {len(dims)}", "dims " + " ".join(map(str, dims)),
             "lengths " + " ".join(_fmt(x) for x in lengths)]
    if particles is not None:
        lines.append(f"particles {particles[0]} {particles[1]}")
    if hbar is not None:
        lines.append(f"hbar {_fmt(hbar)}")
    if mass is not None:
        lines.append(f"mass {_fmt(mass)}")
    lines.append(f"kind {kind}")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        fh.write(flat.astype(_LE).tobytes())
    return path


def save_state(path, state: WaveField | MadelungPair) -> Path:
    grid = state.grid
    particles = (grid.n_particles, grid.dims_per_particle)
    if isinstance(state, WaveField):
        return write_qhd1(path, "complex", grid.points, grid.lengths, state.values,
                          particles=particles, hbar=state.hbar, mass=state.mass)
    if isinstance(state, MadelungPair):
        return write_qhd1(path, "pair", grid.points, grid.lengths, (state.rho, state.phase),
                          particles=particles)
    raise TypeError(f"cannot snapshot {type(state).__name__}")


def _read_header(fh, terminator: str, magic: str) -> dict[str, list[str]]:
    header: dict[str, list[str]] = {}
    for _ in range(64):
        line = fh.readline()
        if not line:
            break
        try:
            key, *vals = line.decode("ascii").split()
        except (UnicodeDecodeError, ValueError):
            raise ValidationError("malformed snapshot header") from None
        header[key] = vals
        if key == terminator:
            break
    if header.get("magic") != [magic]:
        raise ValidationError(f"not a {magic} file")
    if terminator not in header:
        raise ValidationError(f"{magic} header has no {terminator!r} line")
    return header


def read_qhd1(path) -> FieldSnapshot:
    with open(path, "rb") as fh:
        head = _read_header(fh, "kind", QHD_MAGIC)
        payload = fh.read()
    try:
        rank = int(head["rank"][0])
        dims = tuple(int(x) for x in head["dims"])
        lengths = tuple(float(x) for x in head["lengths"])
        kind = head["kind"][0]
    except (KeyError, IndexError, ValueError):
        raise ValidationError("QHD1 header is missing rank/dims/lengths/kind") from None
    if len(dims) != rank or len(lengths) != rank:
        raise ValidationError("QHD1 dims/lengths do not match rank")
    size = int(np.prod(dims))
    per = {"complex": 2, "real": 1, "pair": 2}.get(kind)
    if per is None:
        raise ValidationError(f"unknown snapshot kind {kind!r}")
    flat = np.frombuffer(payload, dtype=_LE).astype(float)
    if flat.size != per * size:
        raise ValidationError(f"QHD1 payload has {flat.size} values, expected {per * size}")
    if kind == "complex":
        data = (flat[0::2] + 1j * flat[1::2]).reshape(dims)
    elif kind == "real":
        data = flat.reshape(dims)
    else:
        data = (flat[:size].reshape(dims), flat[size:].reshape(dims))
    particles = tuple(int(x) for x in head["particles"]) if "particles" in head else None
    hbar = float(head["hbar"][0]) if "hbar" in head else 1.0
    mass = float(head["mass"][0]) if "mass" in head else 1.0
    return FieldSnapshot(kind, dims, lengths, data, particles, hbar, mass)


# --- MON1 ------------------------------------------------------------------

def save_ensemble(path, ens) -> Path:
    lines = [f"magic {MON_MAGIC}", f"count {ens.n}", f"dim {ens.dim}", f"mu {_fmt(ens.mu)}",
             f"seed {ens.rng_seed}", "box " + " ".join(_fmt(b) for b in ens.box),
             f"step {ens.step}"]
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(ens.positions).astype(_LE).tobytes())
        fh.write(np.ascontiguousarray(ens.velocities).astype(_LE).tobytes())
    return path


def load_ensemble(path, box: Sequence[float] | None = None):
    """Read a MON1 checkpoint; ``box`` is required if the file lacks one."""
    from .kinetics.ensemble import MonadEnsemble

    with open(path, "rb") as fh:
        head = _read_header(fh, "step", MON_MAGIC)
        payload = fh.read()
    try:
        n, d = int(head["count"][0]), int(head["dim"][0])
        mu, seed, step = float(head["mu"][0]), int(head["seed"][0]), int(head["step"][0])
    except (KeyError, IndexError, ValueError):
        raise ValidationError("MON1 header is missing count/dim/mu/seed/step") from None
    if "box" in head:
        box = tuple(float(x) for x in head["box"])
    elif box is None:
        raise ValidationError("MON1 file has no box line; pass box explicitly")
    flat = np.frombuffer(payload, dtype=_LE).astype(float)
    if flat.size != 2 * n * d:
        raise ValidationError(f"MON1 payload has {flat.size} values, expected {2 * n * d}")
    return MonadEnsemble(flat[: n * d].reshape(n, d), flat[n * d:].reshape(n, d), mu, box,
                         seed, step)


def sniff(path) -> str:
    with open(path, "rb") as fh:
        first = fh.readline().decode("ascii", "replace").split()
    if first[:1] == ["magic"] and len(first) == 2 and first[1] in (QHD_MAGIC, MON_MAGIC):
        return first[1]
    raise ValidationError(f"{path}: not a QHD1 or MON1 file")


# --- text outputs ---------------------------------------------------------

def provenance_lines(config_text: str | None, version: str, extra: dict | None = None) -> list[str]:
    lines = [f"# qhdlab {version}"]
    if config_text is not None:
        digest = hashlib.sha256(config_text.encode("utf-8")).hexdigest()
        lines.append(f"# config-sha256 {digest}")
    for k, v in (extra or {}).items():
        lines.append(f"# {k} {v}")
    return lines


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    """CSV with ``#`` comment lines first; floats use ``repr`` for exact round trips."""
    buf = io.StringIO()
    for c in comments:
        buf.write(c + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """Returns (comment lines, header, numeric rows)."""
    comments, body = [], []
    for line in Path(path).read_text().splitlines():
        (comments if line.startswith("#") else body).append(line)
    rows = list(csv.reader(body))
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]]) if len(rows) > 1 else np.empty((0, len(header)))
    return comments, header, data


def snapshot_to_csv(src, dst) -> Path:
    """Flatten a QHD1 or MON1 file into one CSV row per grid point or monad."""
    magic = sniff(src)
    if magic == MON_MAGIC:
        ens = load_ensemble(src)
        d = ens.dim
        header = [f"x{a}" for a in range(d)] + [f"v{a}" for a in range(d)]
        rows = np.hstack([ens.positions, ens.velocities]).tolist()
        return write_csv(dst, header, rows)
    snap = read_qhd1(src)
    grid_axes = [-0.5 * L + (L / n) * np.arange(n) for n, L in zip(snap.dims, snap.lengths)]
    mesh = np.meshgrid(*grid_axes, indexing="ij")
    cols = [m.ravel() for m in mesh]
    header = [f"x{a}" for a in range(snap.rank)]
    if snap.kind == "complex":
        cols += [snap.data.real.ravel(), snap.data.imag.ravel()]
        header += ["re", "im"]
    elif snap.kind == "real":
        cols.append(snap.data.ravel())
        header.append("value")
    else:
        cols += [snap.data[0].ravel(), snap.data[1].ravel()]
        header += ["rho", "S"]
    return write_csv(dst, header, np.column_stack(cols).tolist())


def write_plot_data(path, grid: LatticeGrid, columns: dict[str, np.ndarray],
                    comments: Sequence[str] = ()) -> Path:
    """Gnuplot-friendly whitespace table; 2D fields get blank lines between scan rows."""
    if grid.rank not in (1, 2):
        raise ValidationError("plot data is written for 1D and 2D fields only")
    names = list(columns)
    out = io.StringIO()
    for c in comments:
        out.write(c + "\n")
    out.write("# " + " ".join([f"x{a}" for a in range(grid.rank)] + names) + "\n")
    if grid.rank == 1:
        x = grid.axis_coords(0)
        for i in range(grid.points[0]):
            out.write(" ".join(_fmt(v) for v in [x[i]] + [columns[n][i] for n in names]) + "\n")
    else:
        x, y = grid.axis_coords(0), grid.axis_coords(1)
        for i in range(grid.points[0]):
            for j in range(grid.points[1]):
                vals = [x[i], y[j]] + [columns[n][i, j] for n in names]
                out.write(" ".join(_fmt(v) for v in vals) + "\n")
            out.write("\n")
    path = Path(path)
    path.write_text(out.getvalue())
    return path


def moments_to_csv(path, fields, comments: Sequence[str] = ()) -> Path:
    """One row per cell: center, count, rho, u, sigma (upper triangle), h, eps, E."""
    d = len(fields.cells)
    centers = fields.centers()
    header = [f"x{a}" for a in range(d)] + ["count", "rho"] + [f"u{a}" for a in range(d)]
    pairs = [(a, b) for a in range(d) for b in range(a, d)]
    header += [f"sigma{a}{b}" for a, b in pairs] + [f"h{a}" for a in range(d)] + ["eps", "E"]
    ncell = int(np.prod(fields.cells))
    u = fields.u.reshape(ncell, d)
    sig = fields.sigma.reshape(ncell, d, d)
    h = fields.h.reshape(ncell, d)
    rows = []
    for c in range(ncell):
        rows.append(list(centers[c]) + [int(fields.count.flat[c]), float(fields.rho.flat[c])]
                    + list(u[c]) + [sig[c, a, b] for a, b in pairs] + list(h[c])
                    + [float(fields.eps.flat[c]), float(fields.E.flat[c])])
    return write_csv(path, header, rows, comments)
