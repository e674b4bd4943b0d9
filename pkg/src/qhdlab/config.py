"""INI experiment configs: parsing, validation and object construction.

Sections: ``grid``, ``physics``, ``potential``, ``nonlinearity``,
``initial_state``, ``run``, ``output`` and, for the kinetics engine,
``kinetics``.  Everything is validated and built before any output is
written, so a bad config fails with no side effects.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ValidationError
from .fields import MonadScale, WaveField, gaussian_wavefield, plane_wave
from .grid import LatticeGrid
from .observables import NonlinearTerm, PotentialSpec
from .schrodinger import EvolveConfig, default_dt

ENGINES = ("schrodinger", "madelung", "compare", "groundstate", "kinetics", "check")
FORMATS = ("csv", "qhd1", "plot", "mon1")


def builtin_configs() -> dict[str, Path]:
    root = resources.files("qhdlab") / "configs"
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir() if p.name.endswith(".ini")}


def resolve_config_path(name: str | Path) -> Path:
    """A path on disk, the same with ``.ini`` appended, or a bundled config by stem."""
    p = Path(name)
    for cand in (p, p.with_name(p.name + ".ini")):
        if cand.is_file():
            return cand
    bundled = builtin_configs()
    if p.stem in bundled:
        return bundled[p.stem]
    raise ValidationError(f"config {str(name)!r} not found (bundled: {', '.join(sorted(bundled))})")


def _floats(raw: str, what: str) -> list[float]:
    try:
        return [float(x) for x in raw.replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"{what}: expected numbers, got {raw!r}") from None


def _ints(raw: str, what: str) -> list[int]:
    vals = _floats(raw, what)
    if any(v != int(v) for v in vals):
        raise ValidationError(f"{what}: expected integers, got {raw!r}")
    return [int(v) for v in vals]


class _Section:
    """Typed access to one config section with a clear error for missing keys."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.data = parser[name] if parser.has_section(name) else {}

    def has(self, key: str) -> bool:
        return key in self.data

    def str(self, key: str, default: Any = ...) -> str:
        if key in self.data:
            return self.data[key].strip()
        if default is ...:
            raise ValidationError(f"[{self.name}] is missing required key {key!r}")
        return default

    def float(self, key: str, default: Any = ...) -> float:
        raw = self.str(key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"[{self.name}] {key}: not a number: {raw!r}") from None

    def int(self, key: str, default: Any = ...) -> int:
        v = self.float(key, default)
        if v is None or v != int(v):
            raise ValidationError(f"[{self.name}] {key}: not an integer: {v!r}")
        return int(v)

    def floats(self, key: str, n: int | None = None, default: Any = ...) -> list[float]:
        raw = self.str(key, default)
        if not isinstance(raw, str):
            return raw
        vals = _floats(raw, f"[{self.name}] {key}")
        if n is not None:
            if len(vals) == 1:
                vals = vals * n
            if len(vals) != n:
                raise ValidationError(f"[{self.name}] {key}: expected 1 or {n} values")
        return vals

    def bool(self, key: str, default: bool = False) -> bool:
        raw = self.str(key, None)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"[{self.name}] {key}: not a boolean: {raw!r}")


@dataclass
class OutputSpec:
    directory: Path
    formats: tuple[str, ...]
    prefix: str = ""


@dataclass
class ExperimentConfig:
    path: Path | None
    text: str
    engine: str
    seed: int
    output: OutputSpec
    grid: LatticeGrid | None = None
    hbar: float = 1.0
    mass: float = 1.0
    potential: PotentialSpec | None = None
    nonlinear: NonlinearTerm = field(default_factory=NonlinearTerm)
    initial: WaveField | None = None
    evolve: EvolveConfig | None = None
    run: dict[str, Any] = field(default_factory=dict)
    kinetics: dict[str, Any] = field(default_factory=dict)
    analytic_energy: float | None = None


def _base_dir(path: Path | None) -> Path:
    return path.parent if path is not None else Path.cwd()


def _load_array(path: Path) -> np.ndarray:
    if not path.is_file():
        raise ValidationError(f"referenced file {str(path)!r} does not exist")
    if path.suffix == ".npy":
        return np.load(path)
    from .snapshot import read_qhd1, sniff

    if sniff(path) == "QHD1":
        snap = read_qhd1(path)
        if snap.kind != "real":
            raise ValidationError(f"{path}: expected a real QHD1 field")
        return np.asarray(snap.data)
    raise ValidationError(f"{path}: unsupported sample file")


def _build_grid(p) -> LatticeGrid:
    g = _Section(p, "grid")
    n, d = g.int("n", 1), g.int("d", 1)
    rank = n * d
    points = [int(x) for x in g.floats("points", rank)]
    lengths = g.floats("lengths", rank)
    return LatticeGrid(n, d, tuple(points), tuple(lengths), allow_large=g.bool("allow_large"))


def _build_physics(p) -> tuple[float, float]:
    ph = _Section(p, "physics")
    if ph.has("N") or ph.has("mu") or ph.has("eta"):
        scale = MonadScale(ph.float("N"), ph.float("mu"), ph.float("eta"))
        return scale.hbar, scale.mass
    hbar, mass = ph.float("hbar", 1.0), ph.float("mass", 1.0)
    if not (hbar > 0 and mass > 0):
        raise ValidationError("[physics] hbar and mass must be positive")
    return hbar, mass


def _build_potential(p, grid: LatticeGrid, mass: float, base: Path) -> tuple[PotentialSpec, float | None]:
    s = _Section(p, "potential")
    kind = s.str("external", "none")
    analytic = None
    d = grid.dims_per_particle
    if kind == "none":
        external = None
    elif kind == "harmonic":
        omega = s.float("omega")
        if not omega > 0:
            raise ValidationError("[potential] omega must be positive")
        center = np.asarray(s.floats("center", d, [0.0] * d))

        def external(xs, _w=omega, _c=center):
            return 0.5 * mass * _w ** 2 * sum((x - _c[i]) ** 2 for i, x in enumerate(xs))
        analytic = omega
    elif kind == "custom-samples":
        external = _load_array(base / s.str("samples"))
    else:
        raise ValidationError(f"[potential] unknown external kind {kind!r}")
    pkind = s.str("pairwise", "none")
    if pkind == "none":
        pairwise = None
    elif pkind == "radial-samples":
        src = base / s.str("pairwise_samples")
        if not src.is_file():
            raise ValidationError(f"referenced file {str(src)!r} does not exist")
        table = np.loadtxt(src, ndmin=2)
        if table.shape[1] != 2 or np.any(np.diff(table[:, 0]) <= 0):
            raise ValidationError("[potential] pairwise samples need increasing r, V columns")
        r_tab, v_tab = table[:, 0].copy(), table[:, 1].copy()

        def pairwise(r, _r=r_tab, _v=v_tab):
            return np.interp(r, _r, _v)
    else:
        raise ValidationError(f"[potential] unknown pairwise kind {pkind!r}")
    return PotentialSpec(external, pairwise, s.float("scale", 1.0)), analytic


def _build_nonlinear(p) -> NonlinearTerm:
    s = _Section(p, "nonlinearity")
    kind = s.str("kind", "none")
    if kind == "none":
        return NonlinearTerm.none()
    if kind == "cubic":
        return NonlinearTerm.cubic(s.float("a"))
    if kind in ("log", "logarithmic"):
        return NonlinearTerm.logarithmic(s.float("b"))
    raise ValidationError(f"[nonlinearity] unknown kind {kind!r}")


def _build_initial(p, grid: LatticeGrid, hbar: float, mass: float, base: Path) -> WaveField:
    s = _Section(p, "initial_state")
    kind = s.str("kind", "gaussian")
    D = grid.rank
    if kind == "gaussian":
        return gaussian_wavefield(grid, s.floats("width", D), s.floats("center", D, [0.0] * D),
                                  s.floats("wavevector", D, [0.0] * D), hbar, mass,
                                  images=s.int("images", 0))
    if kind == "plane-wave":
        return plane_wave(grid, s.floats("k", D), hbar, mass)
    if kind == "file":
        from .snapshot import read_qhd1

        path = base / s.str("path")
        if not path.is_file():
            raise ValidationError(f"initial state file {str(path)!r} does not exist")
        snap = read_qhd1(path)
        if snap.dims != grid.points:
            raise ValidationError("initial state snapshot does not match the grid")
        if snap.kind == "complex":
            return WaveField.normalized(grid, snap.data, hbar, mass)
        if snap.kind == "pair":
            rho, S = snap.data
            return WaveField.normalized(grid, np.sqrt(rho) * np.exp(1j * S / hbar), hbar, mass)
        raise ValidationError("initial state snapshot must be complex or pair")
    raise ValidationError(f"[initial_state] unknown kind {kind!r}")


def _build_kinetics(p) -> dict[str, Any]:
    s = _Section(p, "kinetics")
    if not s.data:
        raise ValidationError("the kinetics engine needs a [kinetics] section")
    d = s.int("dim", 3)
    if d not in (1, 2, 3):
        raise ValidationError("[kinetics] dim must be 1, 2 or 3")
    box = s.floats("box", d, [1.0] * d)
    out = {
        "monads": s.int("monads"),
        "dim": d,
        "box": tuple(box),
        "mu": s.float("mu", 1.0),
        "temperature": s.float("temperature", 1.0),
        "drift": tuple(s.floats("drift", d, [0.0] * d)),
        "initial": s.str("initial", "maxwellian"),
        "amplitude": s.float("amplitude", 0.1),
        "mode": s.int("mode", 1),
        "temperatures": tuple(s.floats("temperatures", None, [1.0, 1.0])),
        "cell_size": s.float("cell_size"),
        "collision_rate": s.float("collision_rate"),
        "moment_cells": tuple(int(c) for c in s.floats("moment_cells", d, [8.0] * d)),
        "min_count": s.int("min_count", 20),
        "force": s.str("force", "none"),
        "stiffness": s.float("stiffness", 0.0),
        "center": tuple(s.floats("center", d, [b / 2 for b in box])),
        "g": tuple(s.floats("g", d, [0.0] * d)),
    }
    if out["monads"] < 2:
        raise ValidationError("[kinetics] monads must be >= 2")
    if out["initial"] not in ("maxwellian", "sound-wave", "two-temperature", "anisotropic"):
        raise ValidationError(f"[kinetics] unknown initial {out['initial']!r}")
    if out["force"] not in ("none", "harmonic", "uniform"):
        raise ValidationError(f"[kinetics] unknown force {out['force']!r}")
    if not (out["temperature"] > 0 and out["mu"] > 0 and min(box) > 0):
        raise ValidationError("[kinetics] temperature, mu and box must be positive")
    if out["cell_size"] <= 0 or out["collision_rate"] < 0:
        raise ValidationError("[kinetics] cell_size must be positive and collision_rate >= 0")
    return out


def parse_config(text: str, path: Path | None = None, *,
                 output_override: Path | None = None) -> ExperimentConfig:
    p = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    p.optionxform = str  # keep key case (N, mu, eta)
    try:
        p.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config parse error: {exc}") from None
    base = _base_dir(path)
    run = _Section(p, "run")
    engine = run.str("engine")
    if engine not in ENGINES:
        raise ValidationError(f"[run] engine must be one of {', '.join(ENGINES)}")
    seed = run.int("seed", 0)
    if seed < 0:
        raise ValidationError("[run] seed must be non-negative")
    out = _Section(p, "output")
    formats = tuple(f.strip() for f in out.str("formats", "csv, qhd1, plot").split(",") if f.strip())
    for f in formats:
        if f not in FORMATS:
            raise ValidationError(f"[output] unknown format {f!r}")
    directory = output_override or Path(out.str("directory", "qhd_output"))
    cfg = ExperimentConfig(path, text, engine, seed,
                           OutputSpec(Path(directory), formats, out.str("prefix", "")))
    if engine == "check":
        return cfg
    if engine == "kinetics":
        cfg.kinetics = _build_kinetics(p)
        dt = run.float("dt")
        steps = run.int("steps")
        record_every = run.int("record_every", 1)
        if not (np.isfinite(dt) and dt > 0):
            raise ValidationError(f"dt must be positive, got {dt}")
        if steps < 1 or record_every < 1:
            raise ValidationError("steps and record_every must be >= 1")
        cfg.run = {"dt": dt, "steps": steps, "record_every": record_every}
        return cfg

    cfg.grid = _build_grid(p)
    cfg.hbar, cfg.mass = _build_physics(p)
    cfg.potential, omega = _build_potential(p, cfg.grid, cfg.mass, base)
    if omega is not None and cfg.potential.pairwise is None:
        cfg.analytic_energy = 0.5 * cfg.hbar * omega * cfg.grid.rank
    cfg.nonlinear = _build_nonlinear(p)
    cfg.initial = _build_initial(p, cfg.grid, cfg.hbar, cfg.mass, base)
    raw_dt = run.str("dt", "auto")
    dt = default_dt(cfg.grid, cfg.hbar, cfg.mass) if raw_dt == "auto" else run.float("dt")
    if run.has("duration"):
        duration = run.float("duration")
        if not duration > 0:
            raise ValidationError("[run] duration must be positive")
        steps = max(int(np.ceil(duration / dt - 1e-9)), 1)
        dt = duration / steps
    else:
        steps = run.int("steps")
    cfg.evolve = EvolveConfig(dt=dt, steps=steps, record_every=run.int("record_every", 1),
                              imaginary_time=(engine == "groundstate"), nonlinear=cfg.nonlinear)
    cfg.run = {
        "tol": run.float("tol", 1e-12),
        "atol": run.float("atol", 1e-14),
        "dealias": run.bool("dealias", False),
        "filter": run.bool("filter", False),
    }
    return cfg


def load_config(name: str | Path, *, output_override: Path | None = None) -> ExperimentConfig:
    path = resolve_config_path(name)
    return parse_config(path.read_text(), path, output_override=output_override)
