"""Cell-wise velocity moments and residuals of the moment (hydrodynamic) equations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import SeriesTooShort, ValidationError
from . import _backend
from .ensemble import ForceField, MonadEnsemble, sort_by_cell

MIN_COUNT = 20


@dataclass
class MomentFields:
    """Per-cell hydrodynamic fields on a regular grid of ``cells``.

    Arrays have shape ``cells``, ``cells + (d,)`` or ``cells + (d, d)``.
    Cells with fewer than ``min_count`` monads are masked and hold NaN.
    ``rho`` is a number density; ``sigma`` and ``h`` carry the monad mass.
    """

    cells: tuple[int, ...]
    box: tuple[float, ...]
    mu: float
    count: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    h: np.ndarray
    eps: np.ndarray
    E: np.ndarray
    s: np.ndarray
    V: np.ndarray
    F: np.ndarray
    mask: np.ndarray

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / c for L, c in zip(self.box, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def centers(self) -> np.ndarray:
        return cell_centers(self.box, self.cells)

    # conserved densities and their fluxes, used by the residuals
    def momentum_density(self) -> np.ndarray:
        return self.rho[..., None] * self.u

    def momentum_flux(self) -> np.ndarray:
        r = self.rho[..., None, None]
        return r * (self.u[..., :, None] * self.u[..., None, :] + self.sigma / self.mu)

    def energy_density(self) -> np.ndarray:
        return self.rho * self.E

    def energy_flux(self) -> np.ndarray:
        return self.rho[..., None] * self.s


def cell_centers(box, cells) -> np.ndarray:
    spacing = [L / c for L, c in zip(box, cells)]
    axes = [(np.arange(c) + 0.5) * h for c, h in zip(cells, spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def project_moments(ens: MonadEnsemble, cells: Sequence[int], *, force: ForceField | None = None,
                    min_count: int = MIN_COUNT, weight: float = 1.0,
                    backend: str | None = None) -> MomentFields:
    """Empirical cell means of 1, v, (v-u)(v-u) and |v-u|^2 (v-u).

    ``weight`` multiplies the number density; sub-ensembles use it to stand
    in for the full population (two halves each get weight 2).
    """
    cells = tuple(int(c) for c in cells)
    if len(cells) != ens.dim or min(cells) < 1:
        raise ValidationError(f"need {ens.dim} positive cell counts, got {cells}")
    force = force or ForceField.none()
    order, starts = sort_by_cell(ens.positions, ens.box, cells, backend=backend)
    core = _backend.get(backend)
    count, mean, m2, m3 = core.deposit_moments(ens.velocities, order, starts, _backend.threads())
    d = ens.dim
    mu = ens.mu
    shape = cells
    mask = (count >= max(min_count, 1)).reshape(shape)
    vol = float(np.prod([L / c for L, c in zip(ens.box, cells)]))
    rho = weight * count.reshape(shape) / vol
    u = mean.reshape(shape + (d,))
    sigma = mu * m2.reshape(shape + (d, d))
    h = 0.5 * mu * m3.reshape(shape + (d,))
    centers = cell_centers(ens.box, cells)
    V = np.asarray(force.potential(centers), float).reshape(shape)
    F = np.asarray(force.force(centers), float).reshape(shape + (d,))
    eps = 0.5 * np.trace(sigma, axis1=-2, axis2=-1)
    E = 0.5 * mu * np.sum(u * u, axis=-1) + eps + V
    s = E[..., None] * u + np.einsum("...ij,...j->...i", sigma, u) + h
    masked = ~mask
    for arr in (u, sigma, h, eps, E, s):
        arr[masked] = np.nan
    return MomentFields(shape, ens.box, mu, count.reshape(shape), rho, u, sigma, h, eps, E, s,
                        V, F, mask)


@dataclass
class MomentSnapshot:
    """Moments of the full ensemble and of its even/odd halves at one time."""

    time: float
    full: MomentFields
    halves: tuple[MomentFields, MomentFields]
    n_monads: int
    v_rms: float
    v_max_potential: float


def record_moments(ens: MonadEnsemble, cells: Sequence[int], time: float = 0.0, *,
                   force: ForceField | None = None, min_count: int = MIN_COUNT,
                   backend: str | None = None) -> MomentSnapshot:
    force = force or ForceField.none()
    full = project_moments(ens, cells, force=force, min_count=min_count, backend=backend)
    half_min = max(min_count // 2, 1)
    halves = tuple(project_moments(ens.subset(slice(k, None, 2)), cells, force=force,
                                   min_count=half_min, weight=2.0, backend=backend)
                   for k in (0, 1))
    v_rms = float(np.sqrt(np.mean(np.sum(ens.velocities ** 2, axis=1))))
    vmax = float(np.max(np.abs(full.V)))
    return MomentSnapshot(time, full, halves, ens.n, v_rms, vmax)


def _ddx(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Periodic centered difference along a cell axis."""
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)


def _residual_fields(prev: MomentFields, mid: MomentFields, nxt: MomentFields,
                     interval: float) -> dict[str, np.ndarray]:
    d = len(mid.cells)
    hs = mid.spacing
    two = 2 * interval
    cont = (nxt.rho - prev.rho) / two
    mom = (nxt.momentum_density() - prev.momentum_density()) / two
    ene = (nxt.energy_density() - prev.energy_density()) / two
    j = mid.momentum_density()
    P = mid.momentum_flux()
    Q = mid.energy_flux()
    for a in range(d):
        cont = cont + _ddx(j[..., a], a, hs[a])
        mom = mom + _ddx(P[..., :, a], a, hs[a])
        ene = ene + _ddx(Q[..., a], a, hs[a])
    mom = mom - mid.rho[..., None] * mid.F / mid.mu
    return {"continuity": cont, "momentum": mom, "energy": ene}


@dataclass
class EquationResidual:
    residual: float  # RMS residual / reference scale
    noise_floor: float  # RMS of half-ensemble difference / reference scale
    term_scale: float  # RMS of the time-derivative term / reference scale
    reference: float

    @property
    def ratio(self) -> float:
        return self.residual / self.noise_floor if self.noise_floor > 0 else np.inf


@dataclass
class MomentResidualReport:
    equations: dict[str, EquationResidual] = field(default_factory=dict)
    n_monads: int = 0
    valid_fraction: float = 0.0

    def worst_ratio(self) -> float:
        return max(e.ratio for e in self.equations.values())

    def lines(self) -> list[str]:
        return [f"{name:<11s} residual {e.residual:.3e}  floor {e.noise_floor:.3e}  "
                f"ratio {e.ratio:.2f}" for name, e in self.equations.items()]


def moment_residuals(series: Sequence[MomentSnapshot], interval: float) -> MomentResidualReport:
    """Centered-difference residuals of the continuity, momentum and energy equations.

    Each equation is reported as an RMS over valid cells and interior times,
    divided by a deterministic scale built from the mean number density, the
    RMS speed and the cell size.  The noise floor is the RMS of half the
    difference between the residuals of the even and odd half-ensembles, so
    ``ratio`` near 1 means the residual is pure sampling noise.
    """
    if len(series) < 3:
        raise SeriesTooShort(f"need at least 3 moment snapshots, got {len(series)}")
    if not interval > 0:
        raise ValidationError("interval must be positive")
    first = series[0]
    mu = first.full.mu
    rho_bar = first.n_monads / float(np.prod(first.full.box))
    v = first.v_rms
    hmin = min(first.full.spacing)
    refs = {
        "continuity": rho_bar * v / hmin,
        "momentum": rho_bar * v * v / hmin,
        "energy": rho_bar * v * (mu * v * v + first.v_max_potential) / hmin,
    }
    acc = {k: [[], [], []] for k in refs}
    valid_total = 0
    cells_total = 0
    for i in range(1, len(series) - 1):
        p, m, n = series[i - 1], series[i], series[i + 1]
        full = _residual_fields(p.full, m.full, n.full, interval)
        ha = _residual_fields(p.halves[0], m.halves[0], n.halves[0], interval)
        hb = _residual_fields(p.halves[1], m.halves[1], n.halves[1], interval)
        dt_terms = {
            "continuity": (n.full.rho - p.full.rho) / (2 * interval),
            "momentum": (n.full.momentum_density() - p.full.momentum_density()) / (2 * interval),
            "energy": (n.full.energy_density() - p.full.energy_density()) / (2 * interval),
        }
        for name in refs:
            r, a, b = full[name], ha[name], hb[name]
            axes = tuple(range(len(m.full.cells), r.ndim))
            ok = np.isfinite(r) & np.isfinite(a) & np.isfinite(b)
            ok = ok.all(axis=axes) if axes else ok
            ok &= m.full.mask & p.full.mask & n.full.mask
            cells_total += ok.size
            valid_total += int(ok.sum())
            acc[name][0].append(r[ok].ravel())
            acc[name][1].append(((a - b) / 2)[ok].ravel())
            acc[name][2].append(dt_terms[name][ok].ravel())
    report = MomentResidualReport(n_monads=first.n_monads,
                                  valid_fraction=valid_total / max(cells_total, 1))
    for name, ref in refs.items():
        rms = [float(np.sqrt(np.mean(np.concatenate(x) ** 2))) if sum(len(y) for y in x) else np.nan
               for x in acc[name]]
        report.equations[name] = EquationResidual(rms[0] / ref, rms[1] / ref, rms[2] / ref, ref)
    return report
