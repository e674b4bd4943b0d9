"""Direct evolution of the density/action pair (continuity + quantum Hamilton-Jacobi)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NodeFormation, NonFinite, SeriesTooShort, ValidationError
from .fields import RHO_FLOOR_REL, MadelungPair, phase_gradient, phase_winding, rho_floor
from .grid import (
    LatticeGrid, RealSpectral, exponential_filter, fourier_filter, spectral_gradient,
    two_thirds_mask,
)
from .observables import (
    ConstitutiveParams, DiagnosticsRecord, PotentialSpec, energy_report, quantum_potential,
)
from .schrodinger import EvolveConfig


class MadelungRHS:
    """Right-hand sides ``d rho/dt = -div(rho grad S / m)`` and
    ``dS/dt = -|grad S|^2/2m - W - U - V``."""

    def __init__(self, grid: LatticeGrid, V: np.ndarray, params: ConstitutiveParams,
                 hbar: float, mass: float, dealias: bool = False):
        self.grid = grid
        self.V = V
        self.params = params
        self.hbar = hbar
        self.mass = mass
        self.ops = RealSpectral(grid)
        self.mask = two_thirds_mask(grid) if dealias else None
        self.floor_rel = RHO_FLOOR_REL

    def _truncate(self, f: np.ndarray) -> np.ndarray:
        return f if self.mask is None else fourier_filter(f, self.grid, self.mask)

    def grad_phase(self, S: np.ndarray) -> list[np.ndarray]:
        grid = self.grid
        slopes = []
        for a in range(grid.rank):
            w = phase_winding(S, grid, a, self.hbar)
            if np.any(w != w.flat[0]):
                # winding differs between lines: differentiate axis by axis
                return [phase_gradient(S, grid, b, self.hbar) for b in range(grid.rank)]
            slopes.append(2 * np.pi * self.hbar * float(w.flat[0]) / grid.lengths[a])
        if not any(slopes):
            return self.ops.gradient(S)
        periodic = S - sum(sl * (grid.coord(a) - grid.axis_coords(a)[0])
                           for a, sl in enumerate(slopes))
        return [g + sl for g, sl in zip(self.ops.gradient(periodic), slopes)]

    def quantum_potential(self, rho: np.ndarray) -> np.ndarray:
        amp = np.sqrt(rho)
        return -(self.hbar ** 2 / (2.0 * self.mass)) * self.ops.laplacian(amp) / amp

    def __call__(self, rho: np.ndarray, S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.mass
        if not np.min(rho) > 0:
            raise NodeFormation("density reached zero inside a Runge-Kutta stage")
        gradS = self.grad_phase(S)
        flux = [self._truncate(rho * g / m) for g in gradS]
        drho = -self.ops.divergence(flux)
        kinetic = self._truncate(sum(g * g for g in gradS) / (2.0 * m))
        W = self.quantum_potential(rho)
        dS = -kinetic - W - self.V
        if self.params.nonlinear.active:
            dS -= self.params.nonlinear.potential(rho)
        return drho, dS


def _check_state(rho, S, floor_abs, step):
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(S))):
        raise NonFinite(f"Madelung state became non-finite at step {step}")
    if np.min(rho) < floor_abs:
        raise NodeFormation(f"density dropped below the floor at step {step} "
                            f"(min rho = {np.min(rho):.3e})", step=step)


def _hydro_residual(grid, prev: MadelungPair, mid: MadelungPair, nxt: MadelungPair,
                    interval: float, mass: float, hbar: float, V: np.ndarray,
                    params: ConstitutiveParams) -> tuple[float, float]:
    """Centered-difference continuity and Hamilton-Jacobi residuals at ``mid``."""
    rho = np.asarray(mid.rho)
    gradS = [phase_gradient(mid.phase, grid, a, hbar) for a in range(grid.rank)]
    div = sum(spectral_gradient(rho * gradS[a] / mass, grid, a) for a in range(grid.rank))
    cont = (nxt.rho - prev.rho) / (2 * interval) + div
    dS = np.asarray(nxt.phase) - np.asarray(prev.phase)
    # global-phase rotations between snapshots show up as 2*pi*hbar jumps
    dS = dS - 2 * np.pi * hbar * np.rint(dS / (2 * np.pi * hbar))
    hj = (dS / (2 * interval) + sum(g ** 2 for g in gradS) / (2 * mass)
          + quantum_potential(rho, grid, hbar, mass) + params.nonlinear.potential(rho) + V)
    good = ~(np.asarray(mid.flags) | np.asarray(prev.flags) | np.asarray(nxt.flags))
    good &= rho >= rho_floor(rho)
    l2 = lambda r: float(np.sqrt(np.sum(r[good] ** 2) * grid.cell_volume))
    return l2(cont), l2(hj)


def evolve_madelung(pair: MadelungPair, potential: PotentialSpec, params: ConstitutiveParams,
                    cfg: EvolveConfig, *, hbar: float = 1.0, mass: float = 1.0,
                    dealias: bool = False, spectral_filter: bool = False,
                    keep_series: bool = False, diagnostics: bool = True,
                    ) -> tuple[MadelungPair, list[DiagnosticsRecord]] | tuple:
    """Method-of-lines integration with classical RK4.

    The density is never renormalized; its integral drift shows up in the
    ``norm`` column.  If ``min(rho)`` falls below the floor the run aborts
    with :class:`NodeFormation` carrying the last good state and records.
    With ``keep_series`` a third element, the list of recorded pairs, is
    returned.
    """
    if cfg.imaginary_time:
        raise ValidationError("the Madelung engine only runs in real time")
    grid = pair.grid
    V = potential.sample(grid)
    rhs = MadelungRHS(grid, V, params, hbar, mass, dealias)
    filt = exponential_filter(grid) if spectral_filter else None
    floor_abs = rho_floor(pair.rho)
    rho = np.array(pair.rho)
    S = np.array(pair.phase)
    dt = cfg.dt
    interval = dt * cfg.record_every
    records: list[DiagnosticsRecord] = []
    series: list[MadelungPair] = []
    window: list[MadelungPair] = []

    def snapshot(rho_, S_):
        # norm drift is reported, not corrected, so bypass the normalization check
        p = object.__new__(MadelungPair)
        object.__setattr__(p, "grid", grid)
        object.__setattr__(p, "rho", rho_.copy())
        object.__setattr__(p, "phase", S_.copy())
        object.__setattr__(p, "flags", np.zeros(grid.shape, bool))
        return p

    def record(n, rho_, S_):
        snap = snapshot(rho_, S_)
        if keep_series:
            series.append(snap)
        if not diagnostics:
            return
        rec = energy_report(snap, V, params, hbar=hbar, mass=mass, step=n, time=n * dt)
        records.append(rec)
        window.append(snap)
        if len(window) == 3:
            records[-2].res_continuity = _hydro_residual(
                grid, window[0], window[1], window[2], interval, mass, hbar, V, params)[0]
            window.pop(0)

    _check_state(rho, S, floor_abs, 0)
    record(0, rho, S)
    for n in range(1, cfg.steps + 1):
        try:
            k1r, k1s = rhs(rho, S)
            k2r, k2s = rhs(rho + 0.5 * dt * k1r, S + 0.5 * dt * k1s)
            k3r, k3s = rhs(rho + 0.5 * dt * k2r, S + 0.5 * dt * k2s)
            k4r, k4s = rhs(rho + dt * k3r, S + dt * k3s)
            new_rho = rho + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
            new_S = S + dt / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s)
            if filt is not None:
                # filter the increments so small tails are not pushed negative
                new_rho = rho + fourier_filter(new_rho - rho, grid, filt)
                new_S = S + fourier_filter(new_S - S, grid, filt)
            _check_state(new_rho, new_S, floor_abs, n)
        except NodeFormation as exc:
            exc.state = snapshot(rho, S)
            exc.records = records
            if exc.step is None:
                exc.step = n
            raise
        rho, S = new_rho, new_S
        if n % cfg.record_every == 0:
            record(n, rho, S)
    final = snapshot(rho, S)
    if keep_series:
        return final, records, series
    return final, records


@dataclass
class HydroResiduals:
    continuity: np.ndarray
    hamilton_jacobi: np.ndarray
    times: np.ndarray


def hydrodynamic_residuals(series: Sequence[MadelungPair], interval: float, mass: float,
                           hbar: float = 1.0, potential: PotentialSpec | None = None,
                           params: ConstitutiveParams | None = None) -> HydroResiduals:
    """Continuity and Hamilton-Jacobi residuals of a recorded series.

    Centered differences in time with spacing ``interval``; L2 norms over
    points above the floor, one entry per interior snapshot.
    """
    if len(series) < 3:
        raise SeriesTooShort(f"need at least 3 snapshots, got {len(series)}")
    grid = series[0].grid
    V = (potential or PotentialSpec()).sample(grid)
    params = params or ConstitutiveParams.quantum(hbar, mass)
    cont, hj = [], []
    for i in range(1, len(series) - 1):
        c, h = _hydro_residual(grid, series[i - 1], series[i], series[i + 1], interval,
                               mass, hbar, V, params)
        cont.append(c)
        hj.append(h)
    times = interval * np.arange(1, len(series) - 1)
    return HydroResiduals(np.array(cont), np.array(hj), times)
