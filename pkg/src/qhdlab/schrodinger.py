"""Split-step Fourier propagation of the n-particle Schrödinger equation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NoConvergence, NonFinite, ValidationError
from .fields import WaveField
from .grid import LatticeGrid, _fft, _ifft, spectral_gradients
from .observables import (
    ConstitutiveParams, DiagnosticsRecord, NonlinearTerm, PotentialSpec, energy_report, hamiltonian,
)

log = logging.getLogger(__name__)


def default_dt(grid: LatticeGrid, hbar: float = 1.0, mass: float = 1.0) -> float:
    """0.1 * m * h^2 / (pi * hbar) with h the smallest grid spacing."""
    h = min(grid.spacing)
    return 0.1 * mass * h ** 2 / (np.pi * hbar)


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    steps: int
    scheme: str = "strang"
    record_every: int = 1
    imaginary_time: bool = False
    nonlinear: NonlinearTerm = field(default_factory=NonlinearTerm)

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")
        if self.scheme != "strang":
            raise ValidationError(f"unsupported scheme {self.scheme!r}")


class SplitStepPropagator:
    """Strang splitting: half potential, full kinetic, half potential.

    In imaginary time the phase factors become decays and the state is
    renormalized after every step.
    """

    def __init__(self, grid: LatticeGrid, V: np.ndarray, hbar: float, mass: float,
                 dt: float, nonlinear: NonlinearTerm | None = None,
                 imaginary_time: bool = False):
        self.grid = grid
        self.V = V
        self.hbar = hbar
        self.mass = mass
        self.dt = dt
        self.nonlinear = nonlinear or NonlinearTerm()
        self.imaginary_time = imaginary_time
        self.axes = tuple(range(grid.rank))
        # kinetic energy of every block enters the same exponent
        ekin = hbar * grid.k_squared / (2.0 * mass)
        if imaginary_time:
            self.kinetic = np.exp(-ekin * dt)
        else:
            self.kinetic = np.exp(-1j * ekin * dt)
        self._half_linear = self._phase(V, dt / 2)

    def _phase(self, potential: np.ndarray, tau: float) -> np.ndarray:
        if self.imaginary_time:
            return np.exp(-potential * tau / self.hbar)
        return np.exp(-1j * potential * tau / self.hbar)

    def _half_potential(self, values: np.ndarray) -> np.ndarray:
        if not self.nonlinear.active:
            return values * self._half_linear
        rho = np.abs(values) ** 2
        return values * self._phase(self.V + self.nonlinear.potential(rho), self.dt / 2)

    def step(self, values: np.ndarray) -> np.ndarray:
        values = self._half_potential(values)
        values = _ifft(self.kinetic * _fft(values, self.axes), self.axes)
        values = self._half_potential(values)
        if self.imaginary_time:
            values = values / np.sqrt(self.grid.integrate(np.abs(values) ** 2))
        return values


def _continuity_residual(grid, prev_rho, next_rho, mid: WaveField, interval: float) -> float:
    grads = spectral_gradients(mid.values, grid)
    current = [mid.hbar / mid.mass * np.imag(np.conj(mid.values) * g) for g in grads]
    div = sum(spectral_gradients(current[a], grid, [a])[0] for a in range(grid.rank))
    res = (next_rho - prev_rho) / (2 * interval) + div
    return float(np.sqrt(grid.integrate(res ** 2)))


def evolve(psi: WaveField, potential: PotentialSpec, cfg: EvolveConfig, *,
           diagnostics: bool = True, start_step: int = 0, start_time: float = 0.0,
           keep_series: bool = False) -> tuple:
    """Propagate ``psi`` for ``cfg.steps`` steps.

    Diagnostics are taken at step 0 and every ``record_every`` steps.  The
    continuity residual of a record uses the neighbouring records, so the
    first and last records carry NaN there.  Returns ``(final, records)``,
    plus the list of recorded states when ``keep_series`` is set.
    """
    grid = psi.grid
    V = potential.sample(grid)
    prop = SplitStepPropagator(grid, V, psi.hbar, psi.mass, cfg.dt, cfg.nonlinear,
                               cfg.imaginary_time)
    params = ConstitutiveParams.quantum(psi.hbar, psi.mass, cfg.nonlinear)
    values = np.array(psi.values)
    records: list[DiagnosticsRecord] = []
    snaps: list[WaveField] = []
    series: list[WaveField] = []
    interval = cfg.dt * cfg.record_every

    def record(n: int, state: WaveField):
        if keep_series:
            series.append(state)
        if not diagnostics:
            return
        rec = energy_report(state, V, params, step=start_step + n,
                            time=start_time + n * cfg.dt)
        records.append(rec)
        snaps.append(state)
        if len(snaps) == 3:
            records[-2].res_continuity = _continuity_residual(
                grid, snaps[0].density, snaps[2].density, snaps[1], interval)
            snaps.pop(0)

    record(0, psi)
    for n in range(1, cfg.steps + 1):
        values = prop.step(values)
        if not np.isfinite(np.vdot(values, values).real):
            raise NonFinite(f"state became non-finite at step {start_step + n}")
        if n % cfg.record_every == 0:
            record(n, WaveField(grid, values, psi.hbar, psi.mass))
    final = WaveField(grid, values, psi.hbar, psi.mass)
    if keep_series:
        return final, records, series
    return final, records


def ground_state(potential: PotentialSpec, cfg: EvolveConfig, init: WaveField, *,
                 tol_E: float = 1e-10, atol_E: float = 1e-14, min_steps: int = 2,
                 history: list | None = None,
                 on_step: Callable[[int, WaveField, float], None] | None = None,
                 ) -> tuple[WaveField, float]:
    """Imaginary-time relaxation until successive energies agree to ``tol_E``.

    ``cfg.steps`` is the step limit.  The energy is the wave-function
    Hamiltonian (plus the nonlinear interaction energy when ``U`` is set).
    ``history``, when given, receives every energy evaluated; ``on_step``
    is called as ``on_step(n, state, E)`` after every step.
    """
    if not cfg.imaginary_time:
        raise ValidationError("ground_state needs cfg.imaginary_time=True")
    grid = init.grid
    V = potential.sample(grid)
    prop = SplitStepPropagator(grid, V, init.hbar, init.mass, cfg.dt, cfg.nonlinear,
                               imaginary_time=True)
    values = np.array(init.values)
    E_prev = hamiltonian(init, V, cfg.nonlinear)
    if history is not None:
        history.append(E_prev)
    for n in range(1, cfg.steps + 1):
        values = prop.step(values)
        if not np.all(np.isfinite(values)):
            raise NonFinite(f"state became non-finite at imaginary step {n}")
        state = WaveField(grid, values, init.hbar, init.mass)
        E = hamiltonian(state, V, cfg.nonlinear)
        if history is not None:
            history.append(E)
        if on_step is not None:
            on_step(n, state, E)
        if n >= min_steps and abs(E - E_prev) <= max(tol_E * abs(E), atol_E):
            log.debug("ground state converged after %d steps, E = %r", n, E)
            return state, E
        E_prev = E
    raise NoConvergence(f"no convergence after {cfg.steps} imaginary-time steps "
                        f"(last dE = {abs(E - E_prev):.3e})")
