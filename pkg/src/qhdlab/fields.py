"""Wave fields, Madelung pairs, and the transforms between them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CommensurabilityError, UnwrapAmbiguous, ValidationError
from .grid import LatticeGrid, spectral_gradient

RHO_FLOOR_REL = 1e-12
NORM_TOL = 1e-9


def rho_floor(rho: np.ndarray, rel: float = RHO_FLOOR_REL) -> float:
    return rel * float(np.max(rho))


def floor_mask(rho: np.ndarray, rel: float = RHO_FLOOR_REL) -> np.ndarray:
    """True where the density sits below the floor."""
    return rho < rho_floor(rho, rel)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MonadScale:
    """Bookkeeping between monad-level constants and quantum-level ones.

    ``N`` monads of mass ``mu`` and action constant ``eta`` make one quantum
    particle of mass ``m = N*mu`` with ``hbar = N*eta``.
    """

    N: float
    mu: float
    eta: float
    n_particles: int = 1

    def __post_init__(self):
        for name in ("N", "mu", "eta", "n_particles"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")

    @property
    def mass(self) -> float:
        return self.N * self.mu

    @property
    def hbar(self) -> float:
        return self.N * self.eta

    @property
    def total_mass(self) -> float:
        return self.n_particles * self.mass

    @property
    def total_monads(self) -> float:
        return self.n_particles * self.N

    @property
    def c_monad(self) -> float:
        """Stress coefficient at monad scale, ``-eta^2 / (4 mu)``."""
        return -self.eta ** 2 / (4.0 * self.mu)


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: LatticeGrid
    values: np.ndarray
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ValidationError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("wave field has non-finite values")
        if self.hbar <= 0 or self.mass <= 0:
            raise ValidationError("hbar and mass must be positive")
        norm = self.grid.integrate(np.abs(values) ** 2)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"wave field not normalized (norm = {norm!r})")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def normalized(cls, grid: LatticeGrid, values, hbar: float = 1.0,
                   mass: float = 1.0) -> "WaveField":
        values = np.asarray(values, dtype=complex)
        norm = grid.integrate(np.abs(values) ** 2)
        if not norm > 0 or not np.isfinite(norm):
            raise ValidationError("cannot normalize a zero or non-finite field")
        return cls(grid, values / np.sqrt(norm), hbar, mass)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return self.grid.integrate(self.density)

    def with_values(self, values) -> "WaveField":
        return WaveField.normalized(self.grid, values, self.hbar, self.mass)


@dataclass(frozen=True, eq=False)
class MadelungPair:
    grid: LatticeGrid
    rho: np.ndarray
    phase: np.ndarray
    flags: np.ndarray | None = None

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        phase = np.asarray(self.phase, dtype=float)
        if rho.shape != self.grid.shape or phase.shape != self.grid.shape:
            raise ValidationError("rho and phase must match the grid shape")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise ValidationError("density must be finite and non-negative")
        if not np.all(np.isfinite(phase)):
            raise ValidationError("phase must be finite")
        norm = self.grid.integrate(rho)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"density not normalized (integral = {norm!r})")
        flags = np.zeros(rho.shape, bool) if self.flags is None else np.asarray(self.flags, bool)
        object.__setattr__(self, "rho", _frozen(rho))
        object.__setattr__(self, "phase", _frozen(phase))
        object.__setattr__(self, "flags", _frozen(flags))

    @classmethod
    def normalized(cls, grid: LatticeGrid, rho, phase, flags=None) -> "MadelungPair":
        rho = np.asarray(rho, dtype=float)
        return cls(grid, rho / grid.integrate(rho), phase, flags)


def _unwrap_line_axis(theta: np.ndarray, low: np.ndarray, axis: int,
                      jump_limit: float) -> np.ndarray:
    """Unwrap every line along ``axis``; floored points copy their predecessor."""
    theta = np.moveaxis(theta, axis, 0).copy()
    low = np.moveaxis(low, axis, 0)
    # forward-fill floored points from the previous sample along the sweep
    for j in range(1, theta.shape[0]):
        theta[j] = np.where(low[j], theta[j - 1], theta[j])
    d = np.diff(theta, axis=0)
    d_wrapped = (d + np.pi) % (2 * np.pi) - np.pi
    both_good = ~low[1:] & ~low[:-1]
    bad = both_good & (np.abs(d_wrapped) > jump_limit)
    if np.any(bad):
        raise UnwrapAmbiguous(
            f"phase jump above {jump_limit:.3f} rad between resolved neighbours "
            f"along axis {axis} (node crossing?)"
        )
    out = np.empty_like(theta)
    out[0] = theta[0]
    out[1:] = theta[0] + np.cumsum(d_wrapped, axis=0)
    return np.moveaxis(out, 0, axis)


def _sweep_unwrap(theta: np.ndarray, low: np.ndarray, jump_limit: float) -> np.ndarray:
    """Sequential axis sweep: lines along axis 0, then their base slice recursively."""
    lines = _unwrap_line_axis(theta, low, 0, jump_limit)
    if theta.ndim == 1:
        return lines
    base = _sweep_unwrap(lines[0], low[0], jump_limit)
    return lines + (base - lines[0])[None, ...]


def to_madelung(psi: WaveField, unwrap_policy: str = "axis-sweep", *,
                rho_floor_rel: float = RHO_FLOOR_REL,
                jump_limit: float = 0.9 * np.pi) -> MadelungPair:
    """Split a wave field into density and action, ``rho = |psi|^2``, ``S = hbar*arg(psi)``.

    With ``unwrap_policy="axis-sweep"`` the phase is continued along each
    axis in turn.  Points whose density is below the floor inherit the
    phase of their predecessor and are flagged.  An ambiguous jump between
    two resolved neighbours raises :class:`UnwrapAmbiguous`.
    """
    if unwrap_policy not in ("axis-sweep", "none"):
        raise ValidationError(f"unknown unwrap policy {unwrap_policy!r}")
    rho = psi.density
    low = floor_mask(rho, rho_floor_rel)
    theta = np.angle(psi.values)
    if unwrap_policy == "axis-sweep":
        theta = _sweep_unwrap(theta, low, jump_limit)
    rho = rho / psi.grid.integrate(rho)
    return MadelungPair(psi.grid, rho, psi.hbar * theta, flags=low)


def to_wavefield(pair: MadelungPair, hbar: float = 1.0, mass: float = 1.0) -> WaveField:
    values = np.sqrt(pair.rho) * np.exp(1j * pair.phase / hbar)
    return WaveField.normalized(pair.grid, values, hbar, mass)


def phase_winding(phase: np.ndarray, grid: LatticeGrid, axis: int, hbar: float) -> np.ndarray:
    """Integer winding of ``exp(i S/hbar)`` along ``axis``, one value per line."""
    first = np.take(phase, 0, axis=axis)
    last = np.take(phase, -1, axis=axis)
    return np.rint((last - first) / (2 * np.pi * hbar))


def phase_gradient(phase: np.ndarray, grid: LatticeGrid, axis: int, hbar: float) -> np.ndarray:
    """Spectral derivative of an action field that may wind around the torus.

    A linear ramp carrying the per-line winding is removed before
    differentiating and its slope added back, so ``S = hbar*k*x`` gives
    exactly ``hbar*k``.
    """
    w = phase_winding(phase, grid, axis, hbar)
    if not np.any(w):
        return spectral_gradient(phase, grid, axis)
    L = grid.lengths[axis]
    slope = np.expand_dims(2 * np.pi * hbar * w / L, axis)
    x = grid.coord(axis) - grid.axis_coords(axis)[0]
    ramp = slope * x
    periodic = phase - ramp
    return spectral_gradient(periodic, grid, axis) + slope


def gaussian_wavefield(grid: LatticeGrid, width: float | Sequence[float],
                       center: float | Sequence[float] = 0.0,
                       wavevector: float | Sequence[float] = 0.0,
                       hbar: float = 1.0, mass: float = 1.0,
                       images: int = 0) -> WaveField:
    """Product Gaussian with density standard deviation ``width`` per axis.

    ``images > 0`` sums periodic copies so the amplitude is smooth across
    the seam of the torus.
    """
    D = grid.rank
    s = np.broadcast_to(np.asarray(width, float), (D,))
    c = np.broadcast_to(np.asarray(center, float), (D,))
    k = np.broadcast_to(np.asarray(wavevector, float), (D,))
    values = np.ones(grid.shape, complex)
    for a in range(D):
        x = grid.axis_coords(a)
        L = grid.lengths[a]
        line = np.zeros_like(x, dtype=complex)
        for img in range(-images, images + 1):
            xs = x - c[a] + img * L
            line += np.exp(-xs ** 2 / (4 * s[a] ** 2) + 1j * k[a] * xs)
        shape = [1] * D
        shape[a] = x.size
        values = values * line.reshape(shape)
    return WaveField.normalized(grid, values, hbar, mass)


def plane_wave(grid: LatticeGrid, wavevector: float | Sequence[float],
               hbar: float = 1.0, mass: float = 1.0) -> WaveField:
    """``exp(i k.x)/sqrt(V)``; raises unless every component is a grid mode."""
    k = np.broadcast_to(np.asarray(wavevector, float), (grid.rank,))
    phase = np.zeros(grid.shape)
    for a in range(grid.rank):
        m = k[a] * grid.lengths[a] / (2 * np.pi)
        if abs(m - round(m)) > 1e-9:
            raise CommensurabilityError(
                f"k = {k[a]} along axis {a} is not a multiple of 2*pi/L")
        if abs(round(m)) >= grid.points[a] // 2:
            raise CommensurabilityError(f"k = {k[a]} along axis {a} is at or beyond Nyquist")
        phase = phase + k[a] * grid.coord(a)
    return WaveField.normalized(grid, np.exp(1j * phase), hbar, mass)
