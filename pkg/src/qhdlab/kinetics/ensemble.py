"""Classical ensemble of monads in a periodic box, with external forces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ValidationError
from . import _backend


def wrap(positions: np.ndarray, box: np.ndarray) -> np.ndarray:
    """Map positions into ``[0, L)`` along every axis."""
    x = positions - box * np.floor(positions / box)
    # x/L just below an integer can round back up to L
    return np.where(x >= box, x - box, x)


@dataclass
class MonadEnsemble:
    positions: np.ndarray
    velocities: np.ndarray
    mu: float
    box: tuple[float, ...]
    rng_seed: int
    step: int = 0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape != self.velocities.shape:
            raise ValidationError("positions and velocities must both be (N, d) arrays")
        n, d = self.positions.shape
        if n < 2:
            raise ValidationError("an ensemble needs at least 2 monads")
        if d not in (1, 2, 3):
            raise ValidationError(f"monad space dimension must be 1, 2 or 3, got {d}")
        self.box = tuple(float(b) for b in self.box)
        if len(self.box) != d or min(self.box) <= 0:
            raise ValidationError(f"box must have {d} positive lengths")
        if not self.mu > 0:
            raise ValidationError("monad mass must be positive")
        if int(self.rng_seed) < 0:
            raise ValidationError("rng_seed must be non-negative")
        self.rng_seed = int(self.rng_seed)
        if not np.all(np.isfinite(self.velocities)):
            raise ValidationError("velocities must be finite")
        L = np.asarray(self.box)
        if not (np.all(self.positions >= 0) and np.all(self.positions < L)):
            raise ValidationError("positions must lie inside the box [0, L)")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "MonadEnsemble":
        return MonadEnsemble(self.positions.copy(), self.velocities.copy(), self.mu,
                             self.box, self.rng_seed, self.step)

    def subset(self, index) -> "MonadEnsemble":
        return MonadEnsemble(self.positions[index], self.velocities[index], self.mu,
                             self.box, self.rng_seed, self.step)

    def total_momentum(self) -> np.ndarray:
        return self.mu * np.sum(self.velocities, axis=0)

    def kinetic_energy(self) -> float:
        return 0.5 * self.mu * float(np.sum(self.velocities ** 2))

    def momentum_scale(self) -> float:
        """Sum of |mu v|, the natural unit for relative momentum errors."""
        return self.mu * float(np.sum(np.sqrt(np.sum(self.velocities ** 2, axis=1))))


@dataclass(frozen=True)
class ForceField:
    """External one-body potential energy V(x) and force F = -grad V.

    Both callables take an ``(N, d)`` array; ``potential`` returns ``(N,)``
    and ``force`` returns ``(N, d)``.
    """

    potential: Callable[[np.ndarray], np.ndarray]
    force: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"

    @property
    def active(self) -> bool:
        return self.kind != "none"

    @classmethod
    def none(cls) -> "ForceField":
        return cls(lambda x: np.zeros(x.shape[0]), np.zeros_like, "none")

    @classmethod
    def harmonic(cls, stiffness: float, center: Sequence[float] | float) -> "ForceField":
        c = np.asarray(center, float)
        return cls(lambda x: 0.5 * stiffness * np.sum((x - c) ** 2, axis=1),
                   lambda x: -stiffness * (x - c), "harmonic")

    @classmethod
    def uniform(cls, g: Sequence[float]) -> "ForceField":
        """Constant force ``g`` (a vector); potential ``-g.x``."""
        g = np.asarray(g, float)
        return cls(lambda x: -(x @ g), lambda x: np.broadcast_to(g, x.shape).copy(), "uniform")

    @classmethod
    def from_callable(cls, potential: Callable[[np.ndarray], np.ndarray],
                      step: float = 1e-4) -> "ForceField":
        """Force by fourth-order central differences of ``potential``."""
        def force(x):
            out = np.empty_like(x)
            for a in range(x.shape[1]):
                e = np.zeros(x.shape[1])
                e[a] = step
                out[:, a] = -(8 * (potential(x + e) - potential(x - e))
                              - (potential(x + 2 * e) - potential(x - 2 * e))) / (12 * step)
            return out
        return cls(potential, force, "custom")


def stream_and_force(ens: MonadEnsemble, force: ForceField, dt: float,
                     mu: float | None = None, *, backend: str | None = None) -> MonadEnsemble:
    """One velocity-Verlet step, in place, followed by the periodic wrap.

    Positions are integrated unwrapped within the step so the force is
    evaluated where the monad actually is; wrapping comes last.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    mu = ens.mu if mu is None else mu
    x, v = ens.positions, ens.velocities
    L = np.asarray(ens.box)
    if force.active:
        a0 = force.force(x) / mu
        x_new = x + v * dt + (0.5 * dt * dt) * a0
        a1 = force.force(x_new) / mu
        v += (0.5 * dt) * (a0 + a1)
    else:
        x_new = x + v * dt
    ens.positions = _backend.get(backend).wrap_inplace(np.ascontiguousarray(x_new), L)
    ens.step += 1
    return ens


def cell_layout(box: Sequence[float], cell_size: float | Sequence[float]) -> tuple[int, ...]:
    """Cells per axis: the largest count whose cells are at least ``cell_size`` wide."""
    sizes = np.broadcast_to(np.asarray(cell_size, float), (len(box),))
    if np.any(sizes <= 0):
        raise ValidationError("cell_size must be positive")
    return tuple(max(int(np.floor(L / s + 1e-12)), 1) for L, s in zip(box, sizes))


def cell_index(positions: np.ndarray, box: Sequence[float], cells: Sequence[int]) -> np.ndarray:
    """Flat row-major cell index of each monad."""
    cells = np.asarray(cells, np.int64)
    idx = np.floor(positions / np.asarray(box) * cells).astype(np.int64)
    idx = np.clip(idx, 0, cells - 1)
    flat = np.zeros(positions.shape[0], np.int64)
    for a in range(positions.shape[1]):
        flat = flat * cells[a] + idx[:, a]
    return flat


def sort_by_cell(positions: np.ndarray, box, cells, *,
                 backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Stable ordering of monads by cell and the CSR ``starts`` offsets."""
    return _backend.get(backend).bin_cells(np.ascontiguousarray(positions, np.float64),
                                           np.asarray(box, float), np.asarray(cells, np.int64))


# --- initial states ------------------------------------------------------

def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def maxwellian(n: int, box: Sequence[float], temperature: float, mu: float = 1.0,
               drift: Sequence[float] | float = 0.0, seed: int = 0) -> MonadEnsemble:
    """Uniform positions, Maxwell-Boltzmann velocities: variance T/mu per component."""
    box = tuple(float(b) for b in box)
    d = len(box)
    rng = _generator(seed)
    x = rng.random((n, d)) * np.asarray(box)
    v = rng.normal(0.0, np.sqrt(temperature / mu), (n, d)) + np.asarray(drift, float)
    return MonadEnsemble(wrap(x, np.asarray(box)), v, mu, box, seed)


def two_temperature(n: int, box, temperatures: tuple[float, float], fraction: float = 0.5,
                    mu: float = 1.0, seed: int = 0) -> MonadEnsemble:
    """Mixture: a ``fraction`` of monads at T1, the rest at T2, no drift."""
    ens = maxwellian(n, box, 1.0, mu, 0.0, seed)
    rng = _generator(seed + 1)
    hot = rng.random(n) >= fraction
    scale = np.where(hot, np.sqrt(temperatures[1]), np.sqrt(temperatures[0]))
    ens.velocities = np.ascontiguousarray(ens.velocities * scale[:, None])
    return ens


def anisotropic(n: int, box, temperatures: Sequence[float], mu: float = 1.0,
                seed: int = 0) -> MonadEnsemble:
    """Maxwellian with a different temperature per velocity component."""
    ens = maxwellian(n, box, 1.0, mu, 0.0, seed)
    ens.velocities = np.ascontiguousarray(ens.velocities * np.sqrt(np.asarray(temperatures, float)))
    return ens


def sound_wave(n: int, box, temperature: float, amplitude: float, mode: int = 1,
               mu: float = 1.0, gamma: float | None = None, seed: int = 0) -> MonadEnsemble:
    """Small travelling density wave along the first axis.

    Density ``1 + A sin(k x)`` sampled by rejection, bulk velocity
    ``A c sin(k x)`` with ``c = sqrt(gamma T / mu)`` so the wave runs to +x.
    ``gamma`` defaults to ``(d + 2) / d``.
    """
    box = tuple(float(b) for b in box)
    d = len(box)
    if not 0 <= amplitude < 1:
        raise ValidationError("amplitude must be in [0, 1)")
    gamma = (d + 2.0) / d if gamma is None else gamma
    k = 2 * np.pi * mode / box[0]
    rng = _generator(seed)
    xs = []
    have = 0
    while have < n:
        batch = rng.random((2 * (n - have) + 16, d)) * np.asarray(box)
        accept = rng.random(batch.shape[0]) * (1 + amplitude) < 1 + amplitude * np.sin(k * batch[:, 0])
        batch = batch[accept][: n - have]
        xs.append(batch)
        have += batch.shape[0]
    x = np.concatenate(xs)
    v = rng.normal(0.0, np.sqrt(temperature / mu), (n, d))
    c = np.sqrt(gamma * temperature / mu)
    v[:, 0] += amplitude * c * np.sin(k * x[:, 0])
    return MonadEnsemble(wrap(x, np.asarray(box)), v, mu, box, seed)
