"""Periodic configuration-space grids and Fourier-collocation derivatives.

The configuration space of ``n`` particles in ``d`` dimensions is the torus
of rank ``D = n*d``.  Axis ``a`` belongs to particle ``a // d``; each
particle owns the contiguous block of ``d`` axes.  Fields are plain numpy
arrays whose shape equals ``grid.shape``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import GridError

MAX_RANK = 4


def fft_workers() -> int:
    """Thread count for FFTs, from ``QHD_THREADS`` (0 or unset means all cores)."""
    raw = os.environ.get("QHD_THREADS", "0").strip() or "0"
    n = int(raw)
    return -1 if n <= 0 else n


@dataclass(frozen=True)
class LatticeGrid:
    n_particles: int
    dims_per_particle: int
    points: tuple[int, ...]
    lengths: tuple[float, ...]
    allow_large: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(int(p) for p in self.points))
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        if self.n_particles < 1:
            raise GridError("n_particles must be >= 1")
        if self.dims_per_particle not in (1, 2, 3):
            raise GridError("dims_per_particle must be 1, 2 or 3")
        rank = self.n_particles * self.dims_per_particle
        if len(self.points) != rank or len(self.lengths) != rank:
            raise GridError(
                f"need {rank} entries in points and lengths, got "
                f"{len(self.points)} and {len(self.lengths)}"
            )
        if rank > MAX_RANK and not self.allow_large:
            raise GridError(f"rank {rank} exceeds the cap of {MAX_RANK}; pass allow_large=True")
        for p in self.points:
            if p < 8 or p % 2:
                raise GridError(f"points per axis must be even and >= 8, got {p}")
        for length in self.lengths:
            if not np.isfinite(length) or length <= 0:
                raise GridError(f"box lengths must be positive, got {length}")

    @classmethod
    def uniform(cls, n_particles: int, dims_per_particle: int, points: int, length: float,
                **kw) -> "LatticeGrid":
        rank = n_particles * dims_per_particle
        return cls(n_particles, dims_per_particle, (points,) * rank, (length,) * rank, **kw)

    @property
    def rank(self) -> int:
        return self.n_particles * self.dims_per_particle

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def block_axes(self, particle: int) -> tuple[int, ...]:
        if not 0 <= particle < self.n_particles:
            raise IndexError(f"particle index {particle} out of range")
        d = self.dims_per_particle
        return tuple(range(particle * d, (particle + 1) * d))

    def axis_coords(self, axis: int) -> np.ndarray:
        """1D coordinates along ``axis``: ``-L/2 + j*h``, j = 0..N-1."""
        n, L = self.points[axis], self.lengths[axis]
        return -0.5 * L + (L / n) * np.arange(n)

    def coord(self, axis: int) -> np.ndarray:
        """Coordinates along ``axis`` shaped to broadcast against a full field."""
        shape = [1] * self.rank
        shape[axis] = self.points[axis]
        return self.axis_coords(axis).reshape(shape)

    def wavenumbers(self, axis: int, *, nyquist: bool = True) -> np.ndarray:
        """Angular wavenumbers along ``axis``, broadcastable against a full field."""
        n = self.points[axis]
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing[axis])
        if not nyquist:
            k[n // 2] = 0.0
        shape = [1] * self.rank
        shape[axis] = n
        return k.reshape(shape)

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|k|^2 summed over every axis (all particle blocks)."""
        ksq = np.zeros(self.shape)
        for a in range(self.rank):
            ksq = ksq + self.wavenumbers(a) ** 2
        return ksq

    def block_k_squared(self, particle: int) -> np.ndarray:
        ksq = np.zeros(self.shape)
        for a in self.block_axes(particle):
            ksq = ksq + self.wavenumbers(a) ** 2
        return ksq

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoidal rule on the torus (a plain Riemann sum)."""
        return float(np.sum(values) * self.cell_volume)

    def refined(self, factor: int = 2) -> "LatticeGrid":
        return LatticeGrid(self.n_particles, self.dims_per_particle,
                           tuple(p * factor for p in self.points), self.lengths,
                           allow_large=self.allow_large)


def _fft(values, axes):
    return sfft.fftn(values, axes=axes, workers=fft_workers())


def _ifft(values, axes):
    return sfft.ifftn(values, axes=axes, workers=fft_workers())


def _restore(result: np.ndarray, like: np.ndarray) -> np.ndarray:
    return result.real.copy() if not np.iscomplexobj(like) else result


def spectral_gradient(field: np.ndarray, grid: LatticeGrid, axis: int) -> np.ndarray:
    """First derivative along ``axis`` by Fourier collocation.

    The Nyquist coefficient is dropped, so real input gives real output.
    """
    k = grid.wavenumbers(axis, nyquist=False)
    out = _ifft(1j * k * _fft(field, (axis,)), (axis,))
    return _restore(out, field)


def spectral_gradients(field: np.ndarray, grid: LatticeGrid,
                       axes: Sequence[int] | None = None) -> list[np.ndarray]:
    """Gradient components along ``axes`` (default: all), sharing one forward FFT."""
    axes = range(grid.rank) if axes is None else axes
    fhat = _fft(field, tuple(range(grid.rank)))
    all_axes = tuple(range(grid.rank))
    return [_restore(_ifft(1j * grid.wavenumbers(a, nyquist=False) * fhat, all_axes), field)
            for a in axes]


def spectral_second(field: np.ndarray, grid: LatticeGrid, axis_j: int, axis_k: int) -> np.ndarray:
    """Second derivative d^2/dx_j dx_k."""
    if axis_j == axis_k:
        symbol = -grid.wavenumbers(axis_j) ** 2
    else:
        symbol = -grid.wavenumbers(axis_j, nyquist=False) * grid.wavenumbers(axis_k, nyquist=False)
    axes = tuple(range(grid.rank))
    return _restore(_ifft(symbol * _fft(field, axes), axes), field)


def spectral_laplacian(field: np.ndarray, grid: LatticeGrid,
                       particle: int | None = None) -> np.ndarray:
    """Laplacian over all axes, or over one particle's block when ``particle`` is given."""
    ksq = grid.k_squared if particle is None else grid.block_k_squared(particle)
    axes = tuple(range(grid.rank))
    return _restore(_ifft(-ksq * _fft(field, axes), axes), field)


def fourier_filter(field: np.ndarray, grid: LatticeGrid, mask: np.ndarray) -> np.ndarray:
    """Multiply the spectrum by ``mask`` (same shape as the field)."""
    axes = tuple(range(grid.rank))
    return _restore(_ifft(mask * _fft(field, axes), axes), field)


def two_thirds_mask(grid: LatticeGrid) -> np.ndarray:
    """Orszag 2/3-rule truncation mask."""
    mask = np.ones(grid.shape, dtype=bool)
    for a in range(grid.rank):
        n = grid.points[a]
        idx = np.abs(np.fft.fftfreq(n) * n)
        keep = idx < n / 3.0
        shape = [1] * grid.rank
        shape[a] = n
        mask = mask & keep.reshape(shape)
    return mask.astype(float)


def exponential_filter(grid: LatticeGrid, start: float = 0.9, order: int = 8,
                       strength: float = 36.0) -> np.ndarray:
    """Exponential filter acting only on the top ``1 - start`` fraction of each axis."""
    filt = np.ones(grid.shape)
    for a in range(grid.rank):
        n = grid.points[a]
        eta = np.abs(np.fft.fftfreq(n) * n) / (n / 2)
        f = np.where(eta > start, np.exp(-strength * ((eta - start) / (1 - start)) ** order), 1.0)
        shape = [1] * grid.rank
        shape[a] = n
        filt = filt * f.reshape(shape)
    return filt


class RealSpectral:
    """Cached real-to-complex transforms and derivative symbols for one grid.

    The hot loops of the hydrodynamic engine call these on real fields
    thousands of times; caching the symbols and using ``rfftn`` halves the
    work compared with the generic helpers above.
    """

    def __init__(self, grid: LatticeGrid):
        self.grid = grid
        self.axes = tuple(range(grid.rank))
        self.shape = grid.shape
        ks = []
        for a in range(grid.rank):
            n, h = grid.points[a], grid.spacing[a]
            if a == grid.rank - 1:
                k = 2 * np.pi * np.fft.rfftfreq(n, d=h)
            else:
                k = 2 * np.pi * np.fft.fftfreq(n, d=h)
            shape = [1] * grid.rank
            shape[a] = k.size
            ks.append(k.reshape(shape))
        self.ksq = sum(k ** 2 for k in ks)
        self.ik = []
        for a, k in enumerate(ks):
            k = k.copy()
            n = grid.points[a]
            flat = k.reshape(-1)
            nyq = n // 2
            flat[nyq if a < grid.rank - 1 else -1] = 0.0
            self.ik.append(1j * k)

        self.workers = fft_workers()

    def forward(self, f: np.ndarray) -> np.ndarray:
        if len(self.shape) == 1:
            return sfft.rfft(f)
        return sfft.rfftn(f, axes=self.axes, workers=self.workers)

    def inverse(self, fhat: np.ndarray) -> np.ndarray:
        if len(self.shape) == 1:
            return sfft.irfft(fhat, n=self.shape[0])
        return sfft.irfftn(fhat, s=self.shape, axes=self.axes, workers=self.workers)

    def gradient(self, f: np.ndarray) -> list[np.ndarray]:
        fhat = self.forward(f)
        return [self.inverse(ik * fhat) for ik in self.ik]

    def divergence(self, comps: Sequence[np.ndarray]) -> np.ndarray:
        acc = 0
        for ik, c in zip(self.ik, comps):
            acc = acc + ik * self.forward(c)
        return self.inverse(acc)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.inverse(-self.ksq * self.forward(f))
