"""Reference values computed without the package's spectral machinery.

Densities are built as ``rho = f**2`` with ``f`` a positive trigonometric
polynomial, so W, grad(rho) and the Fisher information follow in closed
form.  The dense Hamiltonian uses an explicit DFT matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TrigAmplitude:
    """f(x) = c0 + sum_m c_m cos(k_m . x + phi_m) on a periodic box."""

    c0: float
    coeffs: np.ndarray  # (M,)
    ks: np.ndarray  # (M, D)
    phis: np.ndarray  # (M,)

    def _arg(self, xs, m):
        return sum(self.ks[m, a] * xs[a] for a in range(len(xs))) + self.phis[m]

    def f(self, xs):
        out = self.c0 + 0.0 * sum(xs)
        for m in range(len(self.coeffs)):
            out = out + self.coeffs[m] * np.cos(self._arg(xs, m))
        return out

    def grad(self, xs, axis):
        out = 0.0 * sum(xs)
        for m in range(len(self.coeffs)):
            out = out - self.coeffs[m] * self.ks[m, axis] * np.sin(self._arg(xs, m))
        return out

    def lap(self, xs, axes=None):
        axes = range(len(xs)) if axes is None else axes
        out = 0.0 * sum(xs)
        for m in range(len(self.coeffs)):
            k2 = sum(self.ks[m, a] ** 2 for a in axes)
            out = out - self.coeffs[m] * k2 * np.cos(self._arg(xs, m))
        return out


def random_amplitude(rng: np.random.Generator, lengths, max_mode: int = 3) -> TrigAmplitude:
    D = len(lengths)
    modes = []
    for _ in range(2 + 2 * D):
        m = rng.integers(-max_mode, max_mode + 1, size=D)
        if not np.any(m):
            m[0] = 1
        modes.append(m)
    ks = np.array([[2 * np.pi * m[a] / lengths[a] for a in range(D)] for m in modes])
    coeffs = rng.uniform(-1, 1, len(modes))
    # c0 well above sum|c_m| keeps f bounded away from zero
    c0 = np.sum(np.abs(coeffs)) * rng.uniform(1.3, 2.0)
    return TrigAmplitude(c0, coeffs, ks, rng.uniform(0, 2 * np.pi, len(modes)))


def mesh(points, lengths):
    axes = [-0.5 * L + (L / n) * np.arange(n) for n, L in zip(points, lengths)]
    return np.meshgrid(*axes, indexing="ij")


@dataclass
class DensityOracle:
    rho: np.ndarray
    W: np.ndarray
    fisher: float
    W_blocks: list[np.ndarray]
    fisher_blocks: list[float]


def density_oracle(amp: TrigAmplitude, points, lengths, hbar: float, mass: float,
                   block_axes=None) -> DensityOracle:
    """Normalized rho = f^2 / Z with analytic W, I and per-block parts."""
    xs = mesh(points, lengths)
    dV = float(np.prod([L / n for n, L in zip(points, lengths)]))
    f = amp.f(xs)
    Z = float(np.sum(f ** 2) * dV)  # exact: f^2 is band-limited below Nyquist
    rho = f ** 2 / Z
    W = -(hbar ** 2 / (2 * mass)) * amp.lap(xs) / f
    # |grad rho|^2 / rho = 4 |grad f|^2 / Z
    dens = [4 * amp.grad(xs, a) ** 2 / Z for a in range(len(xs))]
    fisher = float(np.sum(sum(dens)) * dV)
    block_axes = block_axes or [tuple(range(len(xs)))]
    Wb = [-(hbar ** 2 / (2 * mass)) * amp.lap(xs, ax) / f for ax in block_axes]
    Ib = [float(np.sum(sum(dens[a] for a in ax)) * dV) for ax in block_axes]
    return DensityOracle(rho, W, fisher, Wb, Ib)


def dense_kinetic_matrix(n: int, length: float, hbar: float = 1.0, mass: float = 1.0) -> np.ndarray:
    """(hbar^2 / 2m) k^2 in the position basis, from an explicit DFT matrix."""
    j = np.arange(n)
    m = np.where(j < n // 2, j, j - n)  # Nyquist mode carried as -n/2
    k = 2 * np.pi * m / length
    F = np.exp(-2j * np.pi * np.outer(m, j) / n)
    T = F.conj().T @ np.diag(hbar ** 2 * k ** 2 / (2 * mass)) @ F / n
    return T.real


def dense_ground_energy(V: np.ndarray, length: float, hbar: float = 1.0, mass: float = 1.0) -> float:
    H = dense_kinetic_matrix(V.size, length, hbar, mass) + np.diag(V)
    return float(np.linalg.eigvalsh(H)[0])


def free_gaussian_width(s0: float, t: float, hbar: float = 1.0, mass: float = 1.0) -> float:
    """Density standard deviation of a free minimum-uncertainty packet."""
    return s0 * np.sqrt(1 + (hbar * t / (2 * mass * s0 ** 2)) ** 2)


def dispersion_time(s0: float, hbar: float = 1.0, mass: float = 1.0) -> float:
    """Time for the width to grow by sqrt(2): 2 m s0^2 / hbar."""
    return 2 * mass * s0 ** 2 / hbar


# -- counter RNG and single-cell collisions, in plain Python integers ------

_MASK = (1 << 64) - 1
_G = 0x9E3779B97F4A7C15


def mix64_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def bits_int(seed: int, step: int, stream: int, counter: int) -> int:
    k = mix64_int(seed * _G + 0x632BE59BD9B4E019)
    k = mix64_int(k ^ (((step + 1) * _G) & _MASK))
    k = mix64_int(k ^ (((stream + 1) * _G) & _MASK))
    return mix64_int(k + (counter + 1) * _G)


def uniform_int(seed, step, stream, counter) -> float:
    return (bits_int(seed, step, stream, counter) >> 11) * 2.0 ** -53


def collide_one_cell(vel: list[list[float]], cell: int, seed: int, step: int,
                     p_accept: float) -> list[list[float]]:
    """Reference outcome for one cell whose members are listed in binning order."""
    import math

    n = len(vel)
    d = len(vel[0])
    ranked = sorted(range(n), key=lambda s: (bits_int(seed, step, cell, s), s))
    out = [list(v) for v in vel]
    for q in range(n // 2):
        i, j = ranked[2 * q], ranked[2 * q + 1]
        base = n + 3 * q
        if not uniform_int(seed, step, cell, base) < p_accept:
            continue
        vi, vj = vel[i], vel[j]
        if d == 1:
            out[i], out[j] = [vj[0]], [vi[0]]
            continue
        g = [a - b for a, b in zip(vi, vj)]
        gm = math.sqrt(sum(c * c for c in g))
        u1 = uniform_int(seed, step, cell, base + 1)
        if d == 2:
            e = [math.cos(2 * math.pi * u1), math.sin(2 * math.pi * u1)]
        else:
            ct = 2 * u1 - 1
            st = math.sqrt(max(0.0, 1 - ct * ct))
            phi = 2 * math.pi * uniform_int(seed, step, cell, base + 2)
            e = [st * math.cos(phi), st * math.sin(phi), ct]
        out[i] = [0.5 * (a + b) + 0.5 * gm * c for a, b, c in zip(vi, vj, e)]
        out[j] = [0.5 * (a + b) - 0.5 * gm * c for a, b, c in zip(vi, vj, e)]
    return out
