"""Static functionals of a density/action pair.

Everything here works at the normalized quantum scale: ``rho`` integrates
to one, ``m`` and ``hbar`` are the particle mass and action constant.
Integrals are Riemann sums on the torus, so discrete identities such as
``I == sum(I_i)`` hold to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AllMasked, FloorViolation, NumericalError, ValidationError
from .fields import (
    RHO_FLOOR_REL, MadelungPair, WaveField, floor_mask, phase_gradient, rho_floor,
    to_wavefield,
)
from .grid import (
    LatticeGrid, _fft, spectral_gradient, spectral_gradients, spectral_laplacian,
    spectral_second,
)


@dataclass(frozen=True)
class NonlinearTerm:
    """Density-dependent potential ``U(rho)``: none, ``a*rho`` or ``b*ln(rho)``."""

    kind: str = "none"
    coeff: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "cubic", "log"):
            raise ValidationError(f"unknown nonlinearity {self.kind!r}")
        if not np.isfinite(self.coeff):
            raise ValidationError("nonlinear coefficient must be finite")
        if self.kind == "none" and self.coeff != 0.0:
            raise ValidationError("kind 'none' takes no coefficient")

    @classmethod
    def none(cls) -> "NonlinearTerm":
        return cls()

    @classmethod
    def cubic(cls, a: float) -> "NonlinearTerm":
        return cls("cubic", float(a))

    @classmethod
    def logarithmic(cls, b: float) -> "NonlinearTerm":
        return cls("log", float(b))

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def potential(self, rho: np.ndarray) -> np.ndarray:
        """U(rho); the logarithm is clamped at the density floor."""
        if self.kind == "cubic":
            return self.coeff * rho
        if self.kind == "log":
            return self.coeff * np.log(np.maximum(rho, rho_floor(rho)))
        return np.zeros_like(rho)

    def pressure(self, rho: np.ndarray) -> np.ndarray:
        """Diagonal stress ``(1/rho) * integral(rho dU/drho drho)``, constant fixed at zero."""
        if self.kind == "cubic":
            return 0.5 * self.coeff * rho
        if self.kind == "log":
            return np.full_like(rho, self.coeff)
        return np.zeros_like(rho)

    def energy_density(self, rho: np.ndarray) -> np.ndarray:
        """G(rho) with dG/drho = U, so that the nonlinear energy is integral(G)."""
        if self.kind == "cubic":
            return 0.5 * self.coeff * rho ** 2
        if self.kind == "log":
            safe = np.maximum(rho, rho_floor(rho))
            return self.coeff * (rho * np.log(safe) - rho)
        return np.zeros_like(rho)


@dataclass(frozen=True)
class ConstitutiveParams:
    """Stress coefficient ``c`` (``-hbar^2/4m`` on the quantum branch) and ``U``."""

    c: float
    nonlinear: NonlinearTerm = field(default_factory=NonlinearTerm)

    def __post_init__(self):
        if not np.isfinite(self.c) or self.c > 0:
            raise ValidationError("c must be finite and non-positive")

    @classmethod
    def quantum(cls, hbar: float, mass: float,
                nonlinear: NonlinearTerm | None = None) -> "ConstitutiveParams":
        return cls(-hbar ** 2 / (4.0 * mass), nonlinear or NonlinearTerm())

    def hbar_over_mass(self) -> float:
        """hbar^2/m recovered from c."""
        return -4.0 * self.c


def _min_image(delta: np.ndarray, length: float) -> np.ndarray:
    return delta - length * np.round(delta / length)


@dataclass(frozen=True)
class PotentialSpec:
    """External one-body and pairwise two-body potentials on the joint grid.

    ``external`` receives one particle's coordinates as a list of ``d``
    broadcastable arrays.  ``pairwise`` receives minimum-image distances.
    Either may instead be an array already sampled on the grid
    (``external`` on one particle's block grid, of shape ``points[:d]``).
    The total is ``scale * (sum_i Vex(x_i) + sum_{i<j} Vin(|x_i - x_j|))``.
    """

    external: Callable | np.ndarray | None = None
    pairwise: Callable | None = None
    scale: float = 1.0

    @classmethod
    def none(cls) -> "PotentialSpec":
        return cls()

    @classmethod
    def harmonic(cls, mass: float, omega: float, center: float = 0.0) -> "PotentialSpec":
        def vex(xs):
            return 0.5 * mass * omega ** 2 * sum((x - center) ** 2 for x in xs)
        return cls(external=vex)

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "PotentialSpec":
        return cls(external=np.asarray(values, float))

    def _external_block(self, grid: LatticeGrid, particle: int) -> np.ndarray:
        axes = grid.block_axes(particle)
        if callable(self.external):
            return np.asarray(self.external([grid.coord(a) for a in axes]), float)
        samples = np.asarray(self.external, float)
        d = grid.dims_per_particle
        if samples.shape != tuple(grid.points[a] for a in axes):
            raise ValidationError(
                f"external samples of shape {samples.shape} do not match the block grid")
        shape = [1] * grid.rank
        for k, a in enumerate(axes):
            shape[a] = samples.shape[k]
        return samples.reshape(shape) if d else samples

    def sample(self, grid: LatticeGrid) -> np.ndarray:
        V = np.zeros(grid.shape)
        if self.external is not None:
            for i in range(grid.n_particles):
                V = V + self._external_block(grid, i)
        if self.pairwise is not None and grid.n_particles > 1:
            for i in range(grid.n_particles):
                for j in range(i + 1, grid.n_particles):
                    r2 = 0.0
                    for ai, aj in zip(grid.block_axes(i), grid.block_axes(j)):
                        dx = _min_image(grid.coord(ai) - grid.coord(aj), grid.lengths[ai])
                        r2 = r2 + dx ** 2
                    V = V + np.asarray(self.pairwise(np.sqrt(r2)), float)
        V = self.scale * np.broadcast_to(V, grid.shape).copy()
        if not np.all(np.isfinite(V)):
            raise ValidationError("sampled potential is not finite")
        return V


def _require_density(rho: np.ndarray):
    rho = np.asarray(rho, float)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise FloorViolation("density must be finite and non-negative")
    return rho


def quantum_potential(rho: np.ndarray, grid: LatticeGrid, hbar: float, mass: float, *,
                      particle: int | None = None,
                      rho_floor_rel: float = RHO_FLOOR_REL) -> np.ndarray:
    """Bohm potential ``W = -(hbar^2/2m) * lap(sqrt(rho)) / sqrt(rho)``.

    With ``particle`` set, the Laplacian acts only on that particle's block,
    giving ``W_i`` with ``sum_i W_i == W``.  Points below the density floor
    are masked and returned as zero.
    """
    rho = _require_density(rho)
    low = floor_mask(rho, rho_floor_rel)
    if np.all(low):
        raise AllMasked("every point is below the density floor")
    amp = np.sqrt(rho)
    lap = spectral_laplacian(amp, grid, particle)
    W = np.zeros_like(rho)
    good = ~low
    W[good] = -(hbar ** 2 / (2.0 * mass)) * lap[good] / amp[good]
    return W


def quantum_potential_block(rho, grid, hbar, mass, particle: int, **kw) -> np.ndarray:
    return quantum_potential(rho, grid, hbar, mass, particle=particle, **kw)


def stress_tensor(rho: np.ndarray, grid: LatticeGrid, params: ConstitutiveParams, *,
                  on_floor: str = "raise",
                  rho_floor_rel: float = RHO_FLOOR_REL) -> np.ndarray:
    """Constitutive stress ``c * d_j d_k ln(rho) + delta_jk * P(rho)``.

    Returns an array of shape ``(D, D) + grid.shape``.  Log-derivatives are
    formed from derivatives of ``rho`` itself, avoiding Gibbs ringing from
    the logarithm's tails.
    """
    rho = _require_density(rho)
    low = floor_mask(rho, rho_floor_rel)
    if np.any(low):
        if on_floor == "raise":
            raise FloorViolation(f"{int(low.sum())} points below the density floor")
        if np.all(low):
            raise AllMasked("every point is below the density floor")
    D = grid.rank
    safe = np.where(low, 1.0, rho)
    grads = spectral_gradients(rho, grid)
    sigma = np.zeros((D, D) + grid.shape)
    for j in range(D):
        for k in range(j, D):
            hess = spectral_second(rho, grid, j, k)
            val = params.c * (hess / safe - grads[j] * grads[k] / safe ** 2)
            sigma[j, k] = val
            sigma[k, j] = val
    P = params.nonlinear.pressure(rho)
    for j in range(D):
        sigma[j, j] = sigma[j, j] + P
    if np.any(low):
        sigma[:, :, low] = 0.0
    return sigma


@dataclass
class ConstitutiveResidual:
    """Residual norms, one entry per configuration-space axis."""

    l2: np.ndarray
    max: np.ndarray
    form: str

    @property
    def worst_l2(self) -> float:
        return float(np.max(self.l2))


def constitutive_residual(rho: np.ndarray, grid: LatticeGrid, params: ConstitutiveParams, *,
                          form: str = "force-density",
                          rho_floor_rel: float = RHO_FLOOR_REL) -> ConstitutiveResidual:
    """Check that ``W`` and ``sigma`` jointly solve the conservative-stress condition.

    ``W`` is built from the Bohm formula plus ``U(rho)`` and ``sigma`` from
    the constitutive formula, independently.

    ``form="pointwise"``
        ``d_j W - d_k sigma_jk - sigma_jk d_k ln(rho)`` over points above the
        floor (raises if any point is below it).
    ``form="force-density"``
        the same expression multiplied by ``rho``, i.e.
        ``rho d_j W - d_k(rho sigma_jk)``.  Every term is then a product of
        smooth fields, so tails near zero density do not amplify rounding.
    """
    rho = _require_density(rho)
    D = grid.rank
    hbar2_m = params.hbar_over_mass()
    low = floor_mask(rho, rho_floor_rel)
    if form == "pointwise":
        if np.any(low):
            raise FloorViolation(f"{int(low.sum())} points below the density floor")
        # hbar and m only enter through hbar^2/m; mass=1 with hbar^2 = hbar2_m
        W = quantum_potential(rho, grid, np.sqrt(hbar2_m), 1.0) + params.nonlinear.potential(rho)
        sigma = stress_tensor(rho, grid, params)
        dW = spectral_gradients(W, grid)
        dxi = [g / rho for g in spectral_gradients(rho, grid)]
        res = []
        for j in range(D):
            r = dW[j].copy()
            for k in range(D):
                r -= spectral_gradient(sigma[j, k], grid, k) + sigma[j, k] * dxi[k]
            res.append(r)
    elif form == "force-density":
        amp = np.sqrt(rho)
        lap_a = spectral_laplacian(amp, grid)
        da = spectral_gradients(amp, grid)
        d_lap_a = spectral_gradients(lap_a, grid)
        drho = spectral_gradients(rho, grid)
        # rho * d_j(lap a / a) = a d_j lap a - lap a d_j a
        rho_dW = [-(hbar2_m / 2.0) * (amp * d_lap_a[j] - lap_a * da[j]) for j in range(D)]
        nl = params.nonlinear
        if nl.kind == "cubic":
            rho_dW = [rho_dW[j] + nl.coeff * rho * drho[j] for j in range(D)]
        elif nl.kind == "log":
            rho_dW = [rho_dW[j] + nl.coeff * drho[j] for j in range(D)]
        P = nl.pressure(rho)
        res = []
        for j in range(D):
            r = rho_dW[j].copy()
            for k in range(D):
                # rho sigma_jk = c (d_j d_k rho - 4 d_j a d_k a) + delta_jk rho P
                rs = params.c * (spectral_second(rho, grid, j, k) - 4.0 * da[j] * da[k])
                if j == k:
                    rs = rs + rho * P
                r -= spectral_gradient(rs, grid, k)
            res.append(r)
        low = np.zeros_like(low)
    else:
        raise ValidationError(f"unknown residual form {form!r}")
    good = ~low
    l2 = np.array([np.sqrt(np.sum(r[good] ** 2) * grid.cell_volume) for r in res])
    mx = np.array([np.max(np.abs(r[good])) for r in res])
    return ConstitutiveResidual(l2, mx, form)


def velocity_field(pair: MadelungPair, mass: float, hbar: float = 1.0) -> list[np.ndarray]:
    """``u = grad(S)/m``; ``hbar`` is only used to detect phase winding."""
    return [phase_gradient(pair.phase, pair.grid, a, hbar) / mass for a in range(pair.grid.rank)]


@dataclass
class FisherInfo:
    total: float
    blocks: tuple[float, ...]


def fisher_information(rho: np.ndarray, grid: LatticeGrid, *,
                       rho_floor_rel: float = RHO_FLOOR_REL) -> FisherInfo:
    """``I = integral(|grad rho|^2 / rho)`` and its per-particle parts ``I_i``."""
    rho = _require_density(rho)
    low = floor_mask(rho, rho_floor_rel)
    if np.all(low):
        raise AllMasked("every point is below the density floor")
    good = ~low
    grads = spectral_gradients(rho, grid)
    dens = [np.where(good, g ** 2 / np.where(good, rho, 1.0), 0.0) for g in grads]
    blocks = tuple(
        grid.integrate(sum(dens[a] for a in grid.block_axes(i)))
        for i in range(grid.n_particles)
    )
    total = grid.integrate(sum(dens))
    if abs(total - sum(blocks)) > 1e-10 * max(abs(total), 1e-300):
        raise NumericalError(f"Fisher additivity broke: {total} vs {sum(blocks)}")
    return FisherInfo(total, blocks)


@dataclass
class DiagnosticsRecord:
    step: int
    time: float
    norm: float
    H_cl: float
    H_int: float
    H_total: float
    H_eq40: float
    I: float
    I_blocks: tuple[float, ...]
    res_constitutive: float = float("nan")
    res_continuity: float = float("nan")
    H_nl: float = 0.0
    masked_fraction: float = 0.0

    @property
    def route_gap(self) -> float:
        """Relative disagreement between the two energy routes."""
        return abs(self.H_total - self.H_eq40) / max(abs(self.H_eq40), 1e-300)

    @staticmethod
    def csv_header(n_particles: int) -> list[str]:
        return (["step", "time", "norm", "H_cl", "H_int", "H_total", "H_eq40", "I"]
                + [f"I_{i + 1}" for i in range(n_particles)]
                + ["res_constitutive", "res_continuity"])

    def csv_row(self) -> list[str]:
        vals = [self.time, self.norm, self.H_cl, self.H_int, self.H_total, self.H_eq40, self.I,
                *self.I_blocks, self.res_constitutive, self.res_continuity]
        return [str(self.step)] + [repr(float(v)) for v in vals]


def kinetic_energy(psi: WaveField) -> float:
    """``(hbar^2/2m) * integral(|grad psi|^2)`` via Parseval."""
    grid = psi.grid
    coeffs = _fft(psi.values, tuple(range(grid.rank)))
    # Parseval: sum|f|^2 dV = dV/Npts * sum|f_hat|^2
    return float(psi.hbar ** 2 / (2 * psi.mass) * np.sum(grid.k_squared * np.abs(coeffs) ** 2)
                 * grid.cell_volume / grid.size)


def hamiltonian(psi: WaveField, V: np.ndarray, nonlinear: NonlinearTerm | None = None) -> float:
    """Wave-function energy: kinetic + potential (+ nonlinear interaction energy)."""
    grid = psi.grid
    rho = psi.density
    E = kinetic_energy(psi) + grid.integrate(V * rho)
    if nonlinear is not None and nonlinear.active:
        E += grid.integrate(nonlinear.energy_density(rho))
    return E


def _current_velocity(psi: WaveField, good: np.ndarray) -> list[np.ndarray]:
    grads = spectral_gradients(psi.values, psi.grid)
    rho = psi.density
    safe = np.where(good, rho, 1.0)
    return [np.where(good, psi.hbar / psi.mass * np.imag(np.conj(psi.values) * g) / safe, 0.0)
            for g in grads]


def energy_report(state: WaveField | MadelungPair, potential: PotentialSpec | np.ndarray,
                  params: ConstitutiveParams | None = None, *, hbar: float | None = None,
                  mass: float | None = None, step: int = 0, time: float = 0.0,
                  strict: bool = False, with_residual: bool = True) -> DiagnosticsRecord:
    """Energy bookkeeping along two independent routes.

    Hydrodynamic route: ``H_cl = integral(rho (m|u|^2/2 + V))`` plus the
    internal energy ``hbar^2 I / 8m``.  Wave route: kinetic energy of psi
    from its spectrum plus ``integral(V |psi|^2)``.  For a pair the
    velocity comes from ``grad S``; for a wave field from the probability
    current, which needs no phase unwrapping.
    """
    if isinstance(state, WaveField):
        psi = state
        hbar, mass = psi.hbar, psi.mass
        rho = psi.density
    else:
        if hbar is None or mass is None:
            raise ValidationError("hbar and mass are required for a Madelung pair")
        psi = to_wavefield(state, hbar, mass)
        rho = np.asarray(state.rho)
    grid = psi.grid
    V = potential.sample(grid) if isinstance(potential, PotentialSpec) else np.asarray(potential)
    params = params or ConstitutiveParams.quantum(hbar, mass)
    low = floor_mask(rho)
    if strict and np.any(low):
        raise FloorViolation(f"{int(low.sum())} points below the density floor")
    good = ~low
    if isinstance(state, WaveField) or np.any(low):
        # floored points hold a copied phase whose kink would ring through grad(S)
        u = _current_velocity(psi, good)
    else:
        u = velocity_field(state, mass, hbar)
    u2 = sum(c ** 2 for c in u)
    fisher = fisher_information(rho, grid)
    H_cl = grid.integrate(np.where(good, rho * 0.5 * mass * u2, 0.0)) + grid.integrate(rho * V)
    H_int = hbar ** 2 / (8.0 * mass) * fisher.total
    H_eq40 = kinetic_energy(psi) + grid.integrate(V * psi.density)
    H_nl = grid.integrate(params.nonlinear.energy_density(rho)) if params.nonlinear.active else 0.0
    res = float("nan")
    if with_residual:
        res = constitutive_residual(rho, grid, params).worst_l2
    return DiagnosticsRecord(
        step=step, time=time, norm=grid.integrate(rho), H_cl=H_cl, H_int=H_int,
        H_total=H_cl + H_int, H_eq40=H_eq40, I=fisher.total, I_blocks=fisher.blocks,
        res_constitutive=res, H_nl=H_nl, masked_fraction=float(low.mean()),
    )
