"""Built-in verification battery run by ``qhdlab check``.

Each item evaluates one identity on a canned state and records the
measured error next to its tolerance.  ``quantum_potential`` can be
swapped out so tests can confirm that a broken implementation is caught.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import observables as obs
from .fields import MadelungPair, gaussian_wavefield, to_madelung
from .grid import LatticeGrid
from .madelung import evolve_madelung
from .observables import ConstitutiveParams, NonlinearTerm, PotentialSpec
from .schrodinger import EvolveConfig, default_dt, evolve


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{tag}  {self.name:<34s} measured {self.measured:.3e}  tol {self.tolerance:.1e}{extra}"


@dataclass
class CheckReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def get(self, name: str) -> CheckResult:
        return next(r for r in self.results if r.name == name)

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]


def random_density(grid: LatticeGrid, seed: int, modes: int = 3, amplitude: float = 0.4) -> np.ndarray:
    """Smooth, strictly positive, normalized density: exp of a random low-mode series."""
    rng = np.random.default_rng(seed)
    log_rho = np.zeros(grid.shape)
    for a in range(grid.rank):
        x = grid.coord(a)
        L = grid.lengths[a]
        for m in range(1, modes + 1):
            c, phi = rng.normal(0, amplitude / m), rng.uniform(0, 2 * np.pi)
            log_rho = log_rho + c * np.cos(2 * np.pi * m * x / L + phi)
    if grid.rank > 1:
        x0, x1 = grid.coord(0), grid.coord(1)
        c = rng.normal(0, amplitude / 2)
        log_rho = log_rho + c * np.sin(2 * np.pi * (x0 / grid.lengths[0] + x1 / grid.lengths[1]))
    rho = np.exp(log_rho)
    return rho / grid.integrate(rho)


def _qp_identity(qp: Callable, grid: LatticeGrid, seed: int, hbar=1.0, mass=1.0):
    rho = random_density(grid, seed)
    W = qp(rho, grid, hbar, mass)
    lhs = grid.integrate(rho * W)
    rhs = hbar ** 2 * obs.fisher_information(rho, grid).total / (8 * mass)
    return lhs, rhs


def run_checks(*, quantum_potential: Callable | None = None, include_kinetics: bool = True,
               include_dynamics: bool = True) -> CheckReport:
    qp = quantum_potential or obs.quantum_potential
    rep = CheckReport()
    add = rep.results.append

    # integral(rho W) = hbar^2 I / 8m
    for label, grid in (("1d", LatticeGrid.uniform(1, 1, 128, 2 * np.pi)),
                        ("2d", LatticeGrid.uniform(2, 1, 64, 2 * np.pi))):
        worst, lhs_min = 0.0, np.inf
        for seed in range(5):
            lhs, rhs = _qp_identity(qp, grid, seed)
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
            lhs_min = min(lhs_min, lhs)
        add(CheckResult(f"quantum_potential_identity_{label}", worst <= 1e-8, worst, 1e-8,
                        f"min integral(rho W) = {lhs_min:.6g}"))

    # Fisher additivity and W decomposition on a two-particle grid
    grid2 = LatticeGrid.uniform(2, 1, 64, 2 * np.pi)
    rho2 = random_density(grid2, 11)
    fi = obs.fisher_information(rho2, grid2)
    err = abs(fi.total - sum(fi.blocks)) / fi.total
    add(CheckResult("fisher_additivity", err <= 1e-10, err, 1e-10))
    W = qp(rho2, grid2, 1.0, 1.0)
    Wsum = sum(qp(rho2, grid2, 1.0, 1.0, particle=i) for i in range(2))
    err = float(np.max(np.abs(W - Wsum)) / max(1.0, np.max(np.abs(W))))
    add(CheckResult("quantum_potential_blocks", err <= 1e-10, err, 1e-10))

    # constitutive residual: converged at 256 points, spectral gap to 16 points
    for nl in (NonlinearTerm.none(), NonlinearTerm.cubic(0.7), NonlinearTerm.logarithmic(0.3)):
        params = ConstitutiveParams.quantum(1.0, 1.0, nl)
        res = {}
        for n in (16, 256):
            g = LatticeGrid.uniform(1, 1, n, 2 * np.pi)
            res[n] = obs.constitutive_residual(random_density(g, 3), g, params).worst_l2
        factor = res[16] / max(res[256], 1e-300)
        ok = res[256] < 1e-6 and factor > 1e4
        add(CheckResult(f"constitutive_residual_{nl.kind}", ok, res[256], 1e-6,
                        f"16-point residual {res[16]:.2e}, factor {factor:.1e}"))

    # diagonal stresses of the nonlinear terms
    g = LatticeGrid.uniform(2, 1, 32, 2 * np.pi)
    rho = random_density(g, 5)
    eye = np.eye(2)[:, :, None, None]
    for nl, expect in ((NonlinearTerm.cubic(0.7), 0.5 * 0.7 * rho * eye),
                       (NonlinearTerm.logarithmic(0.3), 0.3 * eye * np.ones(g.shape))):
        sigma = obs.stress_tensor(rho, g, ConstitutiveParams(0.0, nl))
        err = float(np.max(np.abs(sigma - expect)))
        add(CheckResult(f"stress_tensor_{nl.kind}", err <= 1e-12, err, 1e-12))

    # two energy routes on a moving Gaussian in a harmonic trap
    g = LatticeGrid.uniform(1, 1, 128, 16.0)
    psi = gaussian_wavefield(g, 0.8, 0.5, 1.3)
    rec = obs.energy_report(psi, PotentialSpec.harmonic(1.0, 1.0), with_residual=False)
    add(CheckResult("energy_routes", rec.route_gap <= 1e-8, rec.route_gap, 1e-8))

    if include_dynamics:
        g = LatticeGrid.uniform(1, 1, 64, 10.0)
        psi = gaussian_wavefield(g, 1.0, images=2)
        dt = default_dt(g)
        steps = int(np.ceil(0.1 / dt))
        cfg = EvolveConfig(dt=0.1 / steps, steps=steps, record_every=steps)
        final_psi, _ = evolve(psi, PotentialSpec.none(), cfg, diagnostics=False)
        pair = to_madelung(psi)
        final_pair, _ = evolve_madelung(pair, PotentialSpec.none(), ConstitutiveParams.quantum(1, 1),
                                        cfg, diagnostics=False)
        dist = float(np.sqrt(g.integrate((final_psi.density - final_pair.rho) ** 2)))
        add(CheckResult("madelung_vs_schrodinger", dist < 1e-3, dist, 1e-3))

    if include_kinetics:
        from .kinetics import KineticsConfig, collide, maxwellian, moment_residuals, run_kinetics

        ens = maxwellian(4000, (1.0, 1.0, 1.0), 1.0, drift=(0.2, 0.0, 0.0), seed=1)
        _, stats = collide(ens, 0.25, 1e6, 1.0)
        worst = max(stats.max_event_dp, stats.max_event_de)
        add(CheckResult("collision_invariants", worst <= 1e-12, worst, 1e-12,
                        f"{stats.accepted} events"))
        ens = maxwellian(20000, (1.0, 1.0, 1.0), 1.0, seed=2)
        kcfg = KineticsConfig(dt=1e-3, steps=60, cell_size=0.125, collision_rate=100.0,
                              moment_cells=(8, 1, 1), record_every=10)
        run = run_kinetics(ens, kcfg)
        report = moment_residuals(run.moments, kcfg.dt * kcfg.record_every)
        ratio = report.worst_ratio()
        add(CheckResult("moment_residuals_equilibrium", ratio < 2.0, ratio, 2.0,
                        "residual / ensemble-split noise floor"))
    return rep
