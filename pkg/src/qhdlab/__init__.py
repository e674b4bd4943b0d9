"""Quantum hydrodynamics laboratory.

Two field engines (split-step Schrödinger and direct Madelung
hydrodynamics) share one set of observables; a classical monad ensemble
checks that the moment equations emerge from microscopic collisions.
"""
from .errors import (
    AllMasked, CommensurabilityError, FloorViolation, GridError, NoConvergence, NodeFormation,
    NonFinite, NumericalError, QHDError, SeriesTooShort, UnwrapAmbiguous, ValidationError,
)
from .fields import (
    MadelungPair, MonadScale, WaveField, gaussian_wavefield, phase_gradient, plane_wave,
    to_madelung, to_wavefield,
)
from .grid import LatticeGrid
from .madelung import evolve_madelung, hydrodynamic_residuals
from .observables import (
    ConstitutiveParams, DiagnosticsRecord, NonlinearTerm, PotentialSpec, constitutive_residual,
    energy_report, fisher_information, quantum_potential, stress_tensor,
)
from .schrodinger import EvolveConfig, default_dt, evolve, ground_state

__version__ = "0.1.0"
