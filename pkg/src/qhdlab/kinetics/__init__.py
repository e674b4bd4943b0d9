"""Monad kinetics: classical ensemble, collisions, moments and moment residuals."""
from ._backend import available as available_backends
from .collisions import CollisionStats, collide
from .ensemble import (
    ForceField, MonadEnsemble, anisotropic, cell_index, cell_layout, maxwellian, sort_by_cell,
    sound_wave, stream_and_force, two_temperature, wrap,
)
from .moments import (
    EquationResidual, MomentFields, MomentResidualReport, MomentSnapshot, moment_residuals,
    project_moments, record_moments,
)
from .simulate import KineticsConfig, KineticsRun, run_kinetics

__all__ = [
    "CollisionStats", "EquationResidual", "ForceField", "KineticsConfig", "KineticsRun",
    "MomentFields", "MomentResidualReport", "MomentSnapshot", "MonadEnsemble", "anisotropic",
    "available_backends", "cell_index", "cell_layout", "collide", "maxwellian",
    "moment_residuals", "project_moments", "record_moments", "run_kinetics", "sort_by_cell",
    "sound_wave", "stream_and_force", "two_temperature", "wrap",
]
