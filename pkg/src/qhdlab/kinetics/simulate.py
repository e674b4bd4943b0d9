"""Driver loop: stream, collide, record moments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFinite, ValidationError
from .collisions import CollisionStats, collide
from .ensemble import ForceField, MonadEnsemble, stream_and_force
from .moments import MIN_COUNT, MomentSnapshot, record_moments


@dataclass(frozen=True)
class KineticsConfig:
    dt: float
    steps: int
    cell_size: float
    collision_rate: float
    moment_cells: tuple[int, ...] | None = None
    record_every: int = 1
    min_count: int = MIN_COUNT

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.steps < 1 or self.record_every < 1:
            raise ValidationError("steps and record_every must be >= 1")
        if not self.cell_size > 0:
            raise ValidationError("cell_size must be positive")
        if self.collision_rate < 0:
            raise ValidationError("collision_rate must be >= 0")


@dataclass
class KineticsRun:
    ensemble: MonadEnsemble
    moments: list[MomentSnapshot] = field(default_factory=list)
    collisions: list[CollisionStats] = field(default_factory=list)
    totals: list[tuple[int, float, np.ndarray, float]] = field(default_factory=list)


def run_kinetics(ens: MonadEnsemble, cfg: KineticsConfig, force: ForceField | None = None, *,
                 backend: str | None = None, keep_collision_stats: bool = True) -> KineticsRun:
    """Advance ``ens`` in place for ``cfg.steps`` steps.

    Totals (step, time, momentum, kinetic energy) are recorded every
    ``record_every`` steps, moments too when ``moment_cells`` is set.
    """
    force = force or ForceField.none()
    run = KineticsRun(ens)
    t0 = ens.step

    def record():
        if (ens.step - t0) % cfg.record_every:
            return
        time = (ens.step - t0) * cfg.dt
        run.totals.append((ens.step, time, ens.total_momentum(), ens.kinetic_energy()))
        if cfg.moment_cells is not None:
            run.moments.append(record_moments(ens, cfg.moment_cells, time, force=force,
                                              min_count=cfg.min_count, backend=backend))

    record()
    for _ in range(cfg.steps):
        stream_and_force(ens, force, cfg.dt, backend=backend)
        if cfg.collision_rate > 0:
            _, stats = collide(ens, cfg.cell_size, cfg.collision_rate, cfg.dt, backend=backend)
            if keep_collision_stats:
                run.collisions.append(stats)
        if not np.all(np.isfinite(ens.velocities)):
            raise NonFinite(f"monad velocities became non-finite at step {ens.step}")
        record()
    return run
