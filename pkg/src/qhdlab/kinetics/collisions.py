"""Cell-local binary collisions that conserve number, momentum and energy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from . import _backend
from .ensemble import MonadEnsemble, cell_layout, sort_by_cell


@dataclass(frozen=True)
class CollisionStats:
    step: int
    candidates: int
    accepted: int
    d_count: int
    d_momentum: np.ndarray
    d_energy: float
    max_event_dp: float  # relative, per accepted pair
    max_event_de: float

    @property
    def acceptance(self) -> float:
        return self.accepted / self.candidates if self.candidates else 0.0


def collide(ens: MonadEnsemble, cell_size, collision_rate: float, dt: float,
            seed: int | None = None, *, backend: str | None = None) -> tuple[MonadEnsemble, CollisionStats]:
    """Pair the monads of every cell and scatter a fraction ``min(1, rate*dt)`` of the pairs.

    Random numbers come from the counter stream keyed by
    ``(seed, ens.step, cell)``, so the outcome does not depend on the
    backend's thread count.  Velocities are updated in place.
    """
    if collision_rate < 0:
        raise ValidationError("collision_rate must be >= 0")
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    seed = ens.rng_seed if seed is None else int(seed)
    cells = cell_layout(ens.box, cell_size)
    order, starts = sort_by_cell(ens.positions, ens.box, cells, backend=backend)
    counts = np.diff(starts)
    candidates = int(np.sum(counts // 2))
    p = min(1.0, collision_rate * dt)
    p_before = ens.total_momentum()
    e_before = ens.kinetic_energy()
    core = _backend.get(backend)
    accepted, mdp, mde = core.collide_cells(ens.velocities, order, starts, seed, ens.step, p,
                                            _backend.threads())
    stats = CollisionStats(
        step=ens.step,
        candidates=candidates,
        accepted=int(np.sum(accepted)),
        d_count=0,  # pairs scatter, never merge or split
        d_momentum=ens.total_momentum() - p_before,
        d_energy=ens.kinetic_energy() - e_before,
        max_event_dp=float(np.max(mdp, initial=0.0)),
        max_event_de=float(np.max(mde, initial=0.0)),
    )
    return ens, stats
