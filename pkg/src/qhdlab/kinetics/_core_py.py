"""Pure-numpy kernels; the reference for the compiled ``_core`` module.

Both modules expose the same functions with identical semantics:

``collide_cells(vel, order, starts, seed, step, p_accept, nthreads)``
    Pairs the monads of each cell in a key-sorted random order and scatters
    accepted pairs isotropically in their centre-of-momentum frame.
    Modifies ``vel`` in place and returns per-cell arrays
    ``(accepted, max_rel_dp, max_rel_de)``.

``deposit_moments(vel, order, starts, nthreads)``
    Two-pass per-cell moments: count, mean velocity, mean of ``c_i c_j``
    and mean of ``|c|^2 c_i`` with ``c = v - mean``.

``bin_cells(positions, box, cells)`` and ``wrap_inplace(positions, box)``
    Cell binning (stable, so ties keep monad order) and the periodic wrap.
"""
from __future__ import annotations

import numpy as np

from .rng import counter_bits, counter_uniform

BACKEND = "python"


def _pairs(order, starts, seed, step):
    counts = np.diff(starts)
    ncell = counts.size
    cell_of = np.repeat(np.arange(ncell, dtype=np.int64), counts)
    slot = np.arange(order.size, dtype=np.int64) - starts[cell_of]
    keys = counter_bits(seed, step, cell_of, slot)
    perm = np.lexsort((keys, cell_of))
    members = order[perm]
    first = np.flatnonzero((slot % 2 == 0) & (slot + 1 < counts[cell_of]))
    return members[first], members[first + 1], cell_of[first], slot[first] // 2, counts


def collide_cells(vel, order, starts, seed, step, p_accept, nthreads=0):
    order = np.asarray(order, np.int64)
    starts = np.asarray(starts, np.int64)
    ncell = starts.size - 1
    accepted = np.zeros(ncell, np.int64)
    max_dp = np.zeros(ncell)
    max_de = np.zeros(ncell)
    i, j, cell, q, counts = _pairs(order, starts, seed, step)
    if i.size == 0:
        return accepted, max_dp, max_de
    base = counts[cell] + 3 * q
    u0 = counter_uniform(seed, step, cell, base)
    take = u0 < p_accept
    i, j, cell, base = i[take], j[take], cell[take], base[take]
    if i.size == 0:
        return accepted, max_dp, max_de
    vi, vj = vel[i], vel[j]
    d = vel.shape[1]
    if d == 1:
        ni, nj = vj.copy(), vi.copy()
    else:
        u1 = counter_uniform(seed, step, cell, base + 1)
        vcm = 0.5 * (vi + vj)
        g = vi - vj
        gm = np.sqrt(np.sum(g * g, axis=1))
        if d == 2:
            phi = 2.0 * np.pi * u1
            e = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        else:
            u2 = counter_uniform(seed, step, cell, base + 2)
            ct = 2.0 * u1 - 1.0
            st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
            phi = 2.0 * np.pi * u2
            e = np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=1)
        half = (0.5 * gm)[:, None] * e
        ni = vcm + half
        nj = vcm - half
    p_scale = np.sqrt(np.sum(vi * vi, 1)) + np.sqrt(np.sum(vj * vj, 1))
    e_scale = np.sum(vi * vi, 1) + np.sum(vj * vj, 1)
    dp = np.sqrt(np.sum((ni + nj - vi - vj) ** 2, 1)) / np.where(p_scale > 0, p_scale, 1.0)
    de = np.abs(np.sum(ni * ni, 1) + np.sum(nj * nj, 1) - e_scale) / np.where(e_scale > 0, e_scale, 1.0)
    vel[i] = ni
    vel[j] = nj
    np.add.at(accepted, cell, 1)
    np.maximum.at(max_dp, cell, dp)
    np.maximum.at(max_de, cell, de)
    return accepted, max_dp, max_de


def deposit_moments(vel, order, starts, nthreads=0):
    order = np.asarray(order, np.int64)
    starts = np.asarray(starts, np.int64)
    counts = np.diff(starts)
    ncell = counts.size
    d = vel.shape[1]
    v = vel[order]
    cell_of = np.repeat(np.arange(ncell), counts)
    mean = np.zeros((ncell, d))
    m2 = np.zeros((ncell, d, d))
    m3 = np.zeros((ncell, d))
    occupied = counts > 0
    safe = np.where(occupied, counts, 1).astype(float)
    for a in range(d):
        mean[:, a] = np.bincount(cell_of, v[:, a], ncell) / safe
    c = v - mean[cell_of]
    c2 = np.sum(c * c, axis=1)
    for a in range(d):
        for b in range(a, d):
            m2[:, a, b] = np.bincount(cell_of, c[:, a] * c[:, b], ncell) / safe
            m2[:, b, a] = m2[:, a, b]
        m3[:, a] = np.bincount(cell_of, c2 * c[:, a], ncell) / safe
    mean[~occupied] = np.nan
    m2[~occupied] = np.nan
    m3[~occupied] = np.nan
    return counts.astype(np.int64), mean, m2, m3


def bin_cells(positions, box, cells):
    """Stable ordering of monads by flat row-major cell index, with CSR offsets."""
    cells = np.asarray(cells, np.int64)
    idx = np.floor(positions / np.asarray(box, float) * cells).astype(np.int64)
    idx = np.clip(idx, 0, cells - 1)
    flat = np.zeros(positions.shape[0], np.int64)
    for a in range(positions.shape[1]):
        flat = flat * cells[a] + idx[:, a]
    ncell = int(np.prod(cells))
    order = np.argsort(flat, kind="stable")
    starts = np.zeros(ncell + 1, np.int64)
    np.cumsum(np.bincount(flat, minlength=ncell), out=starts[1:])
    return order, starts


def wrap_inplace(positions, box):
    """Map positions into [0, L) per axis, in place."""
    L = np.asarray(box, float)
    positions -= L * np.floor(positions / L)
    np.subtract(positions, L, out=positions, where=positions >= L)
    return positions
