"""Compiled kinetics core vs the numpy fallback.

    python3 benchmarks/bench_kinetics.py [--monads 10000 100000] [--repeat 5]

Times each kernel (binning, collisions, moment deposit) and a full
stream+collide step for both backends and prints the speed-up.  Results
must agree: velocities after a collision sweep are compared too.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qhdlab.kinetics import _backend, collide, maxwellian, stream_and_force
from qhdlab.kinetics.ensemble import ForceField, cell_layout


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench(n: int, repeat: int, cell_size: float = 0.1):
    base = maxwellian(n, (1.0, 1.0, 1.0), 1.0, seed=1)
    cells = cell_layout(base.box, cell_size)
    rows = []
    agree = None
    outs = {}
    for name in _backend.available():
        core = _backend.get(name)
        order, starts = core.bin_cells(base.positions, np.asarray(base.box), np.asarray(cells))

        def do_bin():
            core.bin_cells(base.positions, np.asarray(base.box), np.asarray(cells))

        def do_collide():
            v = base.velocities.copy()
            core.collide_cells(v, order, starts, 3, 0, 0.5, _backend.threads())

        def do_moments():
            core.deposit_moments(base.velocities, order, starts, _backend.threads())

        def do_step():
            ens = base.copy()
            stream_and_force(ens, ForceField.none(), 1e-3, backend=name)
            collide(ens, cell_size, 100.0, 1e-3, backend=name)

        timing = {k: best_of(f, repeat) for k, f in
                  (("bin", do_bin), ("collide", do_collide), ("moments", do_moments),
                   ("step", do_step))}
        rows.append((name, timing))
        ens = base.copy()
        collide(ens, cell_size, 100.0, 0.005, backend=name)
        outs[name] = ens.velocities
    if len(outs) == 2:
        agree = float(np.max(np.abs(outs["python"] - outs["compiled"])))
    return rows, agree


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--monads", type=int, nargs="+", default=[10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"backends: {', '.join(_backend.available())}   QHD_THREADS={_backend.threads()}")
    for n in args.monads:
        rows, agree = bench(n, args.repeat)
        print(f"\nN = {n}")
        print(f"  {'backend':<10s}" + "".join(f"{k:>12s}" for k in ("bin", "collide", "moments", "step")))
        for name, t in rows:
            print(f"  {name:<10s}" + "".join(f"{1e3 * t[k]:10.3f}ms" for k in t))
        if len(rows) == 2:
            py, cc = rows[0][1], rows[1][1]
            print(f"  {'speed-up':<10s}" + "".join(f"{py[k] / cc[k]:11.1f}x" for k in py))
            print(f"  max |v_python - v_compiled| after one sweep: {agree:.2e}")


if __name__ == "__main__":
    main()
