"""Command line: ``qhdlab run <config>``, ``qhdlab check``, ``qhdlab convert``.

Exit codes: 0 success, 1 failed check, 2 validation error, 3 numerical
failure.  Errors also go to stderr as one JSON line.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import NodeFormation, NumericalError, QHDError, ValidationError
from .fields import to_madelung
from .madelung import evolve_madelung
from .observables import ConstitutiveParams, DiagnosticsRecord, energy_report
from .schrodinger import evolve, ground_state
from .snapshot import (
    moments_to_csv, provenance_lines, save_ensemble, save_state, snapshot_to_csv, write_csv,
    write_plot_data,
)

log = logging.getLogger("qhdlab")

EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


class Outputs:
    """Writes every artifact of one run into the output directory."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dir = cfg.output.directory
        self.formats = cfg.output.formats
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        return self.dir / f"{self.cfg.output.prefix}{name}"

    def comments(self, **extra) -> list[str]:
        return provenance_lines(self.cfg.text, __version__,
                                {"engine": self.cfg.engine, "seed": self.cfg.seed, **extra})

    def open(self):
        self.dir.mkdir(parents=True, exist_ok=True)

    def diagnostics(self, name: str, records: list[DiagnosticsRecord], n_particles: int, **extra):
        if "csv" in self.formats:
            rows = [r.csv_row() for r in records]
            self.written.append(write_csv(self.path(f"{name}.csv"),
                                          DiagnosticsRecord.csv_header(n_particles), rows,
                                          self.comments(**extra)))

    def table(self, name: str, header, rows, **extra):
        if "csv" in self.formats:
            self.written.append(write_csv(self.path(f"{name}.csv"), header, rows,
                                          self.comments(**extra)))

    def state(self, name: str, state):
        if "qhd1" in self.formats:
            self.written.append(save_state(self.path(f"{name}.qhd"), state))
        if "plot" in self.formats and state.grid.rank in (1, 2):
            if hasattr(state, "values"):
                cols = {"rho": state.density, "re": state.values.real, "im": state.values.imag}
            else:
                cols = {"rho": np.asarray(state.rho), "S": np.asarray(state.phase)}
            self.written.append(write_plot_data(self.path(f"{name}.dat"), state.grid, cols,
                                                self.comments()))


def _run_schrodinger(cfg: ExperimentConfig, out: Outputs) -> dict:
    final, records = evolve(cfg.initial, cfg.potential, cfg.evolve)
    out.open()
    out.diagnostics("schrodinger", records, cfg.grid.n_particles)
    out.state("schrodinger_final", final)
    drift = max(abs(r.H_eq40 - records[0].H_eq40) for r in records) / abs(records[0].H_eq40)
    return {"records": len(records), "energy_drift": drift}


def _madelung(cfg: ExperimentConfig):
    pair = to_madelung(cfg.initial)
    params = ConstitutiveParams.quantum(cfg.hbar, cfg.mass, cfg.nonlinear)
    return evolve_madelung(pair, cfg.potential, params, cfg.evolve, hbar=cfg.hbar, mass=cfg.mass,
                           dealias=cfg.run["dealias"], spectral_filter=cfg.run["filter"],
                           keep_series=True)


def _run_madelung(cfg: ExperimentConfig, out: Outputs) -> dict:
    try:
        final, records, _ = _madelung(cfg)
    except NodeFormation as exc:
        # keep what was computed before the node appeared
        out.open()
        out.diagnostics("madelung", exc.records or [], cfg.grid.n_particles, status="node-formation")
        if exc.state is not None:
            out.state("madelung_partial", exc.state)
        raise
    out.open()
    out.diagnostics("madelung", records, cfg.grid.n_particles)
    out.state("madelung_final", final)
    return {"records": len(records)}


def _run_compare(cfg: ExperimentConfig, out: Outputs) -> dict:
    psi_final, psi_records, psi_series = evolve(cfg.initial, cfg.potential, cfg.evolve,
                                                keep_series=True)
    pair_final, pair_records, pair_series = _madelung(cfg)
    grid = cfg.grid
    every = cfg.evolve.record_every
    rows = []
    for i, (psi, pair) in enumerate(zip(psi_series, pair_series)):
        d = float(np.sqrt(grid.integrate((psi.density - np.asarray(pair.rho)) ** 2)))
        rows.append([i * every, i * every * cfg.evolve.dt, d])
    max_dist = max(r[2] for r in rows)
    out.open()
    out.diagnostics("schrodinger", psi_records, grid.n_particles)
    out.diagnostics("madelung", pair_records, grid.n_particles)
    out.table("compare", ["step", "time", "l2_rho_distance"], rows,
              max_l2_rho_distance=repr(max_dist))
    out.state("schrodinger_final", psi_final)
    out.state("madelung_final", pair_final)
    return {"max_l2_rho_distance": max_dist}


def _run_groundstate(cfg: ExperimentConfig, out: Outputs) -> dict:
    every = cfg.evolve.record_every
    params = ConstitutiveParams.quantum(cfg.hbar, cfg.mass, cfg.nonlinear)
    V = cfg.potential.sample(cfg.grid)

    def report(n, state):
        rec = energy_report(state, V, params, step=n, time=n * cfg.evolve.dt)
        # relaxation minimizes the full energy, nonlinear part included
        rec.H_total += rec.H_nl
        rec.H_eq40 += rec.H_nl
        return rec

    records = [report(0, cfg.initial)]
    last = [0]

    def on_step(n, state, E):
        last[0] = n
        if n % every == 0:
            records.append(report(n, state))

    state, E = ground_state(cfg.potential, cfg.evolve, cfg.initial, tol_E=cfg.run["tol"],
                            atol_E=cfg.run["atol"], on_step=on_step)
    if records[-1].step != last[0]:
        records.append(report(last[0], state))
    out.open()
    out.diagnostics("groundstate", records, cfg.grid.n_particles, energy=repr(E))
    out.state("groundstate", state)
    result = {"energy": E, "steps": last[0]}
    if cfg.analytic_energy is not None:
        result["analytic"] = cfg.analytic_energy
        result["relative_error"] = abs(E - cfg.analytic_energy) / cfg.analytic_energy
    return result


def _run_kinetics(cfg: ExperimentConfig, out: Outputs) -> dict:
    from .kinetics import (
        ForceField, KineticsConfig, anisotropic, maxwellian, moment_residuals, run_kinetics,
        sound_wave, two_temperature,
    )

    k = cfg.kinetics
    n, box, mu, T, seed = k["monads"], k["box"], k["mu"], k["temperature"], cfg.seed
    if k["initial"] == "maxwellian":
        ens = maxwellian(n, box, T, mu, k["drift"], seed)
    elif k["initial"] == "sound-wave":
        ens = sound_wave(n, box, T, k["amplitude"], k["mode"], mu, seed=seed)
    elif k["initial"] == "two-temperature":
        ens = two_temperature(n, box, k["temperatures"][:2], mu=mu, seed=seed)
    else:
        ens = anisotropic(n, box, k["temperatures"], mu, seed)
    if k["force"] == "harmonic":
        force = ForceField.harmonic(k["stiffness"], k["center"])
    elif k["force"] == "uniform":
        force = ForceField.uniform(k["g"])
    else:
        force = ForceField.none()
    kcfg = KineticsConfig(dt=cfg.run["dt"], steps=cfg.run["steps"], cell_size=k["cell_size"],
                          collision_rate=k["collision_rate"], moment_cells=k["moment_cells"],
                          record_every=cfg.run["record_every"], min_count=k["min_count"])
    run = run_kinetics(ens, kcfg, force)
    d = ens.dim
    header = (["step", "time"] + [f"P_{a}" for a in range(d)] + ["E_kin"])
    rows = [[s, t] + list(map(float, p)) + [e] for s, t, p, e in run.totals]
    result = {"monads": ens.n}
    out.open()
    out.table("kinetics", header, rows)
    if run.collisions:
        crows = [[c.step, c.candidates, c.accepted, c.d_count, *map(float, c.d_momentum),
                  c.d_energy, c.max_event_dp, c.max_event_de] for c in run.collisions]
        out.table("collisions", ["step", "candidates", "accepted", "d_count"]
                  + [f"d_P_{a}" for a in range(d)] + ["d_E", "max_event_dp", "max_event_de"], crows)
    if run.moments:
        if "csv" in out.formats:
            out.written.append(moments_to_csv(out.path("moments_final.csv"),
                                              run.moments[-1].full, out.comments()))
        if len(run.moments) >= 3:
            rep = moment_residuals(run.moments, kcfg.dt * kcfg.record_every)
            out.table("moment_residuals", ["equation", "residual", "noise_floor", "ratio"],
                      [[name, e.residual, e.noise_floor, e.ratio]
                       for name, e in rep.equations.items()])
            result["worst_ratio"] = rep.worst_ratio()
    if "mon1" in out.formats:
        out.written.append(save_ensemble(out.path("ensemble_final.mon"), ens))
    return result


def _run_check_engine(cfg: ExperimentConfig, out: Outputs) -> dict:
    from .check import run_checks

    report = run_checks()
    out.open()
    out.table("check", ["name", "passed", "measured", "tolerance"],
              [[r.name, int(r.passed), r.measured, r.tolerance] for r in report.results])
    for line in report.lines():
        print(line)
    return {"checks": len(report.results), "passed": report.passed}


ENGINE_RUNNERS = {
    "schrodinger": _run_schrodinger,
    "madelung": _run_madelung,
    "compare": _run_compare,
    "groundstate": _run_groundstate,
    "kinetics": _run_kinetics,
    "check": _run_check_engine,
}


def run_experiment(config, output: Path | None = None) -> dict:
    cfg = load_config(config, output_override=output)
    out = Outputs(cfg)
    result = ENGINE_RUNNERS[cfg.engine](cfg, out)
    result["outputs"] = [str(p) for p in out.written]
    return result


def _error(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit": code}
    step = getattr(exc, "step", None)
    if step is not None:
        payload["step"] = step
    print(json.dumps(payload), file=sys.stderr)
    return code


def _cmd_run(args) -> int:
    try:
        result = run_experiment(args.config, Path(args.output) if args.output else None)
    except ValidationError as exc:
        return _error(exc, EXIT_INVALID)
    except NumericalError as exc:
        return _error(exc, EXIT_NUMERICAL)
    except QHDError as exc:
        return _error(exc, EXIT_INVALID)
    for key, val in result.items():
        if key == "outputs":
            for p in val:
                print(f"wrote {p}")
        else:
            print(f"{key} {val!r}")
    return EXIT_CHECK if result.get("passed") is False else EXIT_OK


def _cmd_check(args) -> int:
    from .check import run_checks

    report = run_checks(include_kinetics=not args.quick, include_dynamics=not args.quick)
    for line in report.lines():
        print(line)
    print("all checks passed" if report.passed else "some checks FAILED")
    return EXIT_OK if report.passed else EXIT_CHECK


def _cmd_convert(args) -> int:
    if args.to != "csv":
        return _error(ValidationError(f"unsupported target format {args.to!r}"), EXIT_INVALID)
    src = Path(args.snapshot)
    dst = Path(args.output) if args.output else src.with_suffix(".csv")
    try:
        if not src.is_file():
            raise ValidationError(f"snapshot {str(src)!r} does not exist")
        snapshot_to_csv(src, dst)
    except QHDError as exc:
        return _error(exc, EXIT_INVALID)
    print(f"wrote {dst}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qhdlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qhdlab {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="INI file, or the name of a bundled config")
    r.add_argument("--output", help="override [output] directory")
    r.set_defaults(func=_cmd_run)
    c = sub.add_parser("check", help="run the verification battery")
    c.add_argument("--quick", action="store_true", help="skip the dynamics and kinetics items")
    c.set_defaults(func=_cmd_check)
    v = sub.add_parser("convert", help="convert a QHD1/MON1 snapshot")
    v.add_argument("snapshot")
    v.add_argument("--to", required=True, choices=["csv"])
    v.add_argument("--output", help="destination (default: snapshot with .csv suffix)")
    v.set_defaults(func=_cmd_convert)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
