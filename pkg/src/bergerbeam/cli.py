"""Command-line front end.

    bergerbeam <subcommand> [--config PATH] [--set key=value ...] --out DIR

Every run writes ``manifest.ini`` next to its results. Exit status is 0 on
success (a diverged trajectory is a result, not a failure), 1 for usage or
configuration errors and 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import energy_identity_residual
from .experiments import (
    BracketError, Continuation, SteadyStateError, detect_limit_cycle, find_ucrit, run_sweep, solve_steady_state,
)
from .integrator import NewtonFailure, StepSizeError, run
from .manifest import ConfigError, RunManifest, emit, parse_config
from .model import BlowUpError, node_values
from .verification import run_oracles

log = logging.getLogger("bergerbeam")

SUBCOMMANDS = ("simulate", "ucrit", "steady", "limit-cycle", "sweep", "verify")
TRAJECTORY_HEADER = ("t", "E", "E_nl", "Pi_B", "u_mid", "residual")
STEADY_HEADER = ("x", "u_star")
SWEEP_HEADER = ("axis_value", "final_E", "sigma", "classification", "cycle_amplitude", "cycle_period")
PROBE_HEADER = ("U", "sigma", "r2", "classification", "final_E", "status")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (NewtonFailure, StepSizeError, BlowUpError, SteadyStateError, BracketError,
                    np.linalg.LinAlgError, FloatingPointError)


def fmt(value) -> str:
    """Full-precision text for CSV cells."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, record: dict) -> None:
    path.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ subcommands

def _simulate(m: RunManifest, out: Path) -> dict:
    traj = run(m.beam, m.experiment.t_end, m.integrator, n_cells=m.n_cells, store_states=False)
    res = np.full(traj.t.size, math.nan)
    if traj.t.size >= 3:
        res[1:-1] = energy_identity_residual(traj)
    write_csv(out / "trajectory.csv", TRAJECTORY_HEADER,
              zip(traj.t, traj.E, traj.E_nl, traj.Pi_B, traj.u_mid, res))
    return {
        "status": traj.status, "exit_time": traj.exit_time, "samples": int(traj.t.size),
        "final_E": float(traj.E[-1]), "max_abs_residual": float(np.nanmax(np.abs(res))) if traj.t.size >= 3 else None,
        "steps_accepted": traj.stats.accepted, "steps_rejected": traj.stats.rejected,
    }


def _ucrit(m: RunManifest, out: Path) -> dict:
    e = m.experiment
    if m.beam.lambda_flag != 0:
        raise ConfigError("lambda_flag: ucrit needs the linear model (lambda_flag = 0)")
    rep = find_ucrit(m.beam, e.U_lo, e.U_hi, e.tol_U, e.horizon, int_cfg=m.probe_integrator(),
                     n_cells=m.n_cells, window=e.window, band=e.band, min_r2=e.min_r2)
    write_csv(out / "probes.csv", PROBE_HEADER,
              ((p.U, p.estimate.sigma, p.estimate.r2, p.estimate.classification, p.final_E, p.status)
               for p in rep.probes))
    return {"status": "ok", "U_crit": rep.U_crit, "bracket": rep.bracket, "brackets": rep.brackets,
            "horizon": rep.horizon, "tol_U": rep.tol_U, "band": rep.band, "min_r2": rep.min_r2,
            "probes": len(rep.probes)}


def _steady(m: RunManifest, out: Path) -> dict:
    e = m.experiment
    cont = None if e.continuation == "none" else Continuation(e.continuation, step=e.continuation_step,
                                                             min_step=e.continuation_step / 64)
    rep = solve_steady_state(m.beam, continuation=cont, tol=e.steady_tol, confirm=e.confirm,
                             confirm_horizon=e.confirm_horizon, perturbation=e.perturbation,
                             int_cfg=m.probe_integrator(), n_cells=m.n_cells)
    nodes = np.arange(m.n_cells + 1) * (m.beam.ell / m.n_cells)
    write_csv(out / "steady.csv", STEADY_HEADER, zip(nodes, node_values(rep.u_star.astype(float))))
    return {"status": "ok" if rep.converged else "not-converged", "converged": rep.converged,
            "residual_norm": rep.residual_norm, "residual_norm_float64": rep.residual_norm_float64,
            "newton_iterations": rep.newton_iterations, "energy": rep.energy, "stability": rep.stability,
            "amplitude": rep.amplitude, "path": [list(p) for p in rep.path]}


def _limit_cycle(m: RunManifest, out: Path) -> dict:
    e = m.experiment
    traj = run(m.beam, e.t_end, m.integrator, n_cells=m.n_cells, store_states=False)
    write_csv(out / "trajectory.csv", TRAJECTORY_HEADER,
              zip(traj.t, traj.E, traj.E_nl, traj.Pi_B, traj.u_mid, np.full(traj.t.size, math.nan)))
    rep = detect_limit_cycle(traj, e.tail_fraction, e.cycle_rel_tol, e.cycle_floor)
    return {"status": traj.status, "converged": rep.converged, "cycle_status": rep.status,
            "period": rep.period, "amplitude": rep.amplitude, "tail_window": rep.tail_window,
            "n_peaks": rep.n_peaks, "variation": rep.variation}


def _sweep(m: RunManifest, out: Path) -> dict:
    e = m.experiment
    table = run_sweep(m.beam, e.axis, e.values, e.outputs, horizon=e.t_end, int_cfg=m.integrator,
                      n_cells=m.n_cells, workers=e.workers, window=e.window, tail_fraction=e.tail_fraction)
    write_csv(out / "sweep.csv", SWEEP_HEADER,
              ((r.axis_value, r.final_E, r.sigma, r.classification, r.cycle_amplitude, r.cycle_period)
               for r in table.rows))
    errors = {fmt(r.axis_value): r.error for r in table.rows if r.error}
    return {"status": "ok", "axis": table.axis, "rows": len(table), "errors": errors}


def _verify(m: RunManifest, out: Path) -> dict:
    results = run_oracles()
    for r in results:
        print(r.line())
    return {"status": "ok" if all(r.passed for r in results) else "failed",
            "checks": [{"name": r.name, "value": r.value, "threshold": r.threshold, "passed": r.passed,
                        "detail": r.detail} for r in results]}


_HANDLERS = {"simulate": _simulate, "ucrit": _ucrit, "steady": _steady, "limit-cycle": _limit_cycle,
             "sweep": _sweep, "verify": _verify}
_REPORT_NAMES = {"simulate": "simulate.json", "ucrit": "ucrit.json", "steady": "steady.json",
                 "limit-cycle": "limit_cycle.json", "sweep": "sweep.json", "verify": "verify.json"}


def run_command(subcommand: str, manifest: RunManifest, out: str | Path) -> int:
    """Run one subcommand, write its files under ``out`` and return the exit status."""
    if subcommand not in _HANDLERS:
        raise ConfigError(f"subcommand: expected one of {SUBCOMMANDS}, got {subcommand!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.ini").write_text(emit(manifest))
    report_path = out / _REPORT_NAMES[subcommand]
    try:
        report = _HANDLERS[subcommand](manifest, out)
    except NUMERICAL_ERRORS as exc:
        write_json(report_path, {"status": "error", "error": f"{type(exc).__name__}: {exc}",
                                 "checksum": manifest.checksum})
        log.error("%s failed: %s", subcommand, exc)
        return EXIT_NUMERICAL
    report.update(subcommand=subcommand, checksum=manifest.checksum, version=manifest.version)
    write_json(report_path, report)
    if report.get("status") in ("failed", "not-converged"):
        return EXIT_NUMERICAL
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bergerbeam", description="Berger beam flutter simulations.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="INI file with [beam] [mesh] [integrator] [experiment]")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one key; repeatable")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = parse_config(args.config, args.overrides)
        return run_command(args.subcommand, manifest, args.out)
    except ConfigError as exc:
        print(f"bergerbeam: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
