"""``cm-lax`` command-line front end.

Exit codes: 0 success, 2 configuration error, 3 initial constraint
violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import serialize as ser
from .config import RunConfig, load, serialize, with_initial
from .errors import (
    CollisionError,
    ConfigError,
    ConstraintError,
    PoleError,
    QuadratureError,
    SingularMatrixError,
    StepError,
)
from .flows import ode_flow
from .ham import Kind, bracket_matrix, evaluate
from .phase import ParticleState, QuiverDatum, constraint_residual, from_particles, to_particles
from .specfun import Variant

EXIT_OK, EXIT_CONFIG, EXIT_CONSTRAINT, EXIT_NUMERICAL = 0, 2, 3, 4
# Residual above which quiver initial data is rejected as off-shell.
INITIAL_CONSTRAINT_TOLERANCE = 1e-8

NUMERICAL_ERRORS = (CollisionError, QuadratureError, StepError, PoleError, SingularMatrixError)


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _require_on_shell(d: QuiverDatum):
    res = constraint_residual(d)
    if res > INITIAL_CONSTRAINT_TOLERANCE:
        raise _Exit(EXIT_CONSTRAINT, f"initial datum violates the moment-map constraint: residual {res:.6g}")


def _to_quiver(obj):
    if isinstance(obj, QuiverDatum):
        return obj
    if obj.variant is Variant.ELLIPTIC:
        raise ConfigError("initial: the elliptic variant has no quiver chart")
    return from_particles(obj)


def _to_particle(obj):
    return to_particles(obj) if isinstance(obj, QuiverDatum) else obj


def _chart_for(hamiltonians, initial, where: str):
    kinds = {h.kind for h in hamiltonians}
    if Kind.TRACE in kinds and Kind.PARTICLE_H2 in kinds:
        raise ConfigError(f"{where}: trace and particle_h2 Hamiltonians live in different charts")
    if Kind.TRACE in kinds:
        return _to_quiver(initial)
    if Kind.PARTICLE_H2 in kinds:
        return _to_particle(initial)
    return initial


def _check_chart(obj, hamiltonians, where: str):
    for i, h in enumerate(hamiltonians):
        if h.kind is Kind.TRACE and not isinstance(obj, QuiverDatum):
            raise ConfigError(f"{where}[{i}]: trace Hamiltonians need the quiver chart")
        if h.kind is Kind.PARTICLE_H2 and not isinstance(obj, ParticleState):
            raise ConfigError(f"{where}[{i}]: particle_h2 needs the particle chart")


def _write(directory: Path, name: str, text: str):
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / name, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _out_dir(cfg: RunConfig, override) -> Path:
    return Path(override if override is not None else (cfg.output_directory or "."))


def _run_guarded(func):
    try:
        return func()
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstraintError as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


# --- simulate ---------------------------------------------------------------


def _simulate(cfg: RunConfig, out: Path, fmt: str) -> str:
    if isinstance(cfg.initial, QuiverDatum):
        _require_on_shell(cfg.initial)
    start = _chart_for([cfg.flow.hamiltonian], cfg.initial, "flow.hamiltonian")
    if isinstance(start, QuiverDatum) and not isinstance(cfg.initial, QuiverDatum):
        _require_on_shell(start)
    _check_chart(start, cfg.invariants, "invariants")
    if cfg.flow.method == "exact" and not isinstance(start, QuiverDatum):
        raise ConfigError("flow.method: the exact method needs the quiver chart")

    z_grid = cfg.z_grid if cfg.record_spectral else None
    traj = ode_flow(start, cfg.flow, cfg.invariants, z_grid)
    traj.metadata.update({"variant": cfg.variant.value, "seed": cfg.seed})

    if fmt == "csv":
        _write(out, "trajectory.csv", ser.trajectory_csv(traj))
        _write(out, "invariants.csv", ser.invariants_csv(traj))
        if z_grid is not None:
            _write(out, "spectral.csv", ser.spectral_csv(traj.spectral, traj.times))
    else:
        _write(out, "trajectory.json", ser.dumps(ser.trajectory_to_dict(traj)))
        inv = {"times": traj.times,
               "values": {k: ([float(x) for x in v] if k == "constraint_residual"
                              else [ser.complex_to_json(x) for x in v])
                          for k, v in traj.invariant_log.items()}}
        _write(out, "invariants.json", ser.dumps(inv))
        if z_grid is not None:
            _write(out, "spectral.json", ser.dumps({"times": traj.times, **ser.spectral_to_dict(traj.spectral)}))

    drift = max(traj.invariant_drift().values(), default=0.0)
    residual = (f"{traj.max_constraint_residual():.3e}"
                if "constraint_residual" in traj.invariant_log else "n/a")
    summary = f"t_final={traj.times[-1]:.6g} max_invariant_drift={drift:.3e} max_moment_residual={residual}"
    if z_grid is not None:
        summary += f" spectral_drift={traj.spectral_drift():.3e}"
    if traj.metadata.get("drifted"):
        summary += " drifted=true"
    return summary


def _simulate_one(path: str, out, fmt, subdir: bool) -> tuple[int, str]:
    result = {}

    def body():
        cfg = load(path)
        directory = _out_dir(cfg, out)
        if subdir:
            directory = directory / Path(path).stem
        result["summary"] = _simulate(cfg, directory, fmt or cfg.output_format)
        return EXIT_OK

    code = _run_guarded(body)
    return code, result.get("summary", "")


def _thread_cap() -> int:
    raw = os.environ.get("CM_LAX_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def cmd_simulate(paths, out=None, fmt=None, parallel: bool = False) -> int:
    paths = list(paths)
    subdir = len(paths) > 1
    if parallel and subdir:
        with ProcessPoolExecutor(max_workers=min(_thread_cap(), len(paths))) as pool:
            results = list(pool.map(_simulate_one, paths, [out] * len(paths), [fmt] * len(paths),
                                    [True] * len(paths)))
    else:
        results = [_simulate_one(p, out, fmt, subdir) for p in paths]
    for path, (code, summary) in zip(paths, results):
        if code == EXIT_OK:
            print(f"{path}: {summary}" if subdir else summary)
    return max(code for code, _ in results)


# --- convert ----------------------------------------------------------------


def cmd_convert(path: str, direction: str, out=None) -> int:
    def body():
        cfg = load(path)
        if direction == "quiver":
            if cfg.variant is Variant.ELLIPTIC:
                raise ConfigError("--to: the elliptic variant has no quiver chart")
            new = _to_quiver(cfg.initial)
        elif direction == "particle":
            new = _to_particle(cfg.initial)
        else:
            raise ConfigError(f"--to: unknown direction {direction!r}")
        directory = _out_dir(cfg, out)
        _write(directory, "converted.json", ser.dumps(serialize(with_initial(cfg, new))))
        print(f"converted to {direction}: {directory / 'converted.json'}")
        return EXIT_OK

    return _run_guarded(body)


# --- invariants -------------------------------------------------------------


def cmd_invariants(path: str, out=None, fmt=None) -> int:
    def body():
        cfg = load(path)
        hams = cfg.invariants or [cfg.flow.hamiltonian]
        obj = _chart_for(hams, cfg.initial, "invariants")
        _check_chart(obj, hams, "invariants")
        if isinstance(obj, QuiverDatum):
            res = constraint_residual(obj)
            if res > INITIAL_CONSTRAINT_TOLERANCE:
                print(f"warning: initial datum is off-shell (moment residual {res:.6g}); "
                      "evaluating in the chart anyway", file=sys.stderr)
        values = [evaluate(h, obj) for h in hams]
        m = len(hams)
        brackets = np.abs(bracket_matrix(hams, obj))
        labels = [h.label for h in hams]
        directory = _out_dir(cfg, out)
        if (fmt or cfg.output_format) == "csv":
            rows = [[lab, ser.fmt(v.real), ser.fmt(v.imag)] for lab, v in zip(labels, values)]
            _write(directory, "initial_invariants.csv", ser.write_csv(["hamiltonian", "value_re", "value_im"], rows))
            rows = [[lab] + [ser.fmt(x) for x in row] for lab, row in zip(labels, brackets)]
            _write(directory, "brackets.csv", ser.write_csv(["hamiltonian"] + labels, rows))
        else:
            _write(directory, "initial_invariants.json",
                   ser.dumps({lab: ser.complex_to_json(v) for lab, v in zip(labels, values)}))
            _write(directory, "brackets.json",
                   ser.dumps({"labels": labels, "magnitudes": brackets.tolist()}))
        print(f"hamiltonians={m} max_bracket={brackets.max(initial=0.0):.3e}")
        return EXIT_OK

    return _run_guarded(body)


# --- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cm-lax", description="Spin Calogero-Moser simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (default: config output.directory or .)")

    p = sub.add_parser("simulate", help="run the configured flow")
    p.add_argument("configs", nargs="+", metavar="config.json")
    common(p)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--parallel", action="store_true",
                   help="run several configs in parallel (capped by CM_LAX_THREADS)")

    p = sub.add_parser("convert", help="switch the initial data between particle and quiver form")
    p.add_argument("config", metavar="config.json")
    p.add_argument("--to", required=True, choices=("particle", "quiver"))
    common(p)

    p = sub.add_parser("invariants", help="Hamiltonians and Poisson brackets at the initial state")
    p.add_argument("config", metavar="config.json")
    common(p)
    p.add_argument("--format", choices=("csv", "json"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "simulate":
        return cmd_simulate(args.configs, args.out, args.format, args.parallel)
    if args.command == "convert":
        return cmd_convert(args.config, args.to, args.out)
    return cmd_invariants(args.config, args.out, args.format)


if __name__ == "__main__":
    sys.exit(main())
