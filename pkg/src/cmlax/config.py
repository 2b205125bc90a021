"""Run configuration: parsing, validation and canonical re-serialization.

``serialize(parse(obj))`` reproduces ``obj``: optional keys absent from the
input are remembered as absent and are not emitted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .flows import FlowSpec
from .ham import HamiltonianSpec, Kind
from .phase import ParticleState, QuiverDatum
from .serialize import (
    array_to_json,
    complex_from_json,
    datum_from_dict,
    datum_to_dict,
    hamiltonian_from_dict,
    hamiltonian_to_dict,
    lattice_from_dict,
    lattice_to_dict,
    state_from_dict,
    state_to_dict,
)
from .specfun import POLE_TOLERANCE, Lattice, Variant, singular_distance

FORMATS = ("csv", "json")
TOP_KEYS = {"variant", "lattice", "n", "k", "initial", "flow", "invariants", "spectral", "output", "seed"}


@dataclass
class RunConfig:
    variant: Variant
    n: int
    k: int
    initial: QuiverDatum | ParticleState
    flow: FlowSpec
    lattice: Lattice | None = None
    invariants: list = field(default_factory=list)
    z_grid: np.ndarray | None = None
    record_spectral: bool = False
    output_directory: str | None = None
    output_format: str = "csv"
    seed: int | None = None
    # key tree of the parsed document; None means "emit every field"
    shape: dict | None = None


def _keys(obj):
    if isinstance(obj, dict):
        return {k: _keys(v) for k, v in obj.items()}
    if isinstance(obj, list) and obj and all(isinstance(x, dict) for x in obj):
        return [_keys(x) for x in obj]
    return True


def _prune(out, shape):
    if shape is True or shape is None:
        return out
    if isinstance(shape, list):
        return [_prune(o, s) for o, s in zip(out, shape)]
    return {k: _prune(v, shape[k]) for k, v in out.items() if k in shape}


def _fail(where: str, msg: str):
    raise ConfigError(f"{where}: {msg}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        _fail(f"{where}{key}", "missing required field")
    return obj[key]


def _dict(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        _fail(where, "expected an object")
    return obj


def _posint(obj, where: str) -> int:
    if not isinstance(obj, int) or isinstance(obj, bool) or obj < 1:
        _fail(where, f"expected a positive integer, got {obj!r}")
    return obj


def _number(obj, where: str) -> float:
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        _fail(where, f"expected a number, got {obj!r}")
    return float(obj)


def _unknown(obj: dict, allowed, where: str):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        _fail(f"{where}{extra[0]}", "unknown field")


def _complex(obj, where: str) -> complex:
    if not (isinstance(obj, list) and len(obj) == 2):
        _fail(where, f"expected a complex number [re, im], got {obj!r}")
    try:
        return complex_from_json(obj, where)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _hamiltonian(obj, where: str) -> HamiltonianSpec:
    obj = _dict(obj, where)
    _unknown(obj, {"kind", "degree", "pole", "radius", "samples"}, f"{where}.")
    kind = _require(obj, "kind", f"{where}.")
    if kind not in {k.value for k in Kind}:
        _fail(f"{where}.kind", f"unknown Hamiltonian kind {kind!r}")
    if "degree" in obj:
        _posint(obj["degree"], f"{where}.degree")
    if "pole" in obj:
        _complex(obj["pole"], f"{where}.pole")
    if "radius" in obj and not _number(obj["radius"], f"{where}.radius") > 0:
        _fail(f"{where}.radius", "must be positive")
    if "samples" in obj:
        _posint(obj["samples"], f"{where}.samples")
    try:
        return hamiltonian_from_dict(obj)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse(obj) -> RunConfig:
    """Validate a decoded JSON document and build a RunConfig (ConfigError on failure)."""
    obj = _dict(obj, "config")
    _unknown(obj, TOP_KEYS, "")
    try:
        variant = Variant.parse(_require(obj, "variant", ""))
    except ValueError:
        _fail("variant", f"unknown variant {obj['variant']!r}")
    n = _posint(_require(obj, "n", ""), "n")
    k = _posint(_require(obj, "k", ""), "k")

    lattice = None
    if "lattice" in obj:
        lat = _dict(obj["lattice"], "lattice")
        _unknown(lat, {"tau", "truncation_radius", "tolerance"}, "lattice.")
        _complex(_require(lat, "tau", "lattice."), "lattice.tau")
        try:
            lattice = lattice_from_dict(lat)
        except (ValueError, TypeError) as exc:
            _fail("lattice", str(exc))
    if variant is Variant.ELLIPTIC and lattice is None:
        _fail("lattice", "the elliptic variant needs a lattice")

    initial_obj = _dict(_require(obj, "initial", ""), "initial")
    forms = [key for key in ("particle", "quiver") if key in initial_obj]
    _unknown(initial_obj, {"particle", "quiver"}, "initial.")
    if len(forms) != 1:
        _fail("initial", "exactly one of 'particle' or 'quiver' must be given")
    form = forms[0]
    body = _dict(initial_obj[form], f"initial.{form}")
    if "variant" in body and body["variant"] != variant.value:
        _fail(f"initial.{form}.variant", "disagrees with the top-level variant")
    try:
        if form == "quiver":
            if variant is Variant.ELLIPTIC:
                _fail("initial.quiver", "the elliptic variant has no quiver chart")
            _unknown(body, {"variant", "X", "Y", "u", "v"}, "initial.quiver.")
            for key in ("X", "Y", "u", "v"):
                _require(body, key, "initial.quiver.")
            initial = datum_from_dict(body, variant, "initial.quiver")
            if initial.n != n or initial.k != k:
                _fail("initial.quiver", f"shape is n={initial.n}, k={initial.k}; expected n={n}, k={k}")
        else:
            _unknown(body, {"variant", "q", "p", "a", "b", "lattice"}, "initial.particle.")
            for key in ("q", "p", "a", "b"):
                _require(body, key, "initial.particle.")
            initial = state_from_dict(body, variant, lattice, "initial.particle")
            if initial.n != n or initial.k != k:
                _fail("initial.particle", f"shape is n={initial.n}, k={initial.k}; expected n={n}, k={k}")
    except ConfigError:
        raise
    except Exception as exc:  # shape or type errors from the array decoders
        _fail(f"initial.{form}", str(exc))

    flow_obj = _dict(_require(obj, "flow", ""), "flow")
    _unknown(flow_obj, {"hamiltonian", "method", "t_final", "dt", "record_every", "drift_tolerance"}, "flow.")
    ham = _hamiltonian(_require(flow_obj, "hamiltonian", "flow."), "flow.hamiltonian")
    kw = {}
    if "method" in flow_obj:
        if flow_obj["method"] not in ("exact", "rk4"):
            _fail("flow.method", f"expected 'exact' or 'rk4', got {flow_obj['method']!r}")
        kw["method"] = flow_obj["method"]
    for key in ("t_final", "dt", "drift_tolerance"):
        if key in flow_obj:
            kw[key] = _number(flow_obj[key], f"flow.{key}")
    if "dt" in kw and not kw["dt"] > 0:
        _fail("flow.dt", "must be positive")
    if "t_final" in kw and kw["t_final"] < 0:
        _fail("flow.t_final", "must be non-negative")
    if "record_every" in flow_obj:
        kw["record_every"] = _posint(flow_obj["record_every"], "flow.record_every")
    flow = FlowSpec(ham, **kw)
    if ham.kind is Kind.TRACE and variant is Variant.ELLIPTIC:
        _fail("flow.hamiltonian.kind", "trace Hamiltonians need a quiver chart")
    if ham.kind is Kind.PARTICLE_H2 and ham.degree != 2:
        _fail("flow.hamiltonian.degree", "particle_h2 has degree 2")
    if flow.method == "exact" and ham.kind is not Kind.TRACE:
        _fail("flow.method", "the exact method needs a trace Hamiltonian")

    invariants = []
    if "invariants" in obj:
        if not isinstance(obj["invariants"], list):
            _fail("invariants", "expected a list")
        invariants = [_hamiltonian(h, f"invariants[{i}]") for i, h in enumerate(obj["invariants"])]
        for i, h in enumerate(invariants):
            if h.kind is Kind.TRACE and variant is Variant.ELLIPTIC:
                _fail(f"invariants[{i}].kind", "trace Hamiltonians need a quiver chart")

    z_grid, record = None, False
    if "spectral" in obj:
        sp = _dict(obj["spectral"], "spectral")
        _unknown(sp, {"z_grid", "record"}, "spectral.")
        grid = _require(sp, "z_grid", "spectral.")
        if not isinstance(grid, list):
            _fail("spectral.z_grid", "expected a list of [re, im] pairs")
        z_grid = np.array([_complex(z, f"spectral.z_grid[{i}]") for i, z in enumerate(grid)], dtype=complex)
        dist = singular_distance(z_grid, variant, lattice)
        for i, d in enumerate(np.atleast_1d(dist)):
            if d < POLE_TOLERANCE:
                _fail(f"spectral.z_grid[{i}]", "lies on a pole of the Higgs field")
        record = sp.get("record", True)
        if not isinstance(record, bool):
            _fail("spectral.record", "expected true or false")

    directory, fmt = None, "csv"
    if "output" in obj:
        out = _dict(obj["output"], "output")
        _unknown(out, {"directory", "format"}, "output.")
        if "directory" in out:
            if not isinstance(out["directory"], str):
                _fail("output.directory", "expected a string")
            directory = out["directory"]
        if "format" in out:
            if out["format"] not in FORMATS:
                _fail("output.format", f"expected one of {FORMATS}")
            fmt = out["format"]

    seed = None
    if "seed" in obj:
        if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
            _fail("seed", "expected an integer")
        seed = obj["seed"]

    return RunConfig(variant, n, k, initial, flow, lattice, invariants, z_grid, record,
                     directory, fmt, seed, shape=_keys(obj))


def serialize(cfg: RunConfig) -> dict:
    """Inverse of :func:`parse`, as a JSON-ready dict."""
    init_key = "quiver" if isinstance(cfg.initial, QuiverDatum) else "particle"
    body = datum_to_dict(cfg.initial) if init_key == "quiver" else state_to_dict(cfg.initial)
    f = cfg.flow
    out = {"variant": cfg.variant.value}
    if cfg.lattice is not None:
        out["lattice"] = lattice_to_dict(cfg.lattice)
    out.update({"n": cfg.n, "k": cfg.k, "initial": {init_key: body},
                "flow": {"hamiltonian": hamiltonian_to_dict(f.hamiltonian), "method": f.method,
                         "t_final": f.t_final, "dt": f.dt, "record_every": f.record_every,
                         "drift_tolerance": f.drift_tolerance},
                "invariants": [hamiltonian_to_dict(h) for h in cfg.invariants]})
    if cfg.z_grid is not None:
        out["spectral"] = {"z_grid": array_to_json(cfg.z_grid), "record": cfg.record_spectral}
    out["output"] = {"directory": cfg.output_directory if cfg.output_directory is not None else ".",
                     "format": cfg.output_format}
    if cfg.seed is not None:
        out["seed"] = cfg.seed
    return _prune(out, cfg.shape)


def with_initial(cfg: RunConfig, initial) -> RunConfig:
    """Copy of ``cfg`` with new initial data (the key tree is updated to match)."""
    shape = None
    if cfg.shape is not None:
        shape = dict(cfg.shape)
        key = "quiver" if isinstance(initial, QuiverDatum) else "particle"
        body = datum_to_dict(initial) if key == "quiver" else state_to_dict(initial)
        # variant and lattice are already given at top level
        shape["initial"] = {key: {k: True for k in body if k not in ("variant", "lattice")}}
    return RunConfig(cfg.variant, cfg.n, cfg.k, initial, cfg.flow, cfg.lattice, cfg.invariants,
                     cfg.z_grid, cfg.record_spectral, cfg.output_directory, cfg.output_format,
                     cfg.seed, shape)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    return parse(obj)
