"""JSON and CSV encodings.

Complex numbers are two-element arrays ``[re, im]``; matrices are row-major
nested arrays of those.  CSV files use a header row, ``,`` as separator,
``%.17g`` floats and LF line endings.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .ham import HamiltonianSpec
from .lax import SpectralRecord
from .phase import ParticleState, QuiverDatum
from .specfun import DEFAULT_TOLERANCE, DEFAULT_TRUNCATION, Lattice


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(obj, where: str = "value") -> complex:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return complex(obj)
    if (isinstance(obj, (list, tuple)) and len(obj) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in obj)):
        return complex(obj[0], obj[1])
    raise ValueError(f"{where}: expected a complex number [re, im], got {obj!r}")


def array_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return complex_to_json(a)
    return [array_to_json(x) for x in a]


def array_from_json(obj, ndim: int, where: str = "array") -> np.ndarray:
    if ndim == 0:
        return np.asarray(complex_from_json(obj, where))
    if not isinstance(obj, (list, tuple)):
        raise ValueError(f"{where}: expected a {ndim}-dimensional array")
    rows = [array_from_json(x, ndim - 1, f"{where}[{i}]") for i, x in enumerate(obj)]
    if ndim > 1 and len({r.shape for r in rows}) > 1:
        raise ValueError(f"{where}: ragged array")
    return np.array(rows, dtype=complex).reshape((len(rows),) + (rows[0].shape if rows else ()))


def lattice_to_dict(lattice: Lattice) -> dict:
    return {"tau": complex_to_json(lattice.tau), "truncation_radius": lattice.truncation_radius,
            "tolerance": lattice.tolerance}


def lattice_from_dict(d: dict) -> Lattice:
    return Lattice(complex_from_json(d["tau"], "lattice.tau"),
                   int(d.get("truncation_radius", DEFAULT_TRUNCATION)),
                   float(d.get("tolerance", DEFAULT_TOLERANCE)))


def datum_to_dict(d: QuiverDatum) -> dict:
    return {"variant": d.variant.value, "X": array_to_json(d.X), "Y": array_to_json(d.Y),
            "u": array_to_json(d.u), "v": array_to_json(d.v)}


def datum_from_dict(obj: dict, variant=None, where: str = "quiver") -> QuiverDatum:
    variant = obj.get("variant", variant)
    mats = {key: array_from_json(obj[key], 2, f"{where}.{key}") for key in ("X", "Y", "u", "v")}
    return QuiverDatum(variant, **mats)


def state_to_dict(s: ParticleState) -> dict:
    out = {"variant": s.variant.value, "q": array_to_json(s.q), "p": array_to_json(s.p),
           "a": array_to_json(s.a), "b": array_to_json(s.b)}
    if s.lattice is not None:
        out["lattice"] = lattice_to_dict(s.lattice)
    return out


def state_from_dict(obj: dict, variant=None, lattice=None, where: str = "particle") -> ParticleState:
    variant = obj.get("variant", variant)
    if "lattice" in obj:
        lattice = lattice_from_dict(obj["lattice"])
    return ParticleState(variant,
                         array_from_json(obj["q"], 1, f"{where}.q"),
                         array_from_json(obj["p"], 1, f"{where}.p"),
                         array_from_json(obj["a"], 2, f"{where}.a"),
                         array_from_json(obj["b"], 2, f"{where}.b"),
                         lattice)


def hamiltonian_to_dict(h: HamiltonianSpec) -> dict:
    out = {"kind": h.kind.value, "degree": h.degree}
    if h.pole is not None:
        out["pole"] = complex_to_json(h.pole)
    out["radius"] = h.radius
    out["samples"] = h.samples
    return out


def hamiltonian_from_dict(obj: dict) -> HamiltonianSpec:
    kw = {"kind": obj["kind"], "degree": int(obj.get("degree", 2))}
    if "pole" in obj:
        kw["pole"] = complex_from_json(obj["pole"], "pole")
    for key in ("radius", "samples"):
        if key in obj:
            kw[key] = obj[key]
    return HamiltonianSpec(**kw)


def spectral_to_dict(records) -> dict:
    return {"z_grid": array_to_json(records[0].z_grid) if records else [],
            "coeffs": [array_to_json(r.coeffs) for r in records]}


def spectral_record_from_dict(obj: dict) -> SpectralRecord:
    return SpectralRecord(array_from_json(obj["z_grid"], 1), array_from_json(obj["coeffs"], 2))


# --- CSV --------------------------------------------------------------------


def fmt(x: float) -> str:
    return "%.17g" % x


def _complex_columns(name: str) -> list[str]:
    return [f"{name}_re", f"{name}_im"]


def state_columns(obj) -> list[str]:
    """Column names of the flattened state, in :func:`state_row` order."""
    cols = []
    if isinstance(obj, QuiverDatum):
        for mname, m in (("X", obj.X), ("Y", obj.Y), ("u", obj.u), ("v", obj.v)):
            for a in range(m.shape[0]):
                for b in range(m.shape[1]):
                    cols += _complex_columns(f"{mname}_{a}_{b}")
        return cols
    for vname in ("q", "p"):
        for i in range(obj.n):
            cols += _complex_columns(f"{vname}_{i}")
    for mname in ("a", "b"):
        for i in range(obj.n):
            for al in range(obj.k):
                cols += _complex_columns(f"{mname}_{i}_{al}")
    return cols


def state_row(obj) -> list[complex]:
    if isinstance(obj, QuiverDatum):
        parts = [obj.X, obj.Y, obj.u, obj.v]
    else:
        parts = [obj.q, obj.p, obj.a, obj.b]
    return list(np.concatenate([np.asarray(p).ravel() for p in parts]))


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _flatten_complex(values) -> list[str]:
    out = []
    for z in values:
        z = complex(z)
        out += [fmt(z.real), fmt(z.imag)]
    return out


def trajectory_csv(traj) -> str:
    labels = [k for k in traj.invariant_log if k != "constraint_residual"]
    header = ["t"] + state_columns(traj.states[0])
    for lab in labels:
        header += _complex_columns(lab)
    has_res = "constraint_residual" in traj.invariant_log
    if has_res:
        header.append("constraint_residual")
    rows = []
    for idx, (t, st) in enumerate(zip(traj.times, traj.states)):
        row = [fmt(t)] + _flatten_complex(state_row(st))
        row += _flatten_complex(traj.invariant_log[lab][idx] for lab in labels)
        if has_res:
            row.append(fmt(traj.invariant_log["constraint_residual"][idx]))
        rows.append(row)
    return write_csv(header, rows)


def invariants_csv(traj) -> str:
    labels = [k for k in traj.invariant_log if k != "constraint_residual"]
    header = ["t"]
    for lab in labels:
        header += _complex_columns(lab)
    has_res = "constraint_residual" in traj.invariant_log
    if has_res:
        header.append("constraint_residual")
    rows = []
    for idx, t in enumerate(traj.times):
        row = [fmt(t)] + _flatten_complex(traj.invariant_log[lab][idx] for lab in labels)
        if has_res:
            row.append(fmt(traj.invariant_log["constraint_residual"][idx]))
        rows.append(row)
    return write_csv(header, rows)


def spectral_csv(records, times=None) -> str:
    """One row per (record, grid point): [t,] z_re, z_im, then coefficients (descending)."""
    if not records:
        return ""
    n1 = records[0].coeffs.shape[1]
    header = (["t"] if times is not None else []) + ["z_re", "z_im"]
    for d in range(n1):
        header += _complex_columns(f"c{d}")
    rows = []
    for r_idx, rec in enumerate(records):
        for z, c in zip(rec.z_grid, rec.coeffs):
            row = [fmt(times[r_idx])] if times is not None else []
            rows.append(row + [fmt(z.real), fmt(z.imag)] + _flatten_complex(c))
    return write_csv(header, rows)


def trajectory_to_dict(traj) -> dict:
    states = [datum_to_dict(s) if isinstance(s, QuiverDatum) else state_to_dict(s) for s in traj.states]
    return {"times": list(map(float, traj.times)), "states": states,
            "invariant_log": {k: ([float(x) for x in v] if k == "constraint_residual"
                                  else [complex_to_json(x) for x in v])
                              for k, v in traj.invariant_log.items()},
            "metadata": traj.metadata}


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"
