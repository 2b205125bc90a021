"""Time evolution: exact trace flows, the projection method, and RK4 Hamiltonian flows.

Exact flows.  The flow of (1/(i+1)) tr Y^(i+1) leaves Y fixed.

* rational: ``X -> X + t Y^i``; ``[X + t Y^i, Y] = [X, Y]`` so the moment map
  is unchanged.
* trigonometric: ``X -> X E``, ``u -> E^-1 u``, ``v -> v E`` with
  ``E = exp(t Y^i)``.  Since E commutes with Y,
  ``(XE)^-1 Y (XE) - Y = E^-1 (X^-1 Y X - Y) E`` and ``uv`` is conjugated by
  the same E, so the moment map is conjugated by E^-1 and ``Id`` stays fixed.
  The Hamiltonian (RK4) flow in the canonical trigonometric chart is
  ``X -> E X`` with u, v fixed; the two differ by the gauge transformation E.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import canonical
from .errors import CollisionError, StepError
from .ham import HamiltonianSpec, Kind, evaluate, gradient
from .lax import spectral_record
from .phase import COLLISION_TOLERANCE, ParticleState, QuiverDatum, constraint_residual
from .specfun import Variant

CONSTRAINT_TOLERANCE = 1e-7


@dataclass(frozen=True)
class FlowSpec:
    hamiltonian: HamiltonianSpec
    method: str = "rk4"
    t_final: float = 1.0
    dt: float = 1e-3
    record_every: int = 100
    drift_tolerance: float = 1e-6

    def __post_init__(self):
        method = str(self.method).lower()
        if method not in ("exact", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "method", method)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be a positive integer")
        object.__setattr__(self, "record_every", int(self.record_every))


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    invariant_log: dict = field(default_factory=dict)
    spectral: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def invariant_drift(self) -> dict:
        return {k: float(np.max(np.abs(np.asarray(v) - v[0]))) for k, v in self.invariant_log.items()
                if k != "constraint_residual" and len(v)}

    def spectral_drift(self) -> float:
        if not self.spectral:
            return 0.0
        ref = self.spectral[0].coeffs
        return float(max(np.max(np.abs(r.coeffs - ref)) for r in self.spectral))

    def max_constraint_residual(self) -> float:
        r = self.invariant_log.get("constraint_residual")
        return float(np.max(r)) if r else 0.0


# --- exact flows ------------------------------------------------------------


def exact_flow_rational(d: QuiverDatum, i: int, t: float) -> QuiverDatum:
    """Flow of (1/(i+1)) tr Y^(i+1): X -> X + t Y^i."""
    if d.variant is not Variant.RATIONAL:
        raise ValueError("exact_flow_rational needs a rational datum")
    return d.replace(X=d.X + t * np.linalg.matrix_power(d.Y, i))


def exact_flow_trig(d: QuiverDatum, i: int, t: float) -> QuiverDatum:
    """X -> X exp(t Y^i), u -> exp(-t Y^i) u, v -> v exp(t Y^i)."""
    if d.variant is not Variant.TRIGONOMETRIC:
        raise ValueError("exact_flow_trig needs a trigonometric datum")
    A = t * np.linalg.matrix_power(d.Y, i)
    E, Einv = expm(A), expm(-A)
    return d.replace(X=d.X @ E, u=Einv @ d.u, v=d.v @ E)


def exact_flow(d: QuiverDatum, i: int, t: float) -> QuiverDatum:
    if d.variant is Variant.RATIONAL:
        return exact_flow_rational(d, i, t)
    return exact_flow_trig(d, i, t)


def _sorted(vals: np.ndarray) -> np.ndarray:
    return vals[np.lexsort((vals.imag, vals.real))]


def _eigvals(X: np.ndarray) -> np.ndarray:
    # For 2x2 the trace/determinant formula keeps double roots exact, where
    # a general eigensolver loses half the digits at a Jordan block.
    if X.shape == (2, 2):
        tr = X[0, 0] + X[1, 1]
        det = X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0]
        root = np.sqrt(complex(tr * tr - 4 * det))
        return np.array([(tr - root) / 2, (tr + root) / 2])
    return np.linalg.eigvals(X)


def eigenvalue_projection(d: QuiverDatum, i: int, times) -> np.ndarray:
    """Sorted eigenvalues of X(t) under the exact flow, one row per time.

    Rows are multisets; collisions are allowed.
    """
    return np.array([_sorted(_eigvals(exact_flow(d, i, t).X)) for t in np.atleast_1d(times)])


# --- Hamiltonian ODE flows --------------------------------------------------


def velocity(spec: HamiltonianSpec, obj) -> np.ndarray:
    """Hamiltonian vector field (Q', P') = (dH/dP, -dH/dQ) in canonical coordinates."""
    dQ, dP = gradient(spec, obj)
    return canonical.pack(dP, -dQ)


def _rk4_step(spec, obj, x, dt):
    def f(y):
        return velocity(spec, canonical.from_canonical(obj, *canonical.unpack(y)))

    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _record(traj: Trajectory, t, obj, invariants, z_grid):
    traj.times.append(float(t))
    traj.states.append(obj)
    for h in invariants:
        traj.invariant_log.setdefault(h.label, []).append(evaluate(h, obj))
    if isinstance(obj, QuiverDatum):
        traj.invariant_log.setdefault("constraint_residual", []).append(constraint_residual(obj))
    if z_grid is not None:
        traj.spectral.append(spectral_record(obj, z_grid))


def _check_drift(traj: Trajectory, spec: FlowSpec):
    for label, drift in traj.invariant_drift().items():
        if drift > 10 * spec.drift_tolerance:
            raise StepError(f"invariant {label} drifted by {drift:.3g}")
    if traj.max_constraint_residual() > CONSTRAINT_TOLERANCE:
        traj.metadata["drifted"] = True


def _exact_trajectory(start, spec: FlowSpec, invariants, z_grid) -> Trajectory:
    h = spec.hamiltonian
    if h.kind is not Kind.TRACE or not isinstance(start, QuiverDatum):
        raise ValueError("the exact method needs a trace Hamiltonian on a quiver datum")
    traj = Trajectory(metadata={"method": "exact", "hamiltonian": h.label, "drifted": False})
    n_steps = max(1, int(round(spec.t_final / spec.dt))) if spec.t_final > 0 else 0
    steps = list(range(0, n_steps + 1, spec.record_every))
    if not steps or steps[-1] != n_steps:
        steps.append(n_steps)
    for s in steps:
        t = spec.t_final * s / n_steps if n_steps else 0.0
        _record(traj, t, exact_flow(start, h.degree - 1, t), invariants, z_grid)
    return traj


def ode_flow(start, spec: FlowSpec, invariants=(), z_grid=None) -> Trajectory:
    """Integrate Hamilton's equations (or the exact flow) and log invariants.

    Particle-chart runs raise CollisionError when positions come within the
    collision tolerance; quiver runs continue through collisions.
    """
    invariants = list(invariants)
    if spec.method == "exact":
        traj = _exact_trajectory(start, spec, invariants, z_grid)
        _check_drift(traj, spec)
        return traj

    traj = Trajectory(metadata={"method": "rk4", "hamiltonian": spec.hamiltonian.label,
                                "dt": spec.dt, "drifted": False})
    n_steps = int(round(spec.t_final / spec.dt))
    dt = spec.t_final / n_steps if n_steps else 0.0
    if isinstance(start, ParticleState):
        start.check_distinct()
        traj.metadata["min_separation"] = start.min_separation()
    obj = start
    x = canonical.pack(*canonical.to_canonical(start))
    _record(traj, 0.0, obj, invariants, z_grid)
    for step in range(1, n_steps + 1):
        x = _rk4_step(spec.hamiltonian, start, x, dt)
        if not np.all(np.isfinite(x)):
            raise StepError(f"state became non-finite at t={step * dt:.6g}")
        obj = canonical.from_canonical(start, *canonical.unpack(x))
        if isinstance(obj, ParticleState):
            sep = obj.min_separation()
            traj.metadata["min_separation"] = min(traj.metadata["min_separation"], sep)
            if sep <= COLLISION_TOLERANCE:
                raise CollisionError(f"particles collided at t={step * dt:.6g}")
        if step % spec.record_every == 0 or step == n_steps:
            _record(traj, step * dt, obj, invariants, z_grid)
    _check_drift(traj, spec)
    return traj


def spin_hierarchy_flow(start, i: int, spec: FlowSpec, invariants=(), z_grid=None) -> Trajectory:
    """RK4 flow of the zeta-shifted residue Hamiltonian (1/(i+1)) Res_0 tr(eta + zeta)^(i+1)."""
    h = spec.hamiltonian
    radius = h.radius if h.kind is Kind.RESIDUE_AT_B else None
    samples = h.samples if h.kind is Kind.RESIDUE_AT_B else None
    kw = {k: v for k, v in (("radius", radius), ("samples", samples)) if v is not None}
    res = HamiltonianSpec.residue_at_b(i, **kw)
    return ode_flow(start, FlowSpec(res, "rk4", spec.t_final, spec.dt, spec.record_every,
                                    spec.drift_tolerance), invariants, z_grid)
