"""Hamiltonians: trace, particle, residue (spin and framed) forms, and Poisson brackets."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import canonical
from .errors import QuadratureError, StepError
from .lax import PARTICLE_TRIG_CONVENTION, higgs, higgs_function, higgs_values, vectorized
from .phase import ParticleState, QuiverDatum
from .specfun import DEFAULT_TRIG_CONVENTION, Variant, potential, potential_pair, zeta_w

# Sign of the pair potential in particle_h2, fixed by the n = 2 rational
# oracle: (1/2) tr Y^2 = 1/2 sum p^2 - sum_{i<j} f_ij f_ji / (q_i - q_j)^2.
POTENTIAL_SIGN = -1.0

DEFAULT_RADIUS = 0.1
DEFAULT_SAMPLES = 64
# Central differences with one Richardson level are O(h^4) accurate, so a
# coarse step keeps round-off (which grows like eps/h) out of the gradients.
FD_STEP = 1e-3


class Kind(str, enum.Enum):
    TRACE = "trace"
    RESIDUE_AT_B = "residue_at_b"
    RESIDUE_AT = "residue_at"
    PARTICLE_H2 = "particle_h2"


@dataclass(frozen=True)
class HamiltonianSpec:
    kind: Kind
    degree: int = 2
    pole: complex | None = None
    radius: float = DEFAULT_RADIUS
    samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.degree) < 1:
            raise ValueError("degree must be a positive integer")
        object.__setattr__(self, "degree", int(self.degree))
        if self.kind is Kind.RESIDUE_AT and self.pole is None:
            raise ValueError("residue_at requires a pole location")
        if self.pole is not None:
            object.__setattr__(self, "pole", complex(self.pole))

    @classmethod
    def trace(cls, i: int) -> "HamiltonianSpec":
        return cls(Kind.TRACE, i)

    @classmethod
    def residue_at_b(cls, i: int, **kw) -> "HamiltonianSpec":
        return cls(Kind.RESIDUE_AT_B, i, **kw)

    @classmethod
    def residue_at(cls, pole: complex, i: int, **kw) -> "HamiltonianSpec":
        return cls(Kind.RESIDUE_AT, i, pole=pole, **kw)

    @classmethod
    def particle_h2(cls) -> "HamiltonianSpec":
        return cls(Kind.PARTICLE_H2, 2)

    @property
    def label(self) -> str:
        if self.kind is Kind.PARTICLE_H2:
            return "H2_particle"
        if self.kind is Kind.RESIDUE_AT:
            return f"res_{self.degree}@({self.pole.real:g},{self.pole.imag:g})"
        return f"{self.kind.value}_{self.degree}"


def trace_hamiltonian(d: QuiverDatum, i: int) -> complex:
    """(1/i) tr Y^i."""
    return complex(np.trace(np.linalg.matrix_power(d.Y, i)) / i)


def particle_h2(s: ParticleState) -> complex:
    """1/2 sum p_i^2 + POTENTIAL_SIGN * sum_{i<j} f_ij f_ji U(q_i - q_j)."""
    s.check_distinct()
    val = 0.5 * np.sum(s.p**2)
    if s.n > 1:
        i, j = np.triu_indices(s.n, 1)
        F = s.f
        U = potential(s.q[i] - s.q[j], s.variant, s.lattice)
        val = val + POTENTIAL_SIGN * np.sum(F[i, j] * F[j, i] * U)
    return complex(val)


def particle_h2_gradient(s: ParticleState) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (dH/dQ, dH/dP) of :func:`particle_h2` in the particle chart."""
    n = s.n
    F = s.f
    W = np.zeros((n, n), dtype=complex)
    Wp = np.zeros((n, n), dtype=complex)
    if n > 1:
        i, j = np.where(~np.eye(n, dtype=bool))
        d = s.q[i] - s.q[j]
        U, Up = potential_pair(d, s.variant, s.lattice)
        W[i, j] = POTENTIAL_SIGN * U
        Wp[i, j] = POTENTIAL_SIGN * Up
    dq = np.sum(Wp * F * F.T, axis=1)
    da = (W * F.T) @ s.b
    db = (W * F) @ s.a
    return np.concatenate([dq, da.ravel()]), np.concatenate([s.p, db.ravel()])


def trace_gradient(d: QuiverDatum, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form canonical gradient of (1/i) tr Y^i."""
    n, k = d.n, d.k
    Yp = np.linalg.matrix_power(d.Y, i - 1)
    zk = np.zeros(n * k, dtype=complex)
    if d.variant is Variant.RATIONAL:
        return np.concatenate([np.zeros(n * n, dtype=complex), zk]), np.concatenate([Yp.ravel(), zk])
    M = np.linalg.solve(d.X, d.Y)
    dX = (M @ Yp).T.ravel()
    dM = (Yp @ d.X).ravel()
    return np.concatenate([dX, zk]), np.concatenate([dM, zk])


def _matrix_at(L, z) -> np.ndarray:
    out = L(z)
    return out.value if hasattr(out, "value") else np.asarray(out, dtype=complex)


def _contour_mean(L, z0, power, radius, samples, offset=0.0):
    theta = 2 * np.pi * (np.arange(samples) + offset) / samples
    w = radius * np.exp(1j * theta)
    if getattr(L, "vectorized", False):
        mats = np.asarray(L(z0 + w), dtype=complex)
    else:
        mats = np.array([_matrix_at(L, z0 + wk) for wk in w])
    vals = np.trace(np.linalg.matrix_power(mats, power), axis1=-2, axis2=-1)
    return np.sum(vals * w) / samples, np.max(np.abs(vals)) * radius


def residue_trace_power(L, z0: complex, i: int, radius: float = DEFAULT_RADIUS,
                        samples: int = DEFAULT_SAMPLES, tol: float = 1e-9) -> complex:
    """(1/(i+1)) Res_{z0} tr L(z)^(i+1) by the trapezoidal rule on a circle.

    The nodes are checked by doubling: the result with ``2*samples`` nodes
    must agree with the ``samples`` result within ``tol`` (relative to the
    integrand scale), otherwise QuadratureError.
    """
    if i < 1:
        raise ValueError("i must be positive")
    m = i + 1
    coarse, scale = _contour_mean(L, z0, m, radius, samples)
    shifted, _ = _contour_mean(L, z0, m, radius, samples, offset=0.5)
    fine = 0.5 * (coarse + shifted)
    if abs(fine - coarse) > tol * max(1.0, scale):
        raise QuadratureError(
            f"residue quadrature not converged: |I_2N - I_N| = {abs(fine - coarse):.3g} (N={samples})")
    return complex(fine / m)


def _trig_zeta_convention(obj, convention):
    if convention is not None:
        return convention
    return PARTICLE_TRIG_CONVENTION if isinstance(obj, ParticleState) else DEFAULT_TRIG_CONVENTION


def twisted_higgs_function(obj, convention: str | None = None):
    """``z -> eta(z) + zeta(z) Id`` for a datum or particle state."""
    conv = _trig_zeta_convention(obj, convention)
    lattice = getattr(obj, "lattice", None)
    eye = np.eye(obj.n)

    @vectorized
    def L(z):
        zeta = np.asarray(zeta_w(z, obj.variant, lattice, convention=conv))
        if np.ndim(z) == 0:
            return higgs(obj, z, conv).value + zeta * eye
        return higgs_values(obj, z, conv) + zeta[:, None, None] * eye

    return L


def spin_hamiltonian(obj, i: int, radius: float = DEFAULT_RADIUS, samples: int = DEFAULT_SAMPLES,
                     convention: str | None = None) -> complex:
    """(1/(i+1)) Res_0 tr(eta + zeta Id)^(i+1)."""
    return residue_trace_power(twisted_higgs_function(obj, convention), 0.0, i, radius, samples)


def framed_hamiltonian(L, pole: complex, i: int, variant, lattice=None, b: complex = 0.0,
                       radius: float = DEFAULT_RADIUS, samples: int = DEFAULT_SAMPLES,
                       convention: str = DEFAULT_TRIG_CONVENTION) -> complex:
    """(1/(i+1)) Res_pole tr eta^(i+1); at the marked point ``b`` eta is first shifted by zeta(z - b) Id.

    ``L`` is any matrix-valued function, e.g. user-supplied multi-pole Lax data.
    """
    pole = complex(pole)
    if abs(pole - b) > 1e-12:
        return residue_trace_power(L, pole, i, radius, samples)
    variant = Variant.parse(variant)

    @vectorized
    def shifted(z):
        if np.ndim(z) == 0:
            m = _matrix_at(L, z)
        elif getattr(L, "vectorized", False):
            m = np.asarray(L(z), dtype=complex)
        else:
            m = np.array([_matrix_at(L, zk) for zk in z])
        zeta = np.asarray(zeta_w(np.asarray(z) - b, variant, lattice, convention=convention))
        return m + zeta[..., None, None] * np.eye(m.shape[-1])

    return residue_trace_power(shifted, pole, i, radius, samples)


def evaluate(spec: HamiltonianSpec, obj) -> complex:
    if spec.kind is Kind.TRACE:
        if not isinstance(obj, QuiverDatum):
            raise ValueError("trace Hamiltonians need a quiver datum")
        return trace_hamiltonian(obj, spec.degree)
    if spec.kind is Kind.PARTICLE_H2:
        if not isinstance(obj, ParticleState):
            raise ValueError("particle_h2 needs a particle state")
        return particle_h2(obj)
    if spec.kind is Kind.RESIDUE_AT_B:
        return spin_hamiltonian(obj, spec.degree, spec.radius, spec.samples)
    conv = _trig_zeta_convention(obj, None)
    return framed_hamiltonian(higgs_function(obj, conv), spec.pole, spec.degree,
                              obj.variant, getattr(obj, "lattice", None),
                              radius=spec.radius, samples=spec.samples, convention=conv)


def closed_form_gradient(spec: HamiltonianSpec, obj):
    """(dH/dQ, dH/dP) when a closed form is registered, else None."""
    if spec.kind is Kind.TRACE and isinstance(obj, QuiverDatum):
        return trace_gradient(obj, spec.degree)
    if spec.kind is Kind.PARTICLE_H2 and isinstance(obj, ParticleState):
        return particle_h2_gradient(obj)
    return None


def fd_gradient(func, obj, h: float = FD_STEP, rtol: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference canonical gradient of ``func`` with one Richardson level.

    Raises StepError when the h and h/2 estimates disagree beyond ``rtol``.
    """
    Q, P = canonical.to_canonical(obj)
    x = canonical.pack(Q, P)

    def f(y):
        return func(canonical.from_canonical(obj, *canonical.unpack(y)))

    grad = np.empty(x.size, dtype=complex)
    for idx in range(x.size):
        e = np.zeros(x.size)
        e[idx] = 1.0
        g1 = (f(x + h * e) - f(x - h * e)) / (2 * h)
        g2 = (f(x + h / 2 * e) - f(x - h / 2 * e)) / h
        if abs(g1 - g2) > rtol * (1.0 + abs(g2)):
            raise StepError(f"finite-difference gradient unstable in coordinate {idx}: "
                            f"|g(h) - g(h/2)| = {abs(g1 - g2):.3g}")
        grad[idx] = (4 * g2 - g1) / 3
    return canonical.unpack(grad)


def gradient(spec: HamiltonianSpec, obj, h: float = FD_STEP):
    cf = closed_form_gradient(spec, obj)
    if cf is not None:
        return cf
    return fd_gradient(lambda o: evaluate(spec, o), obj, h)


def poisson_bracket(H1: HamiltonianSpec, H2: HamiltonianSpec, at, h: float = FD_STEP) -> complex:
    """{H1, H2} = sum_k dH1/dQ_k dH2/dP_k - dH1/dP_k dH2/dQ_k from finite differences."""
    q1, p1 = fd_gradient(lambda o: evaluate(H1, o), at, h)
    q2, p2 = (q1, p1) if H2 == H1 else fd_gradient(lambda o: evaluate(H2, o), at, h)
    return complex(np.dot(q1, p2) - np.dot(q2, p1))


def bracket_matrix(specs, at, h: float = FD_STEP) -> np.ndarray:
    """All pairwise brackets {H_a, H_b} at one point, reusing each gradient."""
    grads = [gradient(s, at, h) for s in specs]
    m = len(specs)
    out = np.zeros((m, m), dtype=complex)
    for a in range(m):
        for b in range(a + 1, m):
            (qa, pa), (qb, pb) = grads[a], grads[b]
            out[a, b] = np.dot(qa, pb) - np.dot(qb, pa)
            out[b, a] = -out[a, b]
    return out
