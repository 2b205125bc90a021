"""Phase-space data: quiver quadruples (X, Y, u, v) and particle coordinates.

Conventions
-----------
* The constraint is ``[X, Y] + u v = Id`` (rational) or
  ``X^-1 Y X - Y + u v = Id`` (trigonometric).
* Spin contractions are ``f_ij = <a_i, b_j>``, i.e. ``F = a @ b.T = u @ v``.
  In diagonal gauge the constraint forces ``f_ii = 1`` and fixes the
  off-diagonal part of Y:

      rational       Y_ij = -f_ij / (q_i - q_j)
      trigonometric  Y_ij = -f_ij / (exp(q_j - q_i) - 1)

* Trigonometric positions are additive: ``X = diag(exp(q))``; ``to_particles``
  recovers ``q`` with the principal branch of ``log``.
* The elliptic variant has no quiver chart; ParticleState is its only chart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CollisionError, ConstraintError, SingularMatrixError
from .specfun import Lattice, Variant

COLLISION_TOLERANCE = 1e-9
SINGULAR_TOLERANCE = 1e-12


def _cmatrix(a, shape=None, name="matrix") -> np.ndarray:
    a = np.array(a, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {a.shape}")
    if shape is not None and a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    return a


@dataclass(eq=False)
class QuiverDatum:
    """An unreduced phase-space point (X, Y, u, v); u is n x k, v is k x n."""

    variant: Variant
    X: np.ndarray
    Y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        if self.variant is Variant.ELLIPTIC:
            raise ValueError("the elliptic variant has no quiver chart")
        self.X = _cmatrix(self.X, name="X")
        n = self.X.shape[0]
        self.X = _cmatrix(self.X, (n, n), "X")
        self.Y = _cmatrix(self.Y, (n, n), "Y")
        self.u = _cmatrix(self.u, name="u")
        k = self.u.shape[1]
        self.u = _cmatrix(self.u, (n, k), "u")
        self.v = _cmatrix(self.v, (k, n), "v")
        if self.variant is Variant.TRIGONOMETRIC and abs(np.linalg.det(self.X)) <= SINGULAR_TOLERANCE:
            raise SingularMatrixError("trigonometric datum requires invertible X")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.u.shape[1]

    def replace(self, **kw) -> "QuiverDatum":
        fields = dict(variant=self.variant, X=self.X, Y=self.Y, u=self.u, v=self.v)
        fields.update(kw)
        return QuiverDatum(**fields)

    def copy(self) -> "QuiverDatum":
        return self.replace(X=self.X.copy(), Y=self.Y.copy(), u=self.u.copy(), v=self.v.copy())


@dataclass(eq=False)
class ParticleState:
    """Particle chart: positions q, momenta p, spin rows a (covectors) and b (vectors)."""

    variant: Variant
    q: np.ndarray
    p: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lattice: Lattice | None = None

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        self.q = np.array(self.q, dtype=complex).reshape(-1)
        n = self.q.size
        self.p = np.array(self.p, dtype=complex).reshape(-1)
        if self.p.size != n:
            raise ValueError(f"p must have length {n}")
        self.a = _cmatrix(self.a, name="a")
        if self.a.shape[0] != n:
            raise ValueError(f"a must have {n} rows")
        self.b = _cmatrix(self.b, self.a.shape, "b")
        if self.variant is Variant.ELLIPTIC and self.lattice is None:
            raise ValueError("elliptic particle state requires a lattice")

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def k(self) -> int:
        return self.a.shape[1]

    @property
    def f(self) -> np.ndarray:
        """Spin contractions f_ij = <a_i, b_j>."""
        return self.a @ self.b.T

    def replace(self, **kw) -> "ParticleState":
        fields = dict(variant=self.variant, q=self.q, p=self.p, a=self.a, b=self.b, lattice=self.lattice)
        fields.update(kw)
        return ParticleState(**fields)

    def min_separation(self) -> float:
        """Smallest pairwise distance between positions, modulo the variant's periods."""
        n = self.n
        if n < 2:
            return np.inf
        i, j = np.triu_indices(n, 1)
        d = self.q[i] - self.q[j]
        if self.variant is Variant.RATIONAL:
            sep = np.abs(d)
        elif self.variant is Variant.TRIGONOMETRIC:
            # X = exp(q) degenerates on 2 pi i Z, the 1/sin^2 potential on pi Z
            sep = np.minimum(np.abs(np.exp(self.q[i]) - np.exp(self.q[j])),
                             np.abs(d - np.pi * np.round(d.real / np.pi)))
        else:
            sep = self.lattice.distance_to_lattice(d)
        return float(np.min(sep))

    def check_distinct(self, tol: float = COLLISION_TOLERANCE) -> None:
        sep = self.min_separation()
        if sep <= tol:
            raise CollisionError(f"particle positions collide (separation {sep:.3g})")


@dataclass(frozen=True, eq=False)
class GaugeElement:
    g: np.ndarray

    def __post_init__(self):
        g = _cmatrix(self.g, name="g")
        if g.shape[0] != g.shape[1]:
            raise ValueError("gauge element must be square")
        if abs(np.linalg.det(g)) <= SINGULAR_TOLERANCE:
            raise SingularMatrixError("gauge element is not invertible")
        object.__setattr__(self, "g", g)


def moment_map(d: QuiverDatum) -> np.ndarray:
    """[X, Y] + u v, or X^-1 Y X - Y + u v."""
    uv = d.u @ d.v
    if d.variant is Variant.RATIONAL:
        return d.X @ d.Y - d.Y @ d.X + uv
    try:
        conj = np.linalg.solve(d.X, d.Y @ d.X)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("X is not invertible") from exc
    return conj - d.Y + uv


def constraint_residual(d: QuiverDatum) -> float:
    return float(np.linalg.norm(moment_map(d) - np.eye(d.n)))


def check_constraint(d: QuiverDatum, tol: float = 1e-10) -> tuple[bool, float]:
    """Return ``(on_shell, residual)`` with the Frobenius residual of the moment map."""
    r = constraint_residual(d)
    return r <= tol, r


def gauge_transform(d: QuiverDatum, g) -> QuiverDatum:
    """Simultaneous action (X, Y, u, v) -> (g X g^-1, g Y g^-1, g u, v g^-1)."""
    if not isinstance(g, GaugeElement):
        g = GaugeElement(g)
    g = g.g
    ginv = np.linalg.inv(g)
    return d.replace(X=g @ d.X @ ginv, Y=g @ d.Y @ ginv, u=g @ d.u, v=d.v @ ginv)


def _positions_to_x(q, variant: Variant) -> np.ndarray:
    return np.exp(q) if variant is Variant.TRIGONOMETRIC else np.asarray(q, dtype=complex)


def normalize_spins(s: ParticleState, tol: float = COLLISION_TOLERANCE) -> ParticleState:
    """Rescale each b_i so that <a_i, b_i> = 1, as the diagonal of the constraint requires."""
    diag = np.einsum("ij,ij->i", s.a, s.b)
    bad = np.flatnonzero(np.abs(diag) <= tol)
    if bad.size:
        raise ConstraintError(
            f"particles {bad.tolist()} have <a_i, b_i> = 0; the diagonal of the constraint cannot hold")
    return s.replace(b=s.b / diag[:, None])


def from_particles(s: ParticleState) -> QuiverDatum:
    """Diagonal-gauge quiver datum of a rational or trigonometric particle state.

    Spins are first normalised by :func:`normalize_spins`; the result is on-shell.
    """
    if s.variant is Variant.ELLIPTIC:
        raise ValueError("the elliptic variant has no quiver chart")
    s.check_distinct()
    s = normalize_spins(s)
    x = _positions_to_x(s.q, s.variant)
    F = s.f
    if s.variant is Variant.RATIONAL:
        denom = x[:, None] - x[None, :]
    else:
        denom = x[None, :] / x[:, None] - 1.0
    np.fill_diagonal(denom, 1.0)
    Y = -F / denom
    np.fill_diagonal(Y, s.p)
    return QuiverDatum(s.variant, np.diag(x), Y, s.a.copy(), s.b.T.copy())


def _normalize_columns(V: np.ndarray) -> np.ndarray:
    V = V / np.linalg.norm(V, axis=0)
    for j in range(V.shape[1]):
        col = V[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)[0]
        V[:, j] = col * (abs(col[idx]) / col[idx])
    return V


def to_particles(d: QuiverDatum, tol: float = COLLISION_TOLERANCE) -> ParticleState:
    """Gauge X to diagonal form and read off positions, momenta and spins."""
    lam, V = np.linalg.eig(d.X)
    n = d.n
    if n > 1:
        gaps = np.where(np.eye(n, dtype=bool), np.inf, np.abs(lam[:, None] - lam[None, :]))
        if gaps.min() <= tol:
            raise CollisionError(f"X has (nearly) repeated eigenvalues, gap {gaps.min():.3g}")
    q = np.log(lam) if d.variant is Variant.TRIGONOMETRIC else lam
    order = np.lexsort((q.imag, q.real))
    q, V = q[order], _normalize_columns(V[:, order])
    Vinv = np.linalg.inv(V)
    Y = Vinv @ d.Y @ V
    return ParticleState(d.variant, q, np.diag(Y).copy(), Vinv @ d.u, (d.v @ V).T)


def spinless_matrices(q, p) -> tuple[np.ndarray, np.ndarray]:
    """Classical spinless coordinates: X = diag(q), Y_ii = p_i, Y_ij = 1/(q_i - q_j)."""
    q = np.asarray(q, dtype=complex)
    diff = q[:, None] - q[None, :]
    np.fill_diagonal(diff, 1.0)
    Y = 1.0 / diff
    np.fill_diagonal(Y, p)
    return np.diag(q), Y


def spinless_orbit_matrix(n: int) -> np.ndarray:
    """Zero diagonal, ones elsewhere: all-ones minus the identity."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return np.ones((n, n), dtype=complex) - np.eye(n)


def match_permutation(q_ref, q) -> np.ndarray:
    """Indices ``perm`` minimising ``|q[perm] - q_ref|`` (Hungarian assignment)."""
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(np.asarray(q_ref)[:, None] - np.asarray(q)[None, :])
    _, perm = linear_sum_assignment(cost)
    return perm


def state_distance(ref: ParticleState, other: ParticleState) -> float:
    """Distance between particle states modulo permutation and per-particle spin rescaling.

    Each particle's spins are compared after the best rescaling
    ``a_i -> lambda a_i, b_i -> b_i / lambda``.
    """
    if ref.n != other.n or ref.k != other.k:
        return np.inf
    perm = match_permutation(ref.q, other.q)
    o = other.replace(q=other.q[perm], p=other.p[perm], a=other.a[perm], b=other.b[perm])
    err = max(np.max(np.abs(o.q - ref.q), initial=0.0), np.max(np.abs(o.p - ref.p), initial=0.0))
    for i in range(ref.n):
        ai = ref.a[i]
        norm = np.vdot(ai, ai).real
        if norm == 0:
            err = max(err, np.max(np.abs(o.a[i])), np.max(np.abs(o.b[i] - ref.b[i])))
            continue
        lam = np.vdot(ai, o.a[i]) / norm
        if lam == 0:
            return np.inf
        err = max(err, np.max(np.abs(o.a[i] - lam * ai)), np.max(np.abs(o.b[i] * lam - ref.b[i])))
    return float(err)
