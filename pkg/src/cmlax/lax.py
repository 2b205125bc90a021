"""Lax (Higgs) matrices with spectral parameter and spectral-curve samples.

The differentials ``dz`` and ``dz/z`` are dropped: every Higgs field is a
plain matrix-valued function of the coordinate z.

Two matrix forms are in use and they are related by ``z -> -z``:

* quiver forms ``[X, Y]/z + Y`` and ``(X^-1 Y X - Y)/z + Y``;
* the particle form ``eta_ii = p_i``, ``eta_ij = f_ij s_{q_i - q_j}(z)``.

On diagonal-gauge data from :func:`cmlax.phase.from_particles` the rational
quiver form at ``-z`` equals the particle form at ``z``; the particle form is
the one whose zeta-twist ``eta + zeta I`` has principal part ``u v / z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PoleError, SingularMatrixError
from .phase import ParticleState, QuiverDatum
from .specfun import (
    DEFAULT_TRIG_CONVENTION,
    TRIG_COT,
    Lattice,
    Variant,
    lax_kernel,
    singular_distance,
    zeta_w,
    POLE_TOLERANCE,
)

# Kernel convention for trigonometric particle-chart Lax matrices.  Only the
# cot kernel gives an isospectral family under the 1/sin^2 Hamiltonian
# (tests/test_lax.py::test_trig_particle_convention_is_decided_by_isospectrality).
PARTICLE_TRIG_CONVENTION = TRIG_COT


@dataclass(eq=False)
class LaxSample:
    z: complex
    value: np.ndarray
    variant: Variant
    pole_set: frozenset = field(default_factory=lambda: frozenset({0j}))
    lattice: Lattice | None = None
    convention: str = DEFAULT_TRIG_CONVENTION

    def __post_init__(self):
        self.z = complex(self.z)
        self.value = np.asarray(self.value, dtype=complex)
        self.variant = Variant.parse(self.variant)
        if not np.all(np.isfinite(self.value)):
            raise PoleError(f"Lax sample at z={self.z} is not finite")

    @property
    def n(self) -> int:
        return self.value.shape[0]


@dataclass(eq=False)
class SpectralRecord:
    """Monic characteristic-polynomial coefficients (descending) on a z-grid."""

    z_grid: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.z_grid = np.asarray(self.z_grid, dtype=complex).reshape(-1)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)

    def drift(self, other: "SpectralRecord") -> float:
        return float(np.max(np.abs(self.coeffs - other.coeffs)))


def _check_z(z, variant, lattice=None):
    if np.any(singular_distance(z, variant, lattice) < POLE_TOLERANCE):
        raise PoleError(f"Higgs field evaluated at its pole z={z}")


def rational_higgs(d: QuiverDatum, z: complex) -> LaxSample:
    """[X, Y]/z + Y."""
    if d.variant is not Variant.RATIONAL:
        raise ValueError("rational_higgs needs a rational datum")
    _check_z(z, Variant.RATIONAL)
    comm = d.X @ d.Y - d.Y @ d.X
    return LaxSample(z, comm / z + d.Y, Variant.RATIONAL)


def trig_higgs(d: QuiverDatum, z: complex) -> LaxSample:
    """(X^-1 Y X - Y)/z + Y."""
    if d.variant is not Variant.TRIGONOMETRIC:
        raise ValueError("trig_higgs needs a trigonometric datum")
    if abs(complex(z)) < POLE_TOLERANCE:
        raise PoleError("Higgs field evaluated at its pole z=0")
    try:
        conj = np.linalg.solve(d.X, d.Y @ d.X)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("X is not invertible") from exc
    return LaxSample(z, (conj - d.Y) / z + d.Y, Variant.TRIGONOMETRIC)


def particle_higgs(s: ParticleState, z: complex, convention: str | None = None) -> LaxSample:
    """Particle-chart Higgs field: p on the diagonal, f_ij s_{q_i - q_j}(z) off it.

    Only off-diagonal contractions enter; ``f_ii`` is ignored.
    """
    if convention is None:
        convention = PARTICLE_TRIG_CONVENTION
    s.check_distinct()
    _check_z(z, s.variant, s.lattice)
    n = s.n
    value = np.diag(s.p).astype(complex)
    if n > 1:
        i, j = np.where(~np.eye(n, dtype=bool))
        kern = lax_kernel(s.q[i] - s.q[j], z, s.variant, s.lattice, convention=convention)
        value[i, j] = s.f[i, j] * kern
    return LaxSample(z, value, s.variant, lattice=s.lattice, convention=convention)


def elliptic_higgs(s: ParticleState, z: complex) -> LaxSample:
    """Elliptic Higgs field with the sigma-quotient kernel."""
    if s.variant is not Variant.ELLIPTIC:
        raise ValueError("elliptic_higgs needs an elliptic particle state")
    return particle_higgs(s, z)


def higgs(obj, z: complex, convention: str | None = None) -> LaxSample:
    """Dispatch to the Higgs field of a quiver datum or particle state."""
    if isinstance(obj, QuiverDatum):
        return rational_higgs(obj, z) if obj.variant is Variant.RATIONAL else trig_higgs(obj, z)
    return particle_higgs(obj, z, convention)


def higgs_values(obj, zs, convention: str | None = None) -> np.ndarray:
    """Higgs matrices at every point of ``zs``, stacked with shape (N, n, n)."""
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    lattice = getattr(obj, "lattice", None)
    if isinstance(obj, QuiverDatum):
        if np.any(np.abs(zs) < POLE_TOLERANCE):
            raise PoleError("Higgs field evaluated at its pole z=0")
        if obj.variant is Variant.RATIONAL:
            residue = obj.X @ obj.Y - obj.Y @ obj.X
        else:
            residue = np.linalg.solve(obj.X, obj.Y @ obj.X) - obj.Y
        return residue[None] / zs[:, None, None] + obj.Y[None]
    if convention is None:
        convention = PARTICLE_TRIG_CONVENTION
    obj.check_distinct()
    _check_z(zs, obj.variant, lattice)
    n = obj.n
    out = np.broadcast_to(np.diag(obj.p).astype(complex), (zs.size, n, n)).copy()
    if n > 1:
        i, j = np.where(~np.eye(n, dtype=bool))
        kern = lax_kernel((obj.q[i] - obj.q[j])[None, :], zs[:, None], obj.variant, lattice,
                          convention=convention)
        out[:, i, j] = obj.f[i, j][None, :] * kern
    return out


def vectorized(func):
    """Mark a matrix-valued function as accepting a 1-D array of z (returning (N, n, n))."""
    func.vectorized = True
    return func


def higgs_function(obj, convention: str | None = None):
    """``z -> eta(z)``; also accepts an array of z and returns stacked matrices."""

    @vectorized
    def L(z):
        if np.ndim(z) == 0:
            return higgs(obj, z, convention).value
        return higgs_values(obj, z, convention)

    return L


def twist_shift(L: LaxSample, direction: str = "to_twisted", convention: str | None = None) -> LaxSample:
    """Add (``to_twisted``) or subtract (``to_untwisted``) zeta(z) times the identity."""
    if direction not in ("to_twisted", "to_untwisted"):
        raise ValueError(f"unknown direction {direction!r}")
    conv = L.convention if convention is None else convention
    zeta = zeta_w(L.z, L.variant, L.lattice, convention=conv)
    sign = 1.0 if direction == "to_twisted" else -1.0
    return LaxSample(L.z, L.value + sign * zeta * np.eye(L.n), L.variant, L.pole_set, L.lattice, conv)


def char_poly_coeffs(L) -> np.ndarray:
    """Monic characteristic polynomial det(k - value), coefficients in descending degree.

    Eigenvalues come from a complex Schur form and are re-expanded into
    elementary symmetric functions.
    """
    from scipy.linalg import schur

    value = L.value if isinstance(L, LaxSample) else np.asarray(L, dtype=complex)
    if value.shape[0] == 0:
        return np.ones(1, dtype=complex)
    T, _ = schur(value, output="complex")
    c = np.poly(np.diag(T)).astype(complex)
    c[0] = 1.0
    return c


def spectral_record(obj, z_grid, convention: str | None = None) -> SpectralRecord:
    z_grid = np.asarray(z_grid, dtype=complex).reshape(-1)
    coeffs = np.array([char_poly_coeffs(higgs(obj, z, convention)) for z in z_grid])
    return SpectralRecord(z_grid, coeffs)


def default_grid(variant, lattice: Lattice | None = None) -> np.ndarray:
    """Grid {1, 2, 1+i}, or points inside the period parallelogram for elliptic data."""
    if Variant.parse(variant) is Variant.ELLIPTIC:
        tau = lattice.tau if lattice is not None else 1j
        return np.array([0.3 + 0.2 * tau, 0.5 + 0.4 * tau, 0.25 + 0.6 * tau])
    return np.array([1.0, 2.0, 1.0 + 1.0j])
