"""Weierstrass functions for the lattice <1, tau> and their degenerations.

All lattice functions are evaluated row by row: the sum over ``m`` of a
lattice row ``m + n*tau`` is done in closed form (``pi^2/sin^2`` for the
wp-function, ``pi*cot`` for zeta, ``sin`` for sigma), and the remaining sum
over rows ``|n| <= truncation_radius`` converges geometrically.  This is the
Eisenstein summation order, so the quasi-period of zeta along 1 is exactly
the Eisenstein series ``G2``.

Trigonometric conventions.  The literal degenerations are ``zeta = 1/sin(z)``
and the kernel ``1/sin(z) - 1/sin(q)``; the standard degeneration of the
sigma quotient uses ``cot`` instead.  Both are available through the
``convention`` argument (``"sin"`` or ``"cot"``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import PoleError

POLE_TOLERANCE = 1e-12
DEFAULT_TRUNCATION = 40
DEFAULT_TOLERANCE = 1e-10

TRIG_SIN = "sin"
TRIG_COT = "cot"
TRIG_CONVENTIONS = (TRIG_SIN, TRIG_COT)
DEFAULT_TRIG_CONVENTION = TRIG_SIN


class Variant(str, enum.Enum):
    RATIONAL = "rational"
    TRIGONOMETRIC = "trigonometric"
    ELLIPTIC = "elliptic"

    @classmethod
    def parse(cls, value: "Variant | str") -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown variant {value!r}") from None


# --- stable trigonometric building blocks -----------------------------------
#
# For |Im w| large, sin(w) overflows; the forms below only ever exponentiate
# arguments with non-positive real part.


def _csc2(w):
    """1/sin(w)^2."""
    w = np.asarray(w, dtype=complex)
    s = np.where(w.imag >= 0, 1.0, -1.0)
    e = np.exp(2j * s * w)
    return -4.0 * e / (1.0 - e) ** 2


def _cot(w):
    w = np.asarray(w, dtype=complex)
    s = np.where(w.imag >= 0, 1.0, -1.0)
    e = np.exp(2j * s * w)
    return -1j * s * (1.0 + e) / (1.0 - e)


def _check_convention(convention: str) -> None:
    if convention not in TRIG_CONVENTIONS:
        raise ValueError(f"unknown trigonometric convention {convention!r}")


def _out(x):
    x = np.asarray(x)
    return complex(x) if x.ndim == 0 else x


# --- lattice ----------------------------------------------------------------


@dataclass(frozen=True)
class Lattice:
    """The lattice generated by 1 and ``tau`` together with its invariants.

    ``g2`` and ``g3`` are derived from ``tau`` and ``truncation_radius`` and
    are not constructor arguments.
    """

    tau: complex
    truncation_radius: int = DEFAULT_TRUNCATION
    tolerance: float = DEFAULT_TOLERANCE
    g2: complex = field(init=False)
    g3: complex = field(init=False)
    e2: complex = field(init=False, repr=False)
    eta_tau: complex = field(init=False, repr=False)

    def __post_init__(self):
        tau = complex(self.tau)
        object.__setattr__(self, "tau", tau)
        if not tau.imag > 0:
            raise ValueError(f"lattice requires Im(tau) > 0, got tau={tau}")
        if int(self.truncation_radius) < 1:
            raise ValueError("truncation_radius must be a positive integer")
        object.__setattr__(self, "truncation_radius", int(self.truncation_radius))
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

        n = self._offsets(nonzero=True)
        c = _csc2(np.pi * n * tau)
        pi2 = np.pi**2
        e2 = pi2 / 3 + pi2 * np.sum(c)
        g4 = np.pi**4 / 45 + np.pi**4 * np.sum(6 * c**2 - 4 * c) / 6
        g6 = 2 * np.pi**6 / 945 + np.pi**6 * np.sum(120 * c**3 - 120 * c**2 + 16 * c) / 120
        object.__setattr__(self, "e2", complex(e2))
        object.__setattr__(self, "g2", complex(60 * g4))
        object.__setattr__(self, "g3", complex(140 * g6))
        # Legendre: eta_1 * tau - eta_tau * 1 = 2 pi i, with eta_1 = e2.
        object.__setattr__(self, "eta_tau", complex(tau * e2 - 2j * np.pi))

        disc = self.discriminant
        if not (np.isfinite(disc) and disc != 0):
            raise ValueError("degenerate lattice: the discriminant vanishes numerically")

    @property
    def discriminant(self) -> complex:
        """g2^3 - 27 g3^2 from its product expansion, free of cancellation for large Im tau."""
        q = np.exp(2j * np.pi * self.tau)
        k = np.arange(1, self.rows + 1)
        return complex((2 * np.pi) ** 12 * q * np.prod((1 - q**k) ** 24))

    @property
    def rows(self) -> int:
        """Rows actually summed: row n of a reduced argument is O(exp(-2 pi (n - 1/2) Im tau)),
        so rows beyond double precision are skipped; ``truncation_radius`` caps the count."""
        needed = int(np.ceil(0.5 + 42.0 / (2 * np.pi * self.tau.imag))) + 1
        return min(self.truncation_radius, needed)

    def _offsets(self, nonzero: bool = False) -> np.ndarray:
        n = np.arange(-self.rows, self.rows + 1)
        return n[n != 0] if nonzero else n

    def reduce(self, z):
        """Split ``z = z0 + m + n*tau`` with ``z0`` near the origin.

        Returns ``(z0, m, n)`` with integer arrays ``m`` and ``n``.
        """
        z = np.asarray(z, dtype=complex)
        n = np.round(z.imag / self.tau.imag)
        z1 = z - n * self.tau
        m = np.round(z1.real)
        return z1 - m, m.astype(int), n.astype(int)

    def distance_to_lattice(self, z):
        z0, _, _ = self.reduce(z)
        shifts = (np.array([-1, 0, 1])[:, None] + np.array([-1, 0, 1])[None, :] * self.tau).ravel()
        return np.min(np.abs(z0[..., None] - shifts), axis=-1)


def _guard(dist, what: str, threshold: float = POLE_TOLERANCE) -> None:
    if np.any(np.asarray(dist) < threshold):
        raise PoleError(f"{what} evaluated within {threshold:g} of a pole")


def _trig_distance(z):
    z = np.asarray(z, dtype=complex)
    return np.abs(z - np.pi * np.round(z.real / np.pi))


# --- Weierstrass functions --------------------------------------------------


def _rows(z0, lattice: Lattice):
    return z0[..., None] + lattice._offsets() * lattice.tau


def wp(z, lattice: Lattice):
    """Weierstrass wp-function of the lattice <1, tau>."""
    z = np.asarray(z, dtype=complex)
    _guard(lattice.distance_to_lattice(z), "wp")
    z0, _, _ = lattice.reduce(z)
    pi2 = np.pi**2
    c0 = _csc2(np.pi * lattice._offsets(nonzero=True) * lattice.tau)
    val = pi2 * np.sum(_csc2(np.pi * _rows(z0, lattice)), axis=-1)
    return _out(val - pi2 * np.sum(c0) - pi2 / 3)


def wp_prime(z, lattice: Lattice):
    """Derivative of the wp-function."""
    z = np.asarray(z, dtype=complex)
    _guard(lattice.distance_to_lattice(z), "wp_prime")
    z0, _, _ = lattice.reduce(z)
    w = np.pi * _rows(z0, lattice)
    return _out(-2 * np.pi**3 * np.sum(_csc2(w) * _cot(w), axis=-1))


def _zeta_reduced(z0, lattice: Lattice):
    n = lattice._offsets(nonzero=True)
    n = n[n > 0]
    w = np.pi * z0[..., None]
    pairs = _cot(w + np.pi * n * lattice.tau) + _cot(w - np.pi * n * lattice.tau)
    return lattice.e2 * z0 + np.pi * _cot(np.pi * z0) + np.pi * np.sum(pairs, axis=-1)


def weierstrass_zeta(z, lattice: Lattice):
    """Weierstrass zeta: odd, ``zeta' = -wp``, simple pole of residue 1 at 0."""
    z = np.asarray(z, dtype=complex)
    _guard(lattice.distance_to_lattice(z), "zeta")
    z0, m, n = lattice.reduce(z)
    return _out(_zeta_reduced(z0, lattice) + m * lattice.e2 + n * lattice.eta_tau)


def sigma_w(z, lattice: Lattice):
    """Weierstrass sigma as an entire function, ``sigma(z) ~ z`` at 0."""
    z = np.asarray(z, dtype=complex)
    z0, m, n = lattice.reduce(z)
    k = lattice._offsets(nonzero=True)
    k = k[k > 0]
    s2 = np.sin(np.pi * z0) ** 2
    prod = np.prod(1.0 - s2[..., None] * _csc2(np.pi * k * lattice.tau), axis=-1)
    base = np.sin(np.pi * z0) / np.pi * np.exp(lattice.e2 * z0**2 / 2) * prod
    # sigma(z0 + w) = (-1)^(m + n + mn) exp(eta_w (z0 + w/2)) sigma(z0)
    w = m + n * lattice.tau
    eta_w = m * lattice.e2 + n * lattice.eta_tau
    sign = np.where((m + n + m * n) % 2 == 0, 1.0, -1.0)
    return _out(sign * np.exp(eta_w * (z0 + w / 2)) * base)


# --- variant-level API ------------------------------------------------------


def _need_lattice(variant: Variant, lattice: Lattice | None) -> None:
    if variant is Variant.ELLIPTIC and lattice is None:
        raise ValueError("the elliptic variant requires a Lattice")


def singular_distance(z, variant, lattice: Lattice | None = None):
    """Distance from ``z`` to the singular set of the variant's potential."""
    variant = Variant.parse(variant)
    _need_lattice(variant, lattice)
    if variant is Variant.RATIONAL:
        return np.abs(np.asarray(z, dtype=complex))
    if variant is Variant.TRIGONOMETRIC:
        return _trig_distance(z)
    return lattice.distance_to_lattice(z)


def potential(q, variant, lattice: Lattice | None = None):
    """Pair potential U(q): 1/q^2, 1/sin(q)^2 or wp(q)."""
    variant = Variant.parse(variant)
    _guard(singular_distance(q, variant, lattice), "potential")
    q = np.asarray(q, dtype=complex)
    if variant is Variant.RATIONAL:
        return _out(1.0 / q**2)
    if variant is Variant.TRIGONOMETRIC:
        return _out(_csc2(q))
    return wp(q, lattice)


def potential_prime(q, variant, lattice: Lattice | None = None):
    """Derivative U'(q)."""
    variant = Variant.parse(variant)
    _guard(singular_distance(q, variant, lattice), "potential_prime")
    q = np.asarray(q, dtype=complex)
    if variant is Variant.RATIONAL:
        return _out(-2.0 / q**3)
    if variant is Variant.TRIGONOMETRIC:
        return _out(-2.0 * _csc2(q) * _cot(q))
    return wp_prime(q, lattice)


def potential_pair(q, variant, lattice: Lattice | None = None):
    """``(U(q), U'(q))`` with a single reduction and pole check."""
    variant = Variant.parse(variant)
    q = np.asarray(q, dtype=complex)
    if variant is not Variant.ELLIPTIC:
        return potential(q, variant), potential_prime(q, variant)
    _need_lattice(variant, lattice)
    z0, _, _ = lattice.reduce(q)
    _guard(np.abs(z0), "potential")
    w = np.pi * _rows(z0, lattice)
    c, ct = _csc2(w), _cot(w)
    shift = np.pi**2 * np.sum(_csc2(np.pi * lattice._offsets(nonzero=True) * lattice.tau)) + np.pi**2 / 3
    return _out(np.pi**2 * np.sum(c, axis=-1) - shift), _out(-2 * np.pi**3 * np.sum(c * ct, axis=-1))


def zeta_w(z, variant, lattice: Lattice | None = None, convention: str = DEFAULT_TRIG_CONVENTION):
    """The zeta function of the variant: 1/z, 1/sin(z) (or cot z), or Weierstrass zeta."""
    variant = Variant.parse(variant)
    _guard(singular_distance(z, variant, lattice), "zeta")
    z = np.asarray(z, dtype=complex)
    if variant is Variant.RATIONAL:
        return _out(1.0 / z)
    if variant is Variant.TRIGONOMETRIC:
        _check_convention(convention)
        if convention == TRIG_COT:
            return _out(_cot(z))
        return _out(1.0 / np.sin(z))
    return weierstrass_zeta(z, lattice)


def lax_kernel(q, z, variant, lattice: Lattice | None = None, convention: str = DEFAULT_TRIG_CONVENTION):
    """Kernel s_q(z): simple pole of residue 1 at z = 0 and a zero at z = q.

    Rational ``1/z - 1/q``; trigonometric ``zeta(z) - zeta(q)`` in the chosen
    convention; elliptic ``sigma(z - q) / (sigma(z) sigma(-q))``.
    """
    variant = Variant.parse(variant)
    _guard(singular_distance(z, variant, lattice), "lax_kernel at z")
    _guard(singular_distance(q, variant, lattice), "lax_kernel at q")
    q = np.asarray(q, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if variant is not Variant.ELLIPTIC:
        return _out(np.asarray(zeta_w(z, variant, convention=convention))
                    - np.asarray(zeta_w(q, variant, convention=convention)))
    return _out(np.asarray(sigma_w(z - q, lattice))
                / (np.asarray(sigma_w(z, lattice)) * np.asarray(sigma_w(-q, lattice))))
