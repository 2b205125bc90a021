"""Seeded random states that are well separated and have moderate couplings."""

from __future__ import annotations

import numpy as np

from .phase import GaugeElement, ParticleState, from_particles, gauge_transform, normalize_spins
from .specfun import Lattice, Variant

# Fractional coordinates (x, y) -> x + y tau, spread over the period cell.
_ELLIPTIC_SITES = np.array([[0.1, 0.1], [0.6, 0.2], [0.3, 0.65], [0.8, 0.75]])


def _cnormal(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_spins(rng, n: int, k: int, spread: float = 0.3):
    """Spins with <a_i, b_i> = 1 and off-diagonal contractions of order one."""
    a = _cnormal(rng, (n, k))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b = a.conj() + _cnormal(rng, (n, k), spread)
    return a, b


def random_particle_state(rng, variant, n: int, k: int, lattice: Lattice | None = None,
                          spacing: float = 1.0, jitter: float = 0.05, momentum: float = 0.2,
                          spin_spread: float = 0.3) -> ParticleState:
    variant = Variant.parse(variant)
    if variant is Variant.ELLIPTIC:
        if lattice is None:
            lattice = Lattice(1j)
        if n > len(_ELLIPTIC_SITES):
            raise ValueError(f"at most {len(_ELLIPTIC_SITES)} elliptic particles are supported")
        sites = _ELLIPTIC_SITES[:n]
        q = sites[:, 0] + sites[:, 1] * lattice.tau + _cnormal(rng, n, jitter)
    else:
        lattice = None
        q = spacing * (np.arange(n) - (n - 1) / 2) + _cnormal(rng, n, jitter)
    p = _cnormal(rng, n, momentum)
    a, b = random_spins(rng, n, k, spin_spread)
    return normalize_spins(ParticleState(variant, q, p, a, b, lattice))


def random_gauge(rng, n: int, strength: float = 0.3) -> GaugeElement:
    return GaugeElement(np.eye(n) + _cnormal(rng, (n, n), strength / np.sqrt(n)))


def random_on_shell(rng, variant, n: int, k: int, gauge: bool = True, **kw):
    """On-shell quiver datum: a random particle state, optionally moved off diagonal gauge."""
    d = from_particles(random_particle_state(rng, variant, n, k, **kw))
    return gauge_transform(d, random_gauge(rng, n)) if gauge else d
