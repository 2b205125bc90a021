"""Canonical (Darboux) coordinates for each chart.

A point is flattened to ``(Q, P)`` with ``Q[k]`` conjugate to ``P[k]``;
Hamilton's equations read ``Q' = dH/dP``, ``P' = -dH/dQ``.

rational quiver
    ``Q = (X, u)``, ``P = (Y^T, v^T)`` -- the pairing ``tr(Y dX) + tr(v du)``.
trigonometric quiver
    ``Q = (X, v)``, ``P = (M^T, u^T)`` with ``Y = X M``.  With this
    orientation ``X^-1 Y X - Y + u v`` is minus the moment map of
    conjugation, so its level sets are preserved by invariant Hamiltonians,
    and the trace flows move X by left multiplication, ``X' = Y^i X``.
particles
    ``Q = (q, a)``, ``P = (p, b)``.
"""

from __future__ import annotations

import numpy as np

from .phase import ParticleState, QuiverDatum
from .specfun import Variant


def to_canonical(obj) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(obj, ParticleState):
        return np.concatenate([obj.q, obj.a.ravel()]), np.concatenate([obj.p, obj.b.ravel()])
    if obj.variant is Variant.RATIONAL:
        Q = np.concatenate([obj.X.ravel(), obj.u.ravel()])
        P = np.concatenate([obj.Y.T.ravel(), obj.v.T.ravel()])
        return Q, P
    M = np.linalg.solve(obj.X, obj.Y)
    Q = np.concatenate([obj.X.ravel(), obj.v.ravel()])
    P = np.concatenate([M.T.ravel(), obj.u.T.ravel()])
    return Q, P


def from_canonical(template, Q: np.ndarray, P: np.ndarray):
    """Inverse of :func:`to_canonical`, shaped like ``template``."""
    n, k = template.n, template.k
    if isinstance(template, ParticleState):
        return template.replace(q=Q[:n], p=P[:n], a=Q[n:].reshape(n, k), b=P[n:].reshape(n, k))
    nn = n * n
    X = Q[:nn].reshape(n, n)
    if template.variant is Variant.RATIONAL:
        return QuiverDatum(template.variant, X, P[:nn].reshape(n, n).T,
                           Q[nn:].reshape(n, k), P[nn:].reshape(n, k).T)
    M = P[:nn].reshape(n, n).T
    return QuiverDatum(template.variant, X, X @ M, P[nn:].reshape(k, n).T, Q[nn:].reshape(k, n))


def pack(Q, P) -> np.ndarray:
    return np.concatenate([Q, P])


def unpack(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = x.size // 2
    return x[:m], x[m:]
