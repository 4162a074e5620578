"""Gauss-Legendre rules on [0,1], tensorized over elements and faces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray   # (nq,) in [0,1] or (nq, d) for tensor rules
    weights: np.ndarray  # (nq,), positive, summing to the unit measure


def gauss_rule(n: int) -> QuadRule:
    """n-point Gauss-Legendre rule on [0,1], exact for degree <= 2n-1."""
    if not 1 <= n <= 16:
        raise ValueError("supported point counts are 1..16")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule(0.5 * (x + 1.0), 0.5 * w)


def tensor_rule(n: int, d: int) -> QuadRule:
    """Tensor product of a 1D n-point rule over d directions."""
    r1 = gauss_rule(n)
    if d == 1:
        return QuadRule(r1.points.copy(), r1.weights.copy())
    grids = np.meshgrid(*([r1.points] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = r1.weights
    for _ in range(d - 1):
        w = np.multiply.outer(w, r1.weights)
    return QuadRule(pts, w.ravel())


def element_rule(k: int, d: int, n: int | None = None) -> QuadRule:
    """Default (k+1)^d-point rule for a d-dimensional element."""
    return tensor_rule(k + 1 if n is None else n, d)


def face_rule(k: int, d: int, n: int | None = None) -> QuadRule:
    """Default (k+1)^(d-1)-point rule for a (d-1)-dimensional face."""
    return tensor_rule(k + 1 if n is None else n, d - 1)
