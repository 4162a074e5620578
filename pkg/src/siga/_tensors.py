"""Multi-index bookkeeping for high-order derivative tensors.

Derivative data is carried in two equivalent forms: per multi-index
(one array per distinct partial derivative) while recursing, and as full
symmetric tensors of shape (..., d, d, ..., d) when contracting with
normals or Jacobians. Orders up to 4 are supported.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def multi_indices(q: int, d: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of total order q in d directions."""
    if q == 0:
        return ((0,) * d,)
    out = []
    for combo in combinations_with_replacement(range(d), q):
        beta = [0] * d
        for c in combo:
            beta[c] += 1
        out.append(tuple(beta))
    return tuple(out)


def index_tuple_to_multi(tup: tuple[int, ...], d: int) -> tuple[int, ...]:
    beta = [0] * d
    for c in tup:
        beta[c] += 1
    return tuple(beta)


def multi_binom(beta, gamma) -> int:
    out = 1
    for b, g in zip(beta, gamma):
        out *= comb(b, g)
    return out


def sub_indices(beta):
    """All gamma with 0 < gamma <= beta componentwise (gamma != 0)."""
    ranges = [range(b + 1) for b in beta]
    out = []

    def rec(i, cur):
        if i == len(beta):
            if any(cur):
                out.append(tuple(cur))
            return
        for v in ranges[i]:
            rec(i + 1, cur + [v])

    rec(0, [])
    return out


def sub_multi(beta, gamma):
    return tuple(b - g for b, g in zip(beta, gamma))


@lru_cache(maxsize=None)
def set_partitions(q: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All partitions of {0..q-1} into nonempty blocks (blocks sorted)."""
    if q == 0:
        return ((),)
    parts = []

    def rec(items, current):
        if not items:
            parts.append(tuple(tuple(b) for b in current))
            return
        first, rest = items[0], items[1:]
        for b in current:
            b.append(first)
            rec(rest, current)
            b.pop()
        current.append([first])
        rec(rest, current)
        current.pop()

    rec(list(range(q)), [])
    return tuple(parts)


def pack_symmetric(values: dict, q: int, d: int, lead_shape) -> np.ndarray:
    """Assemble the full symmetric tensor (lead_shape + (d,)*q) from
    per-multi-index arrays."""
    out = np.empty(tuple(lead_shape) + (d,) * q)
    if q == 0:
        raise ValueError("order must be >= 1")
    for tup in np.ndindex(*(d,) * q):
        out[(...,) + tup] = values[index_tuple_to_multi(tup, d)]
    return out


def contract_normal(tensor: np.ndarray, normal: np.ndarray, q: int) -> np.ndarray:
    """Contract the trailing q axes of ``tensor`` with ``normal`` (..., d).

    The normal broadcasts against the leading axes of the tensor.
    """
    out = tensor
    for _ in range(q):
        out = np.einsum("...i,...i->...", out.reshape(out.shape),
                        _expand(normal, out.ndim))
    return out


def _expand(normal: np.ndarray, target_ndim: int) -> np.ndarray:
    extra = target_ndim - normal.ndim
    shape = normal.shape[:-1] + (1,) * extra + (normal.shape[-1],)
    return normal.reshape(shape)
