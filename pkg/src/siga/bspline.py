"""Univariate B-spline spaces: knot vectors, Cox-de Boor evaluation with
derivatives, per-breakpoint regularity, periodic bases, and an equispaced
Lagrange basis used for sparsity comparisons.

Knot vectors are stored as (breakpoints, multiplicities) rather than flat
arrays so that face regularity can be read off directly; the flat form is
derived on construction. Evaluation at a breakpoint returns the right-limit
span by default (left-limit at the domain end); one-sided traces are
requested with the ``side`` flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class KnotVectorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Degree, strictly increasing breakpoints, per-breakpoint multiplicities.

    Open vectors carry end multiplicity k+1. Periodic vectors store the seam
    multiplicity in ``multiplicities[0]``; the last breakpoint closes the
    period and carries no multiplicity of its own.
    """

    degree: int
    breakpoints: np.ndarray
    multiplicities: np.ndarray
    periodic: bool = False
    # derived, filled in __post_init__
    flat: np.ndarray = field(init=False, repr=False, compare=False)
    n: int = field(init=False, compare=False)

    def __post_init__(self):
        k = self.degree
        bp = np.asarray(self.breakpoints, dtype=float)
        mult = np.asarray(self.multiplicities, dtype=int)
        if k < 0:
            raise KnotVectorError("degree must be non-negative")
        if bp.ndim != 1 or bp.size < 2:
            raise KnotVectorError("need at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise KnotVectorError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "multiplicities", mult)
        if self.periodic:
            if mult.size != bp.size - 1:
                raise KnotVectorError("periodic vector needs one multiplicity "
                                      "per distinct breakpoint")
            if np.any(mult < 1) or np.any(mult > k):
                raise KnotVectorError("periodic multiplicities must lie in [1, k]")
            core = np.repeat(bp[:-1], mult)
            n = core.size
            if n < k + 1:
                raise KnotVectorError("periodic space too small for the degree")
            T = bp[-1] - bp[0]
            ext = np.concatenate([core[n - k:] - T, core, core[: k + 1] + T])
            object.__setattr__(self, "flat", ext)
            object.__setattr__(self, "n", n)
        else:
            if mult.size != bp.size:
                raise KnotVectorError("need one multiplicity per breakpoint")
            if mult[0] != k + 1 or mult[-1] != k + 1:
                raise KnotVectorError("open vector requires end multiplicity k+1")
            if bp.size > 2 and (np.any(mult[1:-1] < 1) or np.any(mult[1:-1] > k + 1)):
                raise KnotVectorError("interior multiplicities must lie in [1, k+1]")
            flat = np.repeat(bp, mult)
            object.__setattr__(self, "flat", flat)
            object.__setattr__(self, "n", flat.size - k - 1)

    # -- basic queries -------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def period(self) -> float:
        a, b = self.domain
        return b - a

    @property
    def n_elements(self) -> int:
        return self.breakpoints.size - 1

    def element_bounds(self, e: int) -> tuple[float, float]:
        return float(self.breakpoints[e]), float(self.breakpoints[e + 1])

    def element_span(self, e: int) -> int:
        """Index into ``flat`` of the span containing element e."""
        k = self.degree
        if self.periodic:
            return k + int(np.sum(self.multiplicities[: e + 1])) - 1
        return k + int(np.sum(self.multiplicities[1: e + 1]))

    def element_first_index(self, e: int) -> int:
        """Global index of the first basis function supported on element e."""
        s = self.element_span(e)
        if self.periodic:
            return (s - 2 * self.degree) % self.n
        return s - self.degree

    def greville(self) -> np.ndarray:
        """Greville abscissae (open vectors only)."""
        if self.periodic:
            raise KnotVectorError("Greville abscissae defined for open vectors")
        k = self.degree
        if k == 0:
            return 0.5 * (self.flat[:-1] + self.flat[1:])
        out = np.empty(self.n)
        for j in range(self.n):
            out[j] = self.flat[j + 1: j + k + 1].mean()
        return out


def make_knot_vector(k, breakpoints, continuities=None, periodic=False):
    """Build a KnotVector from target continuities alpha_i (r_i = k - alpha_i).

    ``continuities`` is a scalar or a list over the interior breakpoints; for
    periodic vectors it covers the seam (entry 0) followed by the interior
    breakpoints. None means maximal regularity k-1 everywhere.
    """
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
        raise KnotVectorError("breakpoints must be strictly increasing")
    n_int = bp.size - 1 if periodic else bp.size - 2
    if continuities is None:
        alphas = np.full(n_int, k - 1, dtype=int)
    else:
        alphas = np.broadcast_to(np.asarray(continuities, dtype=int), (n_int,)).copy()
    if n_int > 0 and (np.any(alphas < 0) or np.any(alphas > k - 1)):
        raise KnotVectorError("continuities must satisfy 0 <= alpha <= k-1")
    if periodic:
        mult = k - alphas
        return KnotVector(k, bp, mult, periodic=True)
    mult = np.concatenate([[k + 1], k - alphas, [k + 1]]).astype(int)
    return KnotVector(k, bp, mult, periodic=False)


def breakpoint_regularity(kv: KnotVector, i: int) -> int:
    """Regularity alpha = k - r_i at breakpoint i (interior, or periodic seam)."""
    m = kv.breakpoints.size
    if kv.periodic:
        if not 0 <= i < m - 1:
            raise KnotVectorError("breakpoint index out of range")
        return kv.degree - int(kv.multiplicities[i])
    if not 0 < i < m - 1:
        raise KnotVectorError("boundary breakpoint of an open vector has no "
                              "interior face")
    return kv.degree - int(kv.multiplicities[i])


@dataclass
class BasisEval:
    """Local nonzero basis values at a point.

    values[d, j] holds the d-th derivative of the j-th local nonzero function;
    there are exactly k+1 local functions. first_index is the global index of
    the first one; for periodic vectors indices wrap modulo n.
    """

    first_index: int
    values: np.ndarray
    n: int
    periodic: bool

    @property
    def indices(self) -> np.ndarray:
        idx = self.first_index + np.arange(self.values.shape[1])
        return idx % self.n if self.periodic else idx


def _find_span(flat: np.ndarray, k: int, u: float, side: int) -> int:
    """Span index s with flat[s] <= u < flat[s+1] (right limit) or
    flat[s] < u <= flat[s+1] (left limit)."""
    lo, hi = flat[k], flat[-k - 1]
    if side >= 0:
        if u >= hi:
            return int(np.searchsorted(flat, hi, side="left")) - 1
        return int(np.searchsorted(flat, u, side="right")) - 1
    if u <= lo:
        return int(np.searchsorted(flat, lo, side="right")) - 1
    return int(np.searchsorted(flat, u, side="left")) - 1


def _ders_basis_funs(flat: np.ndarray, k: int, span: int, u: float,
                     nder: int) -> np.ndarray:
    """All nonzero basis functions and derivatives at u (Cox-de Boor with the
    knot-difference derivative recursion). Returns (nder+1, k+1)."""
    ndu = np.empty((k + 1, k + 1))
    left = np.empty(k + 1)
    right = np.empty(k + 1)
    ndu[0, 0] = 1.0
    for j in range(1, k + 1):
        left[j] = u - flat[span + 1 - j]
        right[j] = flat[span + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    ders = np.zeros((nder + 1, k + 1))
    ders[0, :] = ndu[:, k]
    a = np.empty((2, k + 1))
    for r in range(k + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for dd in range(1, min(nder, k) + 1):
            d = 0.0
            rk = r - dd
            pk = k - dd
            if r >= dd:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = dd - 1 if r - 1 <= pk else k - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, dd] = -a[s1, dd - 1] / ndu[pk + 1, r]
                d += a[s2, dd] * ndu[r, pk]
            ders[dd, r] = d
            s1, s2 = s2, s1
    r = k
    for dd in range(1, min(nder, k) + 1):
        ders[dd, :] *= r
        r *= k - dd
    return ders


def eval_bspline(kv: KnotVector, u: float, max_deriv: int = 0,
                 side: int = 1) -> BasisEval:
    """Evaluate the k+1 nonzero basis functions and derivatives at u.

    side=+1 evaluates the right-limit span (default), side=-1 the left-limit
    span; both agree except at breakpoints with reduced continuity.
    Derivatives of order above k are zero. Periodic inputs are wrapped.
    """
    k = kv.degree
    u = float(u)
    if kv.periodic:
        a, b = kv.domain
        u = a + (u - a) % kv.period
        if side < 0 and u == a:
            u = b
    else:
        a, b = kv.domain
        tol = 1e-12 * max(1.0, abs(a), abs(b))
        if u < a - tol or u > b + tol:
            raise ValueError(f"parameter {u} outside domain [{a}, {b}]")
        u = min(max(u, a), b)
    span = _find_span(kv.flat, k, u, side)
    ders = _ders_basis_funs(kv.flat, k, span, u, max_deriv)
    if kv.periodic:
        first = (span - 2 * k) % kv.n
    else:
        first = span - k
    return BasisEval(first, ders, kv.n, kv.periodic)


def eval_lagrange_1d(k: int, t: float, max_deriv: int = 0) -> BasisEval:
    """Equispaced Lagrange basis on [0, 1]: k+1 nodal polynomials."""
    if k < 1:
        raise ValueError("Lagrange degree must be >= 1")
    nodes = np.linspace(0.0, 1.0, k + 1)
    vals = np.zeros((max_deriv + 1, k + 1))
    for j in range(k + 1):
        roots = np.delete(nodes, j)
        poly = np.polynomial.Polynomial.fromroots(roots)
        poly = poly / poly(nodes[j])
        for d in range(max_deriv + 1):
            vals[d, j] = poly(t)
            poly = poly.deriv()
    return BasisEval(0, vals, k + 1, False)
