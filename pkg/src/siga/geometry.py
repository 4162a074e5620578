"""NURBS patches, geometric map derivatives to arbitrary order, conforming
multi-patch DOF linkage, point inversion, and model JSON import/export.

A patch is either control-point based (B-spline / NURBS, exact under knot
insertion and Bezier degree elevation, both performed in homogeneous
coordinates) or backed by a closed-form analytic map whose derivatives are
generated symbolically once and cached.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from ._tensors import multi_binom, multi_indices, sub_indices, sub_multi
from .bspline import KnotVector, eval_bspline, make_knot_vector


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# analytic maps
# ---------------------------------------------------------------------------

_ANALYTIC_DEFS = {}


def _register_analytic(name):
    def deco(fn):
        _ANALYTIC_DEFS[name] = fn
        return fn
    return deco


@_register_analytic("polar_annulus")
def _polar_annulus_expr(params):
    """Full annulus: (xi1, xi2) in [0,1]^2, periodic in xi1."""
    r1, r2 = params["R1"], params["R2"]
    x1, x2 = sp.symbols("xi1 xi2")
    rho = r1 + (r2 - r1) * x2
    return [rho * sp.sin(2 * sp.pi * x1), rho * sp.cos(2 * sp.pi * x1)], [x1, x2]


@_register_analytic("cube_sphere")
def _cube_sphere_expr(params):
    """Unit ball from the bi-unit cube."""
    x1, x2, x3 = sp.symbols("xi1 xi2 xi3")
    xs = [x1, x2, x3]
    comps = []
    for i in range(3):
        a, b = xs[(i + 1) % 3], xs[(i + 2) % 3]
        comps.append(xs[i] * sp.sqrt(1 - a**2 / 2 - b**2 / 2 + a**2 * b**2 / 3))
    return comps, xs


class AnalyticMap:
    """Closed-form geometric map with symbolically generated derivatives."""

    def __init__(self, name: str, params: dict | None = None):
        if name not in _ANALYTIC_DEFS:
            raise GeometryError(f"unknown analytic map '{name}'")
        self.name = name
        self.params = dict(params or {})
        self._exprs, self._syms = _ANALYTIC_DEFS[name](self.params)
        self.dim = len(self._exprs)
        self._deriv_cache: dict[tuple[int, ...], object] = {}

    def _deriv_fn(self, beta):
        fn = self._deriv_cache.get(beta)
        if fn is None:
            exprs = []
            for comp in self._exprs:
                e = comp
                for sym, order in zip(self._syms, beta):
                    if order:
                        e = sp.diff(e, sym, order)
                exprs.append(sp.simplify(e))
            fn = sp.lambdify(self._syms, exprs, modules="numpy")
            self._deriv_cache[beta] = fn
        return fn

    def jets(self, xi: np.ndarray, m: int) -> list[np.ndarray]:
        """jets[q] has shape (npts, d) for q=0 and (npts, d, (d,)*q) for q>=1."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        npts, d = xi.shape
        cols = [xi[:, i] for i in range(d)]
        jets = []
        for q in range(m + 1):
            vals = {}
            for beta in multi_indices(q, d):
                res = self._deriv_fn(beta)(*cols)
                arr = np.empty((npts, d))
                for c in range(d):
                    arr[:, c] = np.broadcast_to(res[c], (npts,))
                vals[beta] = arr
            if q == 0:
                jets.append(vals[(0,) * d])
            else:
                packed = np.empty((npts, d) + (d,) * q)
                for tup in np.ndindex(*(d,) * q):
                    beta = [0] * d
                    for t in tup:
                        beta[t] += 1
                    packed[(slice(None), slice(None)) + tup] = vals[tuple(beta)]
                jets.append(packed)
        return jets


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------

@dataclass
class NurbsPatch:
    """Tensor-product patch. Control-point based unless ``analytic`` is set.

    Control points are stored flattened in C order (last direction fastest),
    shape (N, d); weights shape (N,) or None for a polynomial B-spline.
    """

    kvs: list
    control_points: np.ndarray | None = None
    weights: np.ndarray | None = None
    analytic: AnalyticMap | None = None
    _hom: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        d = len(self.kvs)
        if d not in (1, 2, 3):
            raise GeometryError("patches must be 1-, 2- or 3-dimensional")
        counts = tuple(kv.n for kv in self.kvs)
        if self.analytic is not None:
            if self.analytic.dim != d:
                raise GeometryError("analytic map dimension mismatch")
            return
        cps = np.asarray(self.control_points, dtype=float)
        if cps.shape != (int(np.prod(counts)), d):
            raise GeometryError(
                f"expected {int(np.prod(counts))}x{d} control points, got {cps.shape}")
        self.control_points = cps
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.size != cps.shape[0]:
                raise GeometryError("weight count mismatch")
            if np.any(w <= 0):
                raise GeometryError("weights must be strictly positive")
            self.weights = w

    @property
    def dim(self) -> int:
        return len(self.kvs)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(kv.n for kv in self.kvs)

    @property
    def n(self) -> int:
        return int(np.prod(self.shape))

    @property
    def rational(self) -> bool:
        return self.weights is not None

    def hom_points(self) -> np.ndarray:
        """Homogeneous control net (N, d+1): (w*X, w)."""
        if self._hom is None:
            w = self.weights if self.weights is not None else np.ones(self.n)
            self._hom = np.concatenate(
                [self.control_points * w[:, None], w[:, None]], axis=1)
        return self._hom

    def diameter(self) -> float:
        if self.analytic is not None:
            grid = np.stack(np.meshgrid(
                *[np.linspace(*kv.domain, 4) for kv in self.kvs],
                indexing="ij"), axis=-1).reshape(-1, self.dim)
            pts = self.analytic.jets(grid, 0)[0]
        else:
            pts = self.control_points
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


def build_patch(kvs, control_points=None, weights=None, analytic=None) -> NurbsPatch:
    """Validate and build a patch (control-point based or analytic)."""
    return NurbsPatch(list(kvs), control_points, weights, analytic)


# ---------------------------------------------------------------------------
# homogeneous knot insertion and degree elevation
# ---------------------------------------------------------------------------

def _insert_knot_1d(flat, k, pw, u, times=1):
    """Boehm insertion of ``u`` (``times`` times) into an open knot vector.

    pw has the running direction first, shape (n, rest).
    """
    for _ in range(times):
        n = pw.shape[0]
        s = int(np.searchsorted(flat, u, side="right")) - 1
        if u <= flat[k] or u >= flat[-k - 1]:
            raise GeometryError("insertion point must be interior")
        new = np.empty((n + 1,) + pw.shape[1:])
        new[: s - k + 1] = pw[: s - k + 1]
        for i in range(s - k + 1, s + 1):
            a = (u - flat[i]) / (flat[i + k] - flat[i])
            new[i] = a * pw[i] + (1 - a) * pw[i - 1]
        new[s + 1:] = pw[s:]
        flat = np.insert(flat, s + 1, u)
        pw = new
    return flat, pw


def _bezier_elevate_1d(pw, k, times=1):
    """Degree elevation of a single Bezier segment (open, one element)."""
    for _ in range(times):
        n = pw.shape[0]
        assert n == k + 1
        new = np.empty((n + 1,) + pw.shape[1:])
        new[0] = pw[0]
        new[-1] = pw[-1]
        for i in range(1, n):
            a = i / (k + 1)
            new[i] = a * pw[i - 1] + (1 - a) * pw[i]
        pw = new
        k += 1
    return pw


def _kv_from_flat(k, flat, periodic=False):
    bp, mult = np.unique(flat, return_counts=True)
    return KnotVector(k, bp, mult, periodic=periodic)


def _axis_first(arr, shape, axis):
    full = arr.reshape(shape + (arr.shape[-1],))
    moved = np.moveaxis(full, axis, 0)
    return moved.reshape(shape[axis], -1, arr.shape[-1]), moved.shape


def _axis_back(arr2d, moved_shape, axis):
    new_moved = arr2d.reshape((arr2d.shape[0],) + moved_shape[1:])
    full = np.moveaxis(new_moved, 0, axis)
    return full.reshape(-1, full.shape[-1])


def insert_knots(patch: NurbsPatch, direction: int, values, multiplicity=1) -> NurbsPatch:
    """Insert breakpoints into one direction; the geometry is unchanged."""
    kv = patch.kvs[direction]
    values = np.asarray(values, dtype=float)
    if patch.analytic is not None:
        # basis refinement only; the map does not depend on control points
        lo, hi = kv.domain
        if np.any(values <= lo) or np.any(values >= hi):
            raise GeometryError("insertion point must be interior")
        bp_old = kv.breakpoints[:-1] if kv.periodic else kv.breakpoints
        mult_map = {float(b): int(m) for b, m in zip(bp_old, kv.multiplicities)}
        for v in values:
            mult_map[float(v)] = mult_map.get(float(v), 0) + multiplicity
        bps = sorted(mult_map)
        mult = np.array([mult_map[b] for b in bps], dtype=int)
        bp = np.array(bps + [hi]) if kv.periodic else np.array(bps)
        kvs = list(patch.kvs)
        kvs[direction] = KnotVector(kv.degree, bp, mult, kv.periodic)
        return NurbsPatch(kvs, analytic=patch.analytic)
    if kv.periodic:
        raise GeometryError("insertion into periodic control-point directions "
                            "is unsupported")
    flat = kv.flat.copy()
    pw3, moved_shape = _axis_first(patch.hom_points(), patch.shape, direction)
    pw = pw3.reshape(pw3.shape[0], -1)
    for u in values:
        flat, pw = _insert_knot_1d(flat, kv.degree, pw, float(u), multiplicity)
        moved_shape = (pw.shape[0],) + moved_shape[1:]
    kvs = list(patch.kvs)
    kvs[direction] = _kv_from_flat(kv.degree, flat)
    hom = _axis_back(pw, moved_shape, direction)
    w = hom[:, -1]
    return NurbsPatch(kvs, hom[:, :-1] / w[:, None], w)


def elevate_degree(patch: NurbsPatch, times=1) -> NurbsPatch:
    """Exact degree elevation of a single-element (Bezier) patch.

    ``times`` is an int applied to every direction or a per-direction list.
    """
    if patch.analytic is not None:
        raise GeometryError("degree elevation applies to control-point patches")
    times_per = np.broadcast_to(np.asarray(times, dtype=int), (patch.dim,))
    if any(kv.n_elements != 1 or kv.periodic
           for kv, t in zip(patch.kvs, times_per) if t > 0):
        raise GeometryError("degree elevation requires single-element directions")
    hom = patch.hom_points()
    shape = patch.shape
    kvs = list(patch.kvs)
    for direction in range(patch.dim):
        nt = int(times_per[direction])
        if nt == 0:
            continue
        k = kvs[direction].degree
        pw3, moved_shape = _axis_first(hom, shape, direction)
        pw = pw3.reshape(pw3.shape[0], -1)
        for t in range(nt):
            pw = _bezier_elevate_1d(pw, k + t)
        a, b = kvs[direction].domain
        kvs[direction] = make_knot_vector(k + nt, [a, b])
        moved_shape = (pw.shape[0],) + moved_shape[1:]
        hom = _axis_back(pw, moved_shape, direction)
        shape = tuple(kv.n for kv in kvs)
    w = hom[:, -1]
    return NurbsPatch(kvs, hom[:, :-1] / w[:, None], w)


def refine_uniform(patch: NurbsPatch, times=1, multiplicity=1) -> NurbsPatch:
    """Insert span midpoints in every direction, ``times`` over."""
    out = patch
    for _ in range(times):
        for direction in range(out.dim):
            kv = out.kvs[direction]
            mids = 0.5 * (kv.breakpoints[:-1] + kv.breakpoints[1:])
            out = insert_knots(out, direction, mids, multiplicity)
    return out


# ---------------------------------------------------------------------------
# map jets
# ---------------------------------------------------------------------------

@dataclass
class MapJet:
    """Geometric map derivatives at a batch of points.

    jets[0] is x with shape (npts, d); jets[q] for q >= 1 has shape
    (npts, d, d, ..., d) with q trailing parametric axes.
    """

    jets: list

    @property
    def x(self) -> np.ndarray:
        return self.jets[0]

    @property
    def jacobian(self) -> np.ndarray:
        return self.jets[1]


def rational_jets(hom_tables: dict, m: int, d: int) -> dict:
    """Rational derivatives from homogeneous ones via the Leibniz recursion.

    hom_tables maps multi-index -> (npts, d+1) homogeneous derivatives
    (w x, w). Returns multi-index -> (npts, d).
    """
    W0 = hom_tables[(0,) * d][:, d]
    out = {(0,) * d: hom_tables[(0,) * d][:, :d] / W0[:, None]}
    for q in range(1, m + 1):
        for beta in multi_indices(q, d):
            acc = hom_tables[beta][:, :d].copy()
            for gamma in sub_indices(beta):
                c = multi_binom(beta, gamma)
                Wg = hom_tables[gamma][:, d]
                acc -= c * Wg[:, None] * out[sub_multi(beta, gamma)]
            out[beta] = acc / W0[:, None]
    return out


def _point_basis_tables(patch: NurbsPatch, xi, m, sides=None):
    """Per-direction 1D derivative tables at a batch of points.

    Returns list over directions of (vals (npts, m+1, k+1), first (npts,)).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    npts = xi.shape[0]
    tables = []
    for delta, kv in enumerate(patch.kvs):
        side = 1 if sides is None else sides[delta]
        vals = np.empty((npts, m + 1, kv.degree + 1))
        first = np.empty(npts, dtype=int)
        for p in range(npts):
            be = eval_bspline(kv, xi[p, delta], m, side=side)
            vals[p] = be.values[: m + 1]
            first[p] = be.first_index
        tables.append((vals, first))
    return tables, npts


def _gather_windows(patch: NurbsPatch, tables):
    """Homogeneous control point windows (npts, k1+1, ..., kd+1, d+1)."""
    shape = patch.shape
    hom = patch.hom_points()
    idx_axes = []
    for delta, (vals, first) in enumerate(tables):
        k = patch.kvs[delta].degree
        idx = first[:, None] + np.arange(k + 1)[None, :]
        idx_axes.append(np.mod(idx, shape[delta]))
    if patch.dim == 1:
        flat = idx_axes[0]
    elif patch.dim == 2:
        flat = (idx_axes[0][:, :, None] * shape[1] + idx_axes[1][:, None, :])
    else:
        flat = (idx_axes[0][:, :, None, None] * (shape[1] * shape[2])
                + idx_axes[1][:, None, :, None] * shape[2]
                + idx_axes[2][:, None, None, :])
    return hom[flat]


def _hom_tables_at(patch, tables, windows, m):
    """Homogeneous derivative tables A_beta = sum_I d^beta N_I Pw_I."""
    d = patch.dim
    out = {}
    for q in range(m + 1):
        for beta in multi_indices(q, d):
            if d == 1:
                B = tables[0][0][:, beta[0], :]
                out[beta] = np.einsum("pi,pic->pc", B, windows)
            elif d == 2:
                B1 = tables[0][0][:, beta[0], :]
                B2 = tables[1][0][:, beta[1], :]
                out[beta] = np.einsum("pi,pj,pijc->pc", B1, B2, windows)
            else:
                B1 = tables[0][0][:, beta[0], :]
                B2 = tables[1][0][:, beta[1], :]
                B3 = tables[2][0][:, beta[2], :]
                out[beta] = np.einsum("pi,pj,pk,pijkc->pc", B1, B2, B3, windows)
    return out


def jets_from_tables(patch: NurbsPatch, tables, npts: int, m: int) -> MapJet:
    """Map jets from prebuilt per-direction basis tables (control patches)."""
    d = patch.dim
    windows = _gather_windows(patch, tables)
    hom = _hom_tables_at(patch, tables, windows, m)
    vals = rational_jets(hom, m, d)
    jets = [vals[(0,) * d]]
    for q in range(1, m + 1):
        comp = {b: v for b, v in vals.items() if sum(b) == q}
        packed = np.empty((npts, d) + (d,) * q)
        for tup in np.ndindex(*(d,) * q):
            beta = [0] * d
            for t in tup:
                beta[t] += 1
            packed[(slice(None), slice(None)) + tup] = comp[tuple(beta)]
        jets.append(packed)
    return MapJet(jets)


def map_jets(patch: NurbsPatch, xi, m: int, sides=None) -> MapJet:
    """Map derivatives up to order m at a batch of parametric points."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if patch.analytic is not None:
        return MapJet(patch.analytic.jets(xi, m))
    tables, npts = _point_basis_tables(patch, xi, m, sides)
    return jets_from_tables(patch, tables, npts, m)


def map_derivatives(patch: NurbsPatch, xi, m: int) -> MapJet:
    """Map derivatives at one parametric point (batch API: ``map_jets``)."""
    xi = np.asarray(xi, dtype=float).reshape(1, -1)
    for delta in range(patch.dim):
        kv = patch.kvs[delta]
        a, b = kv.domain
        if not kv.periodic and not (a - 1e-12 <= xi[0, delta] <= b + 1e-12):
            raise GeometryError("parametric point outside the patch domain")
    return map_jets(patch, xi, m)


def invert_map(patch: NurbsPatch, x, seed=None, tol_factor=1e-10, maxit=50):
    """Newton point inversion with backtracking: find xi with chi(xi) = x."""
    x = np.asarray(x, dtype=float)
    d = patch.dim
    diam = patch.diameter()
    tol = tol_factor * diam
    lows = np.array([kv.domain[0] for kv in patch.kvs])
    highs = np.array([kv.domain[1] for kv in patch.kvs])
    periodic = np.array([kv.periodic for kv in patch.kvs])
    if seed is None:
        grid = np.stack(np.meshgrid(
            *[np.linspace(lo + 1e-3, hi - 1e-3, 5) for lo, hi in zip(lows, highs)],
            indexing="ij"), axis=-1).reshape(-1, d)
        pts = map_jets(patch, grid, 0).x
        seed = grid[np.argmin(np.linalg.norm(pts - x, axis=1))]
    xi = np.asarray(seed, dtype=float).copy()
    res = None
    for _ in range(maxit):
        jet = map_jets(patch, xi.reshape(1, -1), 1)
        r = x - jet.x[0]
        res = np.linalg.norm(r)
        if res <= tol:
            return xi
        try:
            step = np.linalg.solve(jet.jacobian[0], r)
        except np.linalg.LinAlgError as exc:
            raise GeometryError("singular Jacobian during inversion") from exc
        lam = 1.0
        for _bt in range(30):
            cand = xi + lam * step
            cand = np.where(periodic, lows + (cand - lows) % (highs - lows),
                            np.clip(cand, lows, highs))
            r2 = x - map_jets(patch, cand.reshape(1, -1), 0).x[0]
            if np.linalg.norm(r2) < res:
                xi = cand
                break
            lam *= 0.5
        else:
            break
    raise GeometryError(f"point inversion did not converge (residual {res:.3e})")


# ---------------------------------------------------------------------------
# multi-patch models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Side:
    direction: int
    end: int  # 0 = min, 1 = max

    def as_list(self):
        return [self.direction, self.end]


@dataclass
class InterfaceSpec:
    patch_a: int
    side_a: Side
    patch_b: int
    side_b: Side
    reverse: bool = False


class MultiPatchModel:
    """Conforming multi-patch model with linked scalar DOFs and boundary tags.

    Scalar basis functions of coincident interface control points are linked
    into single global DOFs; velocity DOFs are component-major blocks of size
    n (global velocity index = component * n + scalar index).
    """

    def __init__(self, patches, interfaces=(), boundary_tags=None, metadata=None):
        self.patches = list(patches)
        self.interfaces = list(interfaces)
        self.boundary_tags = {t: [(p, Side(*s) if not isinstance(s, Side) else s)
                                  for (p, s) in sides]
                              for t, sides in (boundary_tags or {}).items()}
        self.metadata = dict(metadata or {})
        self.dim = self.patches[0].dim
        if any(p.dim != self.dim for p in self.patches):
            raise GeometryError("all patches must share the spatial dimension")
        self._link()

    # -- linkage --------------------------------------------------------

    def _side_local_indices(self, p: int, side: Side) -> np.ndarray:
        """Patch-local scalar indices of the control layer on a side,
        ordered by the remaining directions (C order)."""
        patch = self.patches[p]
        shape = patch.shape
        kv = patch.kvs[side.direction]
        if kv.periodic:
            raise GeometryError("periodic directions have no boundary sides")
        grids = []
        for delta, nd in enumerate(shape):
            if delta == side.direction:
                grids.append(np.array([0 if side.end == 0 else nd - 1]))
            else:
                grids.append(np.arange(nd))
        mesh = np.meshgrid(*grids, indexing="ij")
        return np.ravel_multi_index([m.ravel() for m in mesh], shape)

    def _check_conforming(self, spec: InterfaceSpec, ia, ib):
        pa, pb = self.patches[spec.patch_a], self.patches[spec.patch_b]
        if pa.analytic is not None or pb.analytic is not None:
            raise GeometryError("interfaces require control-point patches")
        scale = max(pa.diameter(), pb.diameter(), 1e-30)
        xa = pa.control_points[ia]
        xb = pb.control_points[ib]
        if np.max(np.linalg.norm(xa - xb, axis=1)) > 1e-12 * scale:
            raise GeometryError(
                f"non-conforming interface {spec.patch_a}/{spec.patch_b}: "
                "control points do not coincide")
        wa = pa.weights if pa.weights is not None else np.ones(pa.n)
        wb = pb.weights if pb.weights is not None else np.ones(pb.n)
        if np.max(np.abs(wa[ia] - wb[ib])) > 1e-12:
            raise GeometryError("non-conforming interface: weight mismatch")
        # knot vectors of the in-face directions must match up to affine map
        dirs_a = [d for d in range(self.dim) if d != spec.side_a.direction]
        dirs_b = [d for d in range(self.dim) if d != spec.side_b.direction]
        for da, db in zip(dirs_a, dirs_b):
            ka, kb = pa.kvs[da], pb.kvs[db]
            if ka.degree != kb.degree or ka.n_elements != kb.n_elements:
                raise GeometryError("non-conforming interface: knot mismatch")
            ta = (ka.breakpoints - ka.domain[0]) / ka.period
            tb = (kb.breakpoints - kb.domain[0]) / kb.period
            if spec.reverse:
                tb = 1.0 - tb[::-1]
            if (np.max(np.abs(ta - tb)) > 1e-12
                    or np.any(ka.multiplicities != (kb.multiplicities[::-1]
                                                    if spec.reverse else kb.multiplicities))):
                raise GeometryError("non-conforming interface: knot mismatch")

    def _link(self):
        offsets = np.cumsum([0] + [p.n for p in self.patches])
        total = offsets[-1]
        parent = np.arange(total)

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(i, j):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

        for spec in self.interfaces:
            ia = self._side_local_indices(spec.patch_a, spec.side_a)
            ib = self._side_local_indices(spec.patch_b, spec.side_b)
            if spec.reverse:
                ib = ib[::-1]
            self._check_conforming(spec, ia, ib)
            for a, b in zip(ia, ib):
                union(offsets[spec.patch_a] + a, offsets[spec.patch_b] + b)

        roots = np.array([find(i) for i in range(total)])
        uniq, global_ids = np.unique(roots, return_inverse=True)
        self.n = int(uniq.size)
        self._offsets = offsets
        self.scalar_maps = [global_ids[offsets[p]: offsets[p + 1]]
                            for p in range(len(self.patches))]

    # -- queries ----------------------------------------------------------

    @property
    def n_u(self) -> int:
        return self.dim * self.n

    def tag_sides(self, tag: str):
        if tag not in self.boundary_tags:
            raise GeometryError(f"unknown boundary tag '{tag}'")
        return self.boundary_tags[tag]

    def tag_scalar_dofs(self, tag: str) -> np.ndarray:
        """Sorted global scalar DOFs whose basis functions are nonzero on the
        tagged boundary."""
        out = set()
        for p, side in self.tag_sides(tag):
            loc = self._side_local_indices(p, side)
            out.update(self.scalar_maps[p][loc].tolist())
        return np.array(sorted(out), dtype=int)

    def diameter(self) -> float:
        return max(p.diameter() for p in self.patches)

    def locate(self, x):
        """Find (patch index, xi) containing the physical point x."""
        last_err = None
        for p, patch in enumerate(self.patches):
            try:
                xi = invert_map(patch, x)
            except GeometryError as exc:
                last_err = exc
                continue
            eps = 1e-8
            ok = True
            for delta, kv in enumerate(patch.kvs):
                a, b = kv.domain
                if not kv.periodic and not (a - eps <= xi[delta] <= b + eps):
                    ok = False
            if ok:
                return p, xi
        raise GeometryError(f"point {x} not found in any patch") from last_err


def build_multipatch(patches, interface_specs=(), boundary_tags=None,
                     metadata=None) -> MultiPatchModel:
    return MultiPatchModel(patches, interface_specs, boundary_tags, metadata)


# ---------------------------------------------------------------------------
# JSON import/export
# ---------------------------------------------------------------------------

def _kv_to_json(kv: KnotVector):
    return {"degree": kv.degree,
            "breakpoints": kv.breakpoints.tolist(),
            "multiplicities": kv.multiplicities.tolist(),
            "periodic": kv.periodic}


def _kv_from_json(doc):
    return KnotVector(doc["degree"], np.array(doc["breakpoints"]),
                      np.array(doc["multiplicities"], dtype=int), doc["periodic"])


def model_to_json(model: MultiPatchModel) -> dict:
    patches = []
    for p in model.patches:
        doc = {"knots": [_kv_to_json(kv) for kv in p.kvs]}
        if p.analytic is not None:
            doc["analytic"] = {"name": p.analytic.name, "params": p.analytic.params}
        else:
            doc["control_points"] = p.control_points.tolist()
            doc["weights"] = None if p.weights is None else p.weights.tolist()
        patches.append(doc)
    return {
        "dim": model.dim,
        "patches": patches,
        "interfaces": [{"patches": [s.patch_a, s.patch_b],
                        "sides": [s.side_a.as_list(), s.side_b.as_list()],
                        "reverse": s.reverse} for s in model.interfaces],
        "boundary_tags": {t: [[p, side.direction, side.end] for p, side in sides]
                          for t, sides in model.boundary_tags.items()},
        "metadata": model.metadata,
    }


def model_from_json(doc: dict) -> MultiPatchModel:
    patches = []
    for pd in doc["patches"]:
        kvs = [_kv_from_json(kd) for kd in pd["knots"]]
        if "analytic" in pd:
            patches.append(NurbsPatch(kvs, analytic=AnalyticMap(
                pd["analytic"]["name"], pd["analytic"]["params"])))
        else:
            w = pd.get("weights")
            patches.append(NurbsPatch(kvs, np.array(pd["control_points"]),
                                      None if w is None else np.array(w)))
    interfaces = [InterfaceSpec(i["patches"][0], Side(*i["sides"][0]),
                                i["patches"][1], Side(*i["sides"][1]),
                                i.get("reverse", False))
                  for i in doc.get("interfaces", [])]
    tags = {t: [(e[0], Side(e[1], e[2])) for e in sides]
            for t, sides in doc.get("boundary_tags", {}).items()}
    return MultiPatchModel(patches, interfaces, tags, doc.get("metadata"))


def save_model(model: MultiPatchModel, path):
    with open(path, "w") as fh:
        json.dump(model_to_json(model), fh, indent=1)


def load_model(path) -> MultiPatchModel:
    with open(path) as fh:
        return model_from_json(json.load(fh))
