"""Batched tabulation of basis values, physical gradients, geometry jets and
quadrature data over all elements of a patch. Assembly, error integration
and boundary fitting all run off these arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bspline import KnotVector, _ders_basis_funs, eval_bspline
from .geometry import GeometryError, MultiPatchModel, NurbsPatch, map_jets
from .quadrature import gauss_rule


@dataclass
class DirTables:
    """Per-direction element tables: values/derivatives of the k+1 local
    functions at each element's quadrature points."""

    kv: KnotVector
    points: np.ndarray    # (nel, nq) parametric coordinates
    weights: np.ndarray   # (nel, nq) quadrature weights (include span length)
    basis: np.ndarray     # (nel, nder+1, nq, k+1)
    first: np.ndarray     # (nel,) first local function index per element
    indices: np.ndarray   # (nel, k+1) function indices (mod n when periodic)


def dir_tables(kv: KnotVector, nq: int, nder: int) -> DirTables:
    rule = gauss_rule(nq)
    nel = kv.n_elements
    k = kv.degree
    pts = np.empty((nel, nq))
    wts = np.empty((nel, nq))
    basis = np.empty((nel, nder + 1, nq, k + 1))
    first = np.empty(nel, dtype=int)
    for e in range(nel):
        lo, hi = kv.element_bounds(e)
        pts[e] = lo + rule.points * (hi - lo)
        wts[e] = rule.weights * (hi - lo)
        span = kv.element_span(e)
        for q in range(nq):
            basis[e, :, q, :] = _ders_basis_funs(kv.flat, k, span, pts[e, q], nder)
        first[e] = kv.element_first_index(e)
    idx = first[:, None] + np.arange(k + 1)[None, :]
    if kv.periodic:
        idx = np.mod(idx, kv.n)
    return DirTables(kv, pts, wts, basis, first, idx)


@dataclass
class ElementBatch:
    """All-element quadrature data for one patch.

    Shapes: N (nel, nq, nloc); gradN (nel, nq, nloc, d) physical; x (nel,
    nq, d); w (nel, nq) = detJ times quadrature weight; gidx (nel, nloc)
    global scalar indices.
    """

    patch_index: int
    N: np.ndarray
    gradN: np.ndarray
    x: np.ndarray
    w: np.ndarray
    gidx: np.ndarray
    element_volumes: np.ndarray  # (nel,)
    nloc: int


def _tensor_values(tabs, derivs):
    """Tensor-product combination of per-direction tables.

    derivs is a tuple of derivative orders per direction. Returns
    (nel, nq, nloc) with nel/nq/nloc in C order over directions.
    """
    d = len(tabs)
    if d == 1:
        t = tabs[0].basis[:, derivs[0]]
        return t  # (nel, nq, k+1)
    if d == 2:
        out = np.einsum("aqi,brj->abqrij",
                        tabs[0].basis[:, derivs[0]], tabs[1].basis[:, derivs[1]])
        na, nb = out.shape[0], out.shape[1]
        nq = out.shape[2] * out.shape[3]
        nl = out.shape[4] * out.shape[5]
        return out.reshape(na * nb, nq, nl)
    out = np.einsum("aqi,brj,csk->abcqrsijk",
                    tabs[0].basis[:, derivs[0]], tabs[1].basis[:, derivs[1]],
                    tabs[2].basis[:, derivs[2]])
    na, nb, nc = out.shape[:3]
    nq = out.shape[3] * out.shape[4] * out.shape[5]
    nl = out.shape[6] * out.shape[7] * out.shape[8]
    return out.reshape(na * nb * nc, nq, nl)


def _local_flat_indices(patch, tabs):
    """Patch-local flat scalar index per element and local function,
    shape (nel, nloc)."""
    shape = patch.shape
    d = patch.dim
    idxs = [t.indices for t in tabs]
    if d == 1:
        return idxs[0]
    if d == 2:
        out = (idxs[0][:, None, :, None] * shape[1]
               + idxs[1][None, :, None, :])
        na, nb, ka, kb = out.shape
        return out.reshape(na * nb, ka * kb)
    out = (idxs[0][:, None, None, :, None, None] * (shape[1] * shape[2])
           + idxs[1][None, :, None, None, :, None] * shape[2]
           + idxs[2][None, None, :, None, None, :])
    na, nb, nc, ka, kb, kc = out.shape
    return out.reshape(na * nb * nc, ka * kb * kc)


def _param_points(tabs):
    d = len(tabs)
    if d == 1:
        return tabs[0].points[:, :, None]
    if d == 2:
        pa, pb = tabs[0].points, tabs[1].points
        na, qa = pa.shape
        nb, qb = pb.shape
        out = np.empty((na, nb, qa, qb, 2))
        out[..., 0] = pa[:, None, :, None]
        out[..., 1] = pb[None, :, None, :]
        return out.reshape(na * nb, qa * qb, 2)
    pa, pb, pc = (t.points for t in tabs)
    na, qa = pa.shape
    nb, qb = pb.shape
    nc, qc = pc.shape
    out = np.empty((na, nb, nc, qa, qb, qc, 3))
    out[..., 0] = pa[:, None, None, :, None, None]
    out[..., 1] = pb[None, :, None, None, :, None]
    out[..., 2] = pc[None, None, :, None, None, :]
    return out.reshape(na * nb * nc, qa * qb * qc, 3)


def _quad_weights(tabs):
    d = len(tabs)
    if d == 1:
        return tabs[0].weights
    if d == 2:
        out = tabs[0].weights[:, None, :, None] * tabs[1].weights[None, :, None, :]
        na, nb, qa, qb = out.shape
        return out.reshape(na * nb, qa * qb)
    out = (tabs[0].weights[:, None, None, :, None, None]
           * tabs[1].weights[None, :, None, None, :, None]
           * tabs[2].weights[None, None, :, None, None, :])
    na, nb, nc, qa, qb, qc = out.shape
    return out.reshape(na * nb * nc, qa * qb * qc)


def element_batch(model: MultiPatchModel, p: int, nq=None) -> ElementBatch:
    """Tabulate one patch at (k+1)^d Gauss points per element by default."""
    patch = model.patches[p]
    d = patch.dim
    kmax = max(kv.degree for kv in patch.kvs)
    nq = nq or (kmax + 1)
    tabs = [dir_tables(kv, nq, 1) for kv in patch.kvs]
    N = _tensor_values(tabs, (0,) * d)
    dN = np.stack([_tensor_values(tabs, tuple(1 if j == delta else 0 for j in range(d)))
                   for delta in range(d)], axis=-1)
    pts = _param_points(tabs)
    wq = _quad_weights(tabs)
    nel, nqt, nloc = N.shape
    locflat = _local_flat_indices(patch, tabs)

    if patch.analytic is not None:
        jets = patch.analytic.jets(pts.reshape(-1, d), 1)
        x = jets[0].reshape(nel, nqt, d)
        J = jets[1].reshape(nel, nqt, d, d)
        R, dR = N, dN
    else:
        hom = patch.hom_points()
        win = hom[locflat]                     # (nel, nloc, d+1)
        A0 = np.einsum("eql,elc->eqc", N, win)
        Ad = np.einsum("eqlg,elc->eqcg", dN, win)
        W0 = A0[..., d]
        x = A0[..., :d] / W0[..., None]
        J = (Ad[:, :, :d, :] - x[..., None] * Ad[:, :, d, None, :]) / W0[..., None, None]
        if patch.rational:
            wloc = patch.weights[locflat]      # (nel, nloc)
            R = wloc[:, None, :] * N / W0[..., None]
            dR = (wloc[:, None, :, None] * dN
                  - R[..., None] * Ad[:, :, None, d, :]) / W0[..., None, None]
        else:
            R, dR = N, dN

    detJ = np.linalg.det(J)
    if np.any(detJ <= 0):
        raise GeometryError(f"non-positive Jacobian determinant in patch {p}")
    Jinv = np.linalg.inv(J)
    gradR = np.einsum("eqlb,eqba->eqla", dR, Jinv)
    w = detJ * wq
    gidx = model.scalar_maps[p][locflat]
    return ElementBatch(p, R, gradR, x, w, gidx, w.sum(axis=1), nloc)


@dataclass
class EdgeBatch:
    """Trace data on one tagged boundary side of a patch."""

    patch_index: int
    T: np.ndarray        # (nE, nq, nloc_edge) trace basis values
    x: np.ndarray        # (nE, nq, d)
    normal: np.ndarray   # (nE, nq, d) outward unit normal
    w: np.ndarray        # (nE, nq) measure times quadrature weight
    gidx: np.ndarray     # (nE, nloc_edge) global scalar indices


def edge_batch(model: MultiPatchModel, p: int, side, nq=None) -> EdgeBatch:
    """Tabulate the trace basis and geometry on a boundary side."""
    patch = model.patches[p]
    d = patch.dim
    delta, end = side.direction, side.end
    kv = patch.kvs[delta]
    if kv.periodic:
        raise GeometryError("periodic directions carry no boundary")
    kmax = max(k.degree for k in patch.kvs)
    nq = nq or (kmax + 1)
    cross = [j for j in range(d) if j != delta]
    tabs = [dir_tables(patch.kvs[c], nq, 0) for c in cross]
    u_b = kv.domain[end]
    be = eval_bspline(kv, u_b, 0, side=+1 if end == 0 else -1)
    bvals = be.values[0]                     # k+1 values on the edge span
    bidx = be.indices

    if d == 2:
        ct = tabs[0]
        nE, nqt = ct.points.shape
        pts = np.empty((nE, nqt, 2))
        pts[..., delta] = u_b
        pts[..., cross[0]] = ct.points
        # local index order: (edge-direction function, cross function)
        kd1 = bvals.size
        kc1 = ct.basis.shape[-1]
        T = (bvals[None, None, :, None]
             * ct.basis[:, 0][:, :, None, :]).reshape(nE, nqt, kd1 * kc1)
        if delta == 0:
            ii = bidx[None, :, None] * patch.shape[1] + ct.indices[:, None, :]
        else:
            ii = ct.indices[:, None, :] * patch.shape[1] + bidx[None, :, None]
        locflat = ii.reshape(nE, kd1 * kc1)
        wq = ct.weights
    else:
        ct1, ct2 = tabs
        nE1, nq1 = ct1.points.shape
        nE2, nq2 = ct2.points.shape
        pts = np.empty((nE1, nE2, nq1, nq2, 3))
        pts[..., delta] = u_b
        pts[..., cross[0]] = ct1.points[:, None, :, None]
        pts[..., cross[1]] = ct2.points[None, :, None, :]
        pts = pts.reshape(nE1 * nE2, nq1 * nq2, 3)
        v1 = ct1.basis[:, 0]   # (nE1, nq1, k1+1)
        v2 = ct2.basis[:, 0]   # (nE2, nq2, k2+1)
        Tf = np.einsum("d,aqi,brj->abqrdij", bvals, v1, v2)
        nloc = bvals.size * v1.shape[-1] * v2.shape[-1]
        T = Tf.reshape(nE1 * nE2, nq1 * nq2, nloc)
        shp = patch.shape
        strides = np.array([shp[1] * shp[2], shp[2], 1])
        ii = np.zeros((nE1, nE2, bvals.size, v1.shape[-1], v2.shape[-1]), dtype=int)
        ii += strides[delta] * bidx[None, None, :, None, None]
        ii += strides[cross[0]] * ct1.indices[:, None, None, :, None]
        ii += strides[cross[1]] * ct2.indices[None, :, None, None, :]
        locflat = ii.reshape(nE1 * nE2, nloc)
        wq = (ct1.weights[:, None, :, None] * ct2.weights[None, :, None, :]
              ).reshape(nE1 * nE2, nq1 * nq2)

    nE, nqt, _ = T.shape
    sides = [1] * d
    sides[delta] = -1 if end == 1 else 1
    jet = map_jets(patch, pts.reshape(-1, d), 1, sides=sides)
    x = jet.x.reshape(nE, nqt, d)
    J = jet.jacobian.reshape(nE, nqt, d, d)
    if patch.rational:
        wloc = patch.weights[locflat]
        Wq = np.einsum("eql,el->eq", T, wloc)
        T = wloc[:, None, :] * T / Wq[..., None]
    if d == 2:
        c = cross[0]
        tang = J[..., c]
        meas = np.linalg.norm(tang, axis=-1)
    else:
        t1 = J[..., cross[0]]
        t2 = J[..., cross[1]]
        meas = np.linalg.norm(np.cross(t1, t2), axis=-1)
    Jinv = np.linalg.inv(J)
    nvec = Jinv[:, :, delta, :] * (1.0 if end == 1 else -1.0)
    nvec = nvec / np.linalg.norm(nvec, axis=-1, keepdims=True)
    gidx = model.scalar_maps[p][locflat]
    return EdgeBatch(p, T, x, nvec, meas * wq, gidx)


class Discretization:
    """Cached tabulation for a model: element batches per patch plus element
    volume lookups used by skeleton length-scale variants."""

    def __init__(self, model: MultiPatchModel, nq=None):
        self.model = model
        self.nq = nq
        self._batches: dict[int, ElementBatch] = {}
        self._edges: dict = {}

    def batch(self, p: int) -> ElementBatch:
        if p not in self._batches:
            self._batches[p] = element_batch(self.model, p, self.nq)
        return self._batches[p]

    def batches(self):
        return [self.batch(p) for p in range(len(self.model.patches))]

    def edge(self, p: int, side) -> EdgeBatch:
        key = (p, side.direction, side.end)
        if key not in self._edges:
            self._edges[key] = edge_batch(self.model, p, side, self.nq)
        return self._edges[key]

    def element_volume(self, p: int):
        return self.batch(p).element_volumes
