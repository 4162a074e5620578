"""Mesh skeleton: interior faces with per-face regularity, length scales and
normals, plus evaluation of high-order physical derivatives and their jumps
across faces.

Faces are grouped into planes (all faces sharing one parametric breakpoint,
or one patch interface); jump tables are evaluated plane-wise and fully
vectorized over the faces of a plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._tensors import multi_binom, multi_indices, set_partitions, sub_indices, sub_multi
from .bspline import eval_bspline
from .geometry import (GeometryError, MultiPatchModel, jets_from_tables,
                       map_jets, rational_jets)
from .tabulate import dir_tables


@dataclass
class Face:
    kind: str                      # "intra" or "inter"
    patches: tuple                 # (p,) intra, (pa, pb) inter
    direction: int                 # normal parametric direction (on patch A)
    location: int                  # breakpoint index (intra) / interface index
    cross_index: tuple             # cross-direction element multi-index
    elements: tuple                # adjacent delta-elements (K+, K-) on patch A
    alpha: int
    h: float


@dataclass
class FacePlane:
    kind: str
    patch: int
    direction: int
    location: int                  # breakpoint index or interface index
    alpha: int
    n_faces: int
    face_offset: int
    seam: bool = False
    h: np.ndarray = field(default=None, repr=False)


@dataclass
class MeshSkeleton:
    faces: list
    planes: list
    h_mode: str

    @property
    def intra(self):
        return [f for f in self.faces if f.kind == "intra"]

    @property
    def inter(self):
        return [f for f in self.faces if f.kind == "inter"]


# ---------------------------------------------------------------------------
# physical derivatives via chain-rule inversion
# ---------------------------------------------------------------------------

_PLETTERS = "stuv"
_CLETTERS = "abcd"


def physical_partials_tables(param: dict, jets, m: int):
    """Physical derivative tensors of basis functions from parametric ones.

    param maps multi-index -> (npts, nfun); jets is the geometric MapJet list
    (one-sided where relevant). Returns phys[q]: (npts, nfun) for q=0 and
    (npts, nfun, (d,)*q) for q >= 1. Exact for fields polynomial in physical
    coordinates.
    """
    x = jets[0]
    npts, d = x.shape
    Jinv = np.linalg.inv(jets[1]) if m >= 1 else None
    nfun = param[(0,) * d].shape[1]
    phys = [param[(0,) * d]]
    for q in range(1, m + 1):
        T = np.empty((npts, nfun) + (d,) * q)
        for tup in np.ndindex(*(d,) * q):
            beta = [0] * d
            for t in tup:
                beta[t] += 1
            T[(slice(None), slice(None)) + tup] = param[tuple(beta)]
        for blocks in set_partitions(q):
            r = len(blocks)
            if r == q:
                continue  # the all-singleton partition carries the unknown
            operands = [phys[r]]
            expr_parts = ["pf" + _CLETTERS[:r]]
            for j, block in enumerate(blocks):
                operands.append(jets[len(block)])
                expr_parts.append("p" + _CLETTERS[j]
                                  + "".join(_PLETTERS[s] for s in block))
            out_sub = "pf" + _PLETTERS[:q]
            T -= np.einsum(",".join(expr_parts) + "->" + out_sub, *operands)
        expr = ("pf" + _PLETTERS[:q] + ","
                + ",".join("p" + _PLETTERS[i] + _CLETTERS[i] for i in range(q))
                + "->pf" + _CLETTERS[:q])
        phys.append(np.einsum(expr, T, *([Jinv] * q)))
    return phys


def physical_partials(model: MultiPatchModel, p: int, xi, m: int, sides=None):
    """Physical partial-derivative tensors of all basis functions supported
    at one parametric point. Returns (global indices, [phys per order])."""
    if m > 4:
        raise ValueError("derivative order limited to 4")
    patch = model.patches[p]
    d = patch.dim
    xi = np.asarray(xi, dtype=float).ravel()
    evals = []
    for delta, kv in enumerate(patch.kvs):
        side = 1 if sides is None else sides[delta]
        evals.append(eval_bspline(kv, xi[delta], m, side=side))
    param, locflat = _tensor_param_tables(patch, evals, m)
    jets = _side_jets(patch, xi[None, :], evals, m)
    phys = physical_partials_tables(param, jets.jets, m)
    gidx = model.scalar_maps[p][locflat[0]]
    return gidx, [ph[0] for ph in phys]


def _tensor_param_tables(patch, evals, m):
    """Parametric partials of the span basis functions at single points.

    evals: list of BasisEval per direction (one point). Returns (param dict
    beta -> (1, nloc), locflat (1, nloc)).
    """
    d = patch.dim
    shape = patch.shape
    strides = [int(np.prod(shape[j + 1:])) for j in range(d)]
    idxs = [be.indices for be in evals]
    loc = 0
    for delta in range(d):
        sl = [None] * d
        sl[delta] = slice(None)
        loc = loc + strides[delta] * idxs[delta][tuple(sl)]
    locflat = loc.reshape(1, -1)
    param = {}
    for q in range(m + 1):
        for beta in multi_indices(q, d):
            v = evals[0].values[beta[0]]
            for delta in range(1, d):
                v = np.multiply.outer(v, evals[delta].values[beta[delta]])
            param[beta] = v.reshape(1, -1)
    if patch.rational:
        param = _rationalize_param(patch, param, locflat, m)
    return param, locflat


def _rationalize_param(patch, param, locflat, m):
    """Convert B-spline parametric partials to NURBS ones (per side)."""
    d = patch.dim
    wloc = patch.weights[locflat]            # (npts, nloc)
    Wtab = {beta: np.einsum("pl,pl->p", param[beta], wloc)
            for q in range(m + 1) for beta in multi_indices(q, d)}
    out = {}
    zero = (0,) * d
    W0 = Wtab[zero]
    out[zero] = wloc * param[zero] / W0[:, None]
    for q in range(1, m + 1):
        for beta in multi_indices(q, d):
            acc = wloc * param[beta]
            for gamma in sub_indices(beta):
                c = multi_binom(beta, gamma)
                acc = acc - c * Wtab[gamma][:, None] * out[sub_multi(beta, gamma)]
            out[beta] = acc / W0[:, None]
    return out


def _side_jets(patch, xi, evals, m):
    if patch.analytic is not None:
        return map_jets(patch, xi, m)
    npts = xi.shape[0]
    tables = [(be.values[None, : m + 1, :].repeat(npts, 0),
               np.full(npts, be.first_index, dtype=int)) for be in evals]
    return jets_from_tables(patch, tables, npts, m)


# ---------------------------------------------------------------------------
# skeleton construction
# ---------------------------------------------------------------------------

def _cross_dirs(d, delta):
    return [c for c in range(d) if c != delta]


def build_skeleton(model: MultiPatchModel, h_mode: str = "face",
                   nq: int | None = None, disc=None) -> MeshSkeleton:
    """Enumerate interior faces with regularity alpha(F) and length h_F.

    h_mode selects the length-scale definition: "face" (face length in 2D,
    face diameter in 3D; the default used for all reported results),
    "volume_ratio" (half the adjacent-element volume sum over the face
    measure) or "volume_mean" (mean of the adjacent elements' d-th measure
    roots).
    """
    faces: list[Face] = []
    planes: list[FacePlane] = []
    d = model.dim
    for p, patch in enumerate(model.patches):
        for delta in range(d):
            kv = patch.kvs[delta]
            nbp = kv.breakpoints.size
            interior = list(range(1, nbp - 1))
            if kv.periodic:
                interior = [0] + interior
            for i in interior:
                seam = kv.periodic and i == 0
                alpha = kv.degree - int(kv.multiplicities[i])
                plane = FacePlane("intra", p, delta, i, alpha, 0, len(faces),
                                  seam=seam)
                _emit_plane_faces(model, plane, faces, h_mode, nq, disc)
                planes.append(plane)
    for idx, spec in enumerate(model.interfaces):
        plane = FacePlane("inter", spec.patch_a, spec.side_a.direction, idx,
                          0, 0, len(faces))
        _emit_plane_faces(model, plane, faces, h_mode, nq, disc)
        planes.append(plane)
    return MeshSkeleton(faces, planes, h_mode)


def _plane_cross_elements(model, plane):
    patch = model.patches[plane.patch]
    cross = _cross_dirs(model.dim, plane.direction)
    return [patch.kvs[c].n_elements for c in cross]


def _emit_plane_faces(model, plane, faces, h_mode, nq, disc):
    d = model.dim
    patch = model.patches[plane.patch]
    delta = plane.direction
    kv = patch.kvs[delta]
    cross_els = _plane_cross_elements(model, plane)
    n_faces = int(np.prod(cross_els)) if cross_els else 1
    plane.n_faces = n_faces
    h = _plane_h(model, plane, h_mode, nq, disc)
    plane.h = h
    if plane.kind == "intra":
        if plane.seam:
            e_minus, e_plus = kv.n_elements - 1, 0
        else:
            e_minus, e_plus = plane.location - 1, plane.location
        pk = (plane.patch,)
    else:
        spec = model.interfaces[plane.location]
        side = spec.side_a
        e_minus = 0 if side.end == 0 else kv.n_elements - 1
        e_plus = -1
        pk = (spec.patch_a, spec.patch_b)
    for fi in range(n_faces):
        ci = tuple(np.unravel_index(fi, cross_els)) if cross_els else ()
        faces.append(Face(plane.kind, pk, delta, plane.location, ci,
                          (e_minus, e_plus), plane.alpha, float(h[fi])))


def _plane_points(model, plane, nq, nder=1):
    """Quadrature points, cross tables and geometry jets of one plane side.

    Returns dict with the plane quadrature layout shared by both sides.
    """
    d = model.dim
    patch = model.patches[plane.patch]
    delta = plane.direction
    kmax = max(kv.degree for kv in patch.kvs)
    nq = nq or (kmax + 1)
    cross = _cross_dirs(d, delta)
    ctabs = [dir_tables(patch.kvs[c], nq, nder) for c in cross]
    if plane.kind == "intra":
        u_b = patch.kvs[delta].breakpoints[plane.location]
    else:
        spec = model.interfaces[plane.location]
        u_b = patch.kvs[delta].domain[spec.side_a.end]
    if d == 2:
        ct = ctabs[0]
        nF, nqt = ct.points.shape
        pts = np.empty((nF, nqt, 2))
        pts[..., delta] = u_b
        pts[..., cross[0]] = ct.points
        wq = ct.weights
    else:
        c1, c2 = ctabs
        n1, q1 = c1.points.shape
        n2, q2 = c2.points.shape
        pts = np.empty((n1, n2, q1, q2, 3))
        pts[..., delta] = u_b
        pts[..., cross[0]] = c1.points[:, None, :, None]
        pts[..., cross[1]] = c2.points[None, :, None, :]
        pts = pts.reshape(n1 * n2, q1 * q2, 3)
        wq = (c1.weights[:, None, :, None]
              * c2.weights[None, :, None, :]).reshape(n1 * n2, q1 * q2)
    return {"pts": pts, "wq": wq, "ctabs": ctabs, "cross": cross, "u_b": u_b,
            "nq": nq}


def _plane_h(model, plane, h_mode, nq, disc):
    d = model.dim
    patch = model.patches[plane.patch]
    lay = _plane_points(model, plane, nq)
    pts, wq, cross = lay["pts"], lay["wq"], lay["cross"]
    nF, nqt, _ = pts.shape
    jets = map_jets(patch, pts.reshape(-1, d), 1)
    J = jets.jacobian.reshape(nF, nqt, d, d)
    if d == 2:
        meas = np.linalg.norm(J[..., cross[0]], axis=-1)
    else:
        meas = np.linalg.norm(np.cross(J[..., cross[0]], J[..., cross[1]]),
                              axis=-1)
    area = (meas * wq).sum(axis=1)
    if h_mode == "face":
        if d == 2:
            return area
        # physical diameter of the mapped cross-element corner points
        return _face_diameters(model, plane)
    if disc is None:
        raise ValueError("h_mode variants need a Discretization for volumes")
    vol_m, vol_p = _adjacent_volumes(model, plane, disc)
    if h_mode == "volume_ratio":
        return (vol_m + vol_p) / (2.0 * area)
    if h_mode == "volume_mean":
        return 0.5 * (vol_m ** (1.0 / d) + vol_p ** (1.0 / d))
    raise ValueError(f"unknown h_mode '{h_mode}'")


def _face_diameters(model, plane):
    d = model.dim
    patch = model.patches[plane.patch]
    cross = _cross_dirs(d, plane.direction)
    lay_u = _plane_points(model, plane, 1)
    bps = [patch.kvs[c].breakpoints for c in cross]
    n1, n2 = len(bps[0]) - 1, len(bps[1]) - 1
    corners = np.empty((n1, n2, 2, 2, d))
    for a in range(2):
        for b in range(2):
            grid = np.empty((n1, n2, d))
            grid[..., plane.direction] = lay_u["u_b"]
            grid[..., cross[0]] = bps[0][a: n1 + a, None]
            grid[..., cross[1]] = bps[1][None, b: n2 + b]
            corners[:, :, a, b] = map_jets(patch, grid.reshape(-1, d), 0
                                           ).x.reshape(n1, n2, d)
    pts = corners.reshape(n1 * n2, 4, d)
    diam = np.zeros(n1 * n2)
    for i, j in combinations(range(4), 2):
        diam = np.maximum(diam, np.linalg.norm(pts[:, i] - pts[:, j], axis=-1))
    return diam


def _element_flat(patch, delta, e_delta, cross, cross_grid_shape):
    """Flat element indices for all cross elements at a fixed delta element."""
    els = [None] * patch.dim
    shape = [kv.n_elements for kv in patch.kvs]
    strides = [int(np.prod(shape[j + 1:])) for j in range(patch.dim)]
    out = np.full(cross_grid_shape if cross_grid_shape else (1,), 0, dtype=int)
    out = out + strides[delta] * e_delta
    if len(cross) == 1:
        out = out + strides[cross[0]] * np.arange(shape[cross[0]])
    elif len(cross) == 2:
        out = (out
               + strides[cross[0]] * np.arange(shape[cross[0]])[:, None]
               + strides[cross[1]] * np.arange(shape[cross[1]])[None, :])
    return out.ravel()


def _adjacent_volumes(model, plane, disc):
    d = model.dim
    cross = _cross_dirs(d, plane.direction)
    if plane.kind == "intra":
        patch = model.patches[plane.patch]
        kv = patch.kvs[plane.direction]
        if plane.seam:
            em, ep = kv.n_elements - 1, 0
        else:
            em, ep = plane.location - 1, plane.location
        shape = tuple(k.n_elements for k in patch.kvs)
        cshape = tuple(shape[c] for c in cross)
        vols = disc.element_volume(plane.patch)
        vm = vols[_element_flat(patch, plane.direction, em, cross, cshape)]
        vp = vols[_element_flat(patch, plane.direction, ep, cross, cshape)]
        return vm, vp
    spec = model.interfaces[plane.location]
    pa, pb = model.patches[spec.patch_a], model.patches[spec.patch_b]
    ea = 0 if spec.side_a.end == 0 else pa.kvs[spec.side_a.direction].n_elements - 1
    eb = 0 if spec.side_b.end == 0 else pb.kvs[spec.side_b.direction].n_elements - 1
    ca = _cross_dirs(d, spec.side_a.direction)
    cb = _cross_dirs(d, spec.side_b.direction)
    sa = tuple(pa.kvs[c].n_elements for c in ca)
    sb = tuple(pb.kvs[c].n_elements for c in cb)
    va = disc.element_volume(spec.patch_a)[
        _element_flat(pa, spec.side_a.direction, ea, ca, sa)]
    vb = disc.element_volume(spec.patch_b)[
        _element_flat(pb, spec.side_b.direction, eb, cb, sb)]
    if spec.reverse:
        vb = vb[::-1]
    return va, vb


# ---------------------------------------------------------------------------
# jump tables
# ---------------------------------------------------------------------------

@dataclass
class PlaneJump:
    """Normal-derivative jump data of one plane: jump[f, q, l] holds
    [[d_n^m R]] of union function l at quadrature point q of face f."""

    jump: np.ndarray
    gidx: np.ndarray
    w: np.ndarray          # face measure times quadrature weight
    normal: np.ndarray
    x: np.ndarray
    m: int


def _side_tables_intra(model, plane, side_sign, m, lay):
    """Parametric tables, local indices and jets for one side of an intra
    plane. side_sign -1 is the lower-parameter (K+) side."""
    patch = model.patches[plane.patch]
    kv = patch.kvs[plane.direction]
    be = eval_bspline(kv, lay["u_b"], max(m, 1), side=side_sign)
    return _assemble_side(model, plane, patch, be, side_sign, m, lay)


def _assemble_side(model, plane, patch, be, side_sign, m, lay, mapped_pts=None):
    d = patch.dim
    delta = plane.direction
    cross = lay["cross"]
    ctabs = lay["ctabs"]
    pts = lay["pts"] if mapped_pts is None else mapped_pts
    nF, nqt, _ = pts.shape
    kd = patch.kvs[delta].degree
    shape = patch.shape
    strides = [int(np.prod(shape[j + 1:])) for j in range(d)]
    idx_d = be.indices
    # parametric partial tables for the side's span functions
    param = {}
    if d == 2:
        ct = ctabs[0]
        for q in range(m + 1):
            for beta in multi_indices(q, d):
                P = np.einsum("i,aqj->aqij", be.values[beta[delta]],
                              ct.basis[:, beta[cross[0]]])
                param[beta] = P.reshape(nF, nqt, -1)
        loc = (strides[delta] * idx_d[None, :, None]
               + strides[cross[0]] * ct.indices[:, None, :])
        locflat = loc.reshape(nF, -1)
        mg = max(m, 1)
        tabs_geom = [None, None]
        tabs_geom[delta] = (np.broadcast_to(be.values[None, : mg + 1, :],
                                            (nF * nqt, mg + 1, kd + 1)),
                            np.full(nF * nqt, be.first_index, dtype=int))
        cb = ct.basis[:, : mg + 1]          # (nE, mg+1, nq, k+1)
        cvals = np.transpose(cb, (0, 2, 1, 3)).reshape(nF * nqt, mg + 1, -1)
        cfirst = np.repeat(ct.first, nqt)
        tabs_geom[cross[0]] = (cvals, cfirst)
    else:
        c1, c2 = ctabs
        n1, q1 = c1.points.shape
        n2, q2 = c2.points.shape
        for q in range(m + 1):
            for beta in multi_indices(q, d):
                P = np.einsum("i,aqj,brk->abqrijk", be.values[beta[delta]],
                              c1.basis[:, beta[cross[0]]],
                              c2.basis[:, beta[cross[1]]])
                param[beta] = P.reshape(nF, nqt, -1)
        loc = (strides[delta] * idx_d[None, None, :, None, None]
               + strides[cross[0]] * c1.indices[:, None, None, :, None]
               + strides[cross[1]] * c2.indices[None, :, None, None, :])
        locflat = loc.reshape(nF, -1)
        mg = max(m, 1)
        tabs_geom = [None, None, None]
        tabs_geom[delta] = (np.broadcast_to(be.values[None, : mg + 1, :],
                                            (nF * nqt, mg + 1, kd + 1)),
                            np.full(nF * nqt, be.first_index, dtype=int))
        b1 = np.transpose(c1.basis[:, : mg + 1], (0, 2, 1, 3))
        v1 = np.broadcast_to(b1[:, None, :, None, :, :],
                             (n1, n2, q1, q2, mg + 1, b1.shape[-1])
                             ).reshape(nF * nqt, mg + 1, -1)
        f1 = np.broadcast_to(c1.first[:, None, None, None], (n1, n2, q1, q2)
                             ).reshape(-1)
        b2 = np.transpose(c2.basis[:, : mg + 1], (0, 2, 1, 3))
        v2 = np.broadcast_to(b2[None, :, None, :, :, :],
                             (n1, n2, q1, q2, mg + 1, b2.shape[-1])
                             ).reshape(nF * nqt, mg + 1, -1)
        f2 = np.broadcast_to(c2.first[None, :, None, None], (n1, n2, q1, q2)
                             ).reshape(-1)
        tabs_geom[cross[0]] = (v1, f1)
        tabs_geom[cross[1]] = (v2, f2)

    nloc = locflat.shape[1]
    param_flat = {b: v.reshape(nF * nqt, nloc) for b, v in param.items()}
    loc_pt = np.broadcast_to(locflat[:, None, :], (nF, nqt, nloc)
                             ).reshape(nF * nqt, nloc)
    if patch.rational:
        param_flat = _rationalize_param(patch, param_flat, loc_pt, m)
    m_geo = max(m, 1)   # the Jacobian is always needed for normals/measures
    if patch.analytic is not None:
        jets = map_jets(patch, pts.reshape(-1, d), m_geo)
    else:
        jets = jets_from_tables(patch, tabs_geom, nF * nqt, m_geo)
    return param_flat, locflat, jets


def plane_jump_tables(model: MultiPatchModel, plane: FacePlane, m: int,
                      nq: int | None = None) -> PlaneJump:
    """Jumps of the m-th normal derivative of every basis function with
    support on the plane's faces, at face quadrature points."""
    d = model.dim
    lay = _plane_points(model, plane, nq, max(m, 1))
    nF = plane.n_faces
    nqt = lay["pts"].shape[1]
    if plane.kind == "intra":
        patch = model.patches[plane.patch]
        kv = patch.kvs[plane.direction]
        pm, lm, jm = _side_tables_intra(model, plane, -1, m, lay)
        pp, lp, jp = _side_tables_intra(model, plane, +1, m, lay)
        phys_m = physical_partials_tables(pm, jm.jets, m)[m]
        phys_p = physical_partials_tables(pp, jp.jets, m)[m]
        Jinv = np.linalg.inv(jm.jets[1])
        nvec = Jinv[:, plane.direction, :]
        nvec = nvec / np.linalg.norm(nvec, axis=-1, keepdims=True)
        nd_m = _contract(phys_m, nvec, m)
        nd_p = _contract(phys_p, nvec, m)
        k = kv.degree
        if plane.seam:
            r = int(kv.multiplicities[0])
        else:
            r = int(kv.multiplicities[plane.location])
        n_un = k + 1 + r
        ncross = nd_m.shape[1] // (k + 1)   # cross-direction function block
        jump = np.zeros((nF * nqt, n_un * ncross))
        jump[:, : (k + 1) * ncross] += nd_m
        jump[:, r * ncross: (r + k + 1) * ncross] -= nd_p
        # union local indices: from the left span's first function
        be_m = eval_bspline(kv, lay["u_b"], 0, side=-1)
        first_un = be_m.first_index
        idx_un = first_un + np.arange(n_un)
        if kv.periodic:
            idx_un = np.mod(idx_un, kv.n)
        gidx = _union_global(model, plane, idx_un, lay)
        x = jm.jets[0]
    else:
        spec = model.interfaces[plane.location]
        pa = model.patches[spec.patch_a]
        pb = model.patches[spec.patch_b]
        kva = pa.kvs[spec.side_a.direction]
        side_a = -1 if spec.side_a.end == 1 else +1
        bea = eval_bspline(kva, kva.domain[spec.side_a.end], max(m, 1), side=side_a)
        pa_tab, la, ja = _assemble_side(model, plane, pa, bea, side_a, m, lay)
        phys_a = physical_partials_tables(pa_tab, ja.jets, m)[m]
        Jinv = np.linalg.inv(ja.jets[1])
        sign = 1.0 if spec.side_a.end == 1 else -1.0
        nvec = sign * Jinv[:, spec.side_a.direction, :]
        nvec = nvec / np.linalg.norm(nvec, axis=-1, keepdims=True)
        # side B evaluated at the mapped points of its own patch
        lay_b, planeb = _mirror_layout(model, plane, lay, nq)
        kvb = pb.kvs[spec.side_b.direction]
        side_b = -1 if spec.side_b.end == 1 else +1
        beb = eval_bspline(kvb, kvb.domain[spec.side_b.end], max(m, 1), side=side_b)
        pb_tab, lb, jb = _assemble_side(model, planeb, pb, beb, side_b, m, lay_b)
        phys_b = physical_partials_tables(pb_tab, jb.jets, m)[m]
        nd_a = _contract(phys_a, nvec, m)
        nd_b = _contract(phys_b, nvec, m)
        jump = np.concatenate([nd_a, -nd_b], axis=1)
        ga = model.scalar_maps[spec.patch_a][la]
        gb = model.scalar_maps[spec.patch_b][lb]
        gidx = np.concatenate([ga, gb], axis=1)
        x = ja.jets[0]
    # face measure from the K+ side tangents
    Jpt = (jm if plane.kind == "intra" else ja).jets[1].reshape(nF, nqt, d, d)
    cross = lay["cross"]
    if d == 2:
        meas = np.linalg.norm(Jpt[..., cross[0]], axis=-1)
    else:
        meas = np.linalg.norm(np.cross(Jpt[..., cross[0]], Jpt[..., cross[1]]),
                              axis=-1)
    return PlaneJump(jump.reshape(nF, nqt, -1), gidx,
                     meas * lay["wq"], nvec.reshape(nF, nqt, d),
                     x.reshape(nF, nqt, d), m)


def _mirror_layout(model, plane, lay, nq):
    """Layout of the B side of an interface: same physical points expressed
    in the B patch's parameters."""
    spec = model.interfaces[plane.location]
    pb = model.patches[spec.patch_b]
    d = model.dim
    if d != 2:
        raise GeometryError("inter-patch faces are supported in 2D only")
    ca = _cross_dirs(d, spec.side_a.direction)[0]
    cb = _cross_dirs(d, spec.side_b.direction)[0]
    kva_c = model.patches[spec.patch_a].kvs[ca]
    kvb_c = pb.kvs[cb]
    ta = (lay["pts"][..., ca] - kva_c.domain[0]) / kva_c.period
    if spec.reverse:
        ta = 1.0 - ta
    u_cb = kvb_c.domain[0] + ta * kvb_c.period
    u_bb = pb.kvs[spec.side_b.direction].domain[spec.side_b.end]
    nF, nqt = u_cb.shape
    pts = np.empty((nF, nqt, 2))
    pts[..., spec.side_b.direction] = u_bb
    pts[..., cb] = u_cb
    # cross tables of patch B evaluated at the mapped points, element-aligned
    ctb = _point_dir_tables(kvb_c, u_cb, lay["nq"])
    plane_b = FacePlane("inter", spec.patch_b, spec.side_b.direction,
                        plane.location, 0, nF, 0)
    lay_b = {"pts": pts, "wq": lay["wq"], "ctabs": [ctb], "cross": [cb],
             "u_b": u_bb, "nq": lay["nq"]}
    return lay_b, plane_b


def _point_dir_tables(kv, upts, nq):
    """DirTables-like structure for explicit per-face cross points."""
    from .bspline import _ders_basis_funs, _find_span

    nF, nqt = upts.shape
    k = kv.degree
    m = 4
    basis = np.empty((nF, m + 1, nqt, k + 1))
    first = np.empty(nF, dtype=int)
    for f in range(nF):
        for q in range(nqt):
            s = _find_span(kv.flat, k, upts[f, q], 1)
            basis[f, :, q, :] = _ders_basis_funs(kv.flat, k, s, upts[f, q], m)
            fi = s - k if not kv.periodic else (s - 2 * k) % kv.n
        first[f] = fi
    idx = first[:, None] + np.arange(k + 1)
    if kv.periodic:
        idx = np.mod(idx, kv.n)
    from .tabulate import DirTables
    return DirTables(kv, upts, np.zeros_like(upts), basis, first, idx)


def _union_global(model, plane, idx_un, lay):
    patch = model.patches[plane.patch]
    d = patch.dim
    shape = patch.shape
    strides = [int(np.prod(shape[j + 1:])) for j in range(d)]
    cross = lay["cross"]
    ctabs = lay["ctabs"]
    delta = plane.direction
    if d == 2:
        loc = (strides[delta] * idx_un[None, :, None]
               + strides[cross[0]] * ctabs[0].indices[:, None, :])
        locflat = loc.reshape(loc.shape[0], -1)
    else:
        c1, c2 = ctabs
        n1 = c1.indices.shape[0]
        n2 = c2.indices.shape[0]
        loc = (strides[delta] * idx_un[None, None, :, None, None]
               + strides[cross[0]] * c1.indices[:, None, None, :, None]
               + strides[cross[1]] * c2.indices[None, :, None, None, :])
        locflat = loc.reshape(n1 * n2, -1)
    return model.scalar_maps[plane.patch][locflat]


def _contract(phys_m, nvec, m):
    out = phys_m
    for _ in range(m):
        n_exp = nvec.reshape(nvec.shape[0], *([1] * (out.ndim - 2)), nvec.shape[1])
        out = (out * n_exp).sum(axis=-1)
    return out


def face_jump(model: MultiPatchModel, skeleton: MeshSkeleton, face: Face,
              m: int, nq: int | None = None):
    """Jump values of the m-th normal derivative for one face.

    Returns (gidx (nloc,), jump (nq, nloc), x (nq, d), w (nq,)).
    """
    for plane in skeleton.planes:
        if (plane.kind == face.kind and plane.patch == face.patches[0]
                and plane.direction == face.direction
                and plane.location == face.location):
            break
    else:
        raise ValueError("face does not belong to this skeleton")
    pj = plane_jump_tables(model, plane, m, nq)
    cross_els = _plane_cross_elements(model, plane)
    fi = int(np.ravel_multi_index(face.cross_index, cross_els)) if cross_els else 0
    return pj.gidx[fi], pj.jump[fi], pj.x[fi], pj.w[fi]
