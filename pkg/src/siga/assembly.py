"""Assembly of the saddle-point blocks: viscous, divergence, mass, convection
and the skeleton penalty, plus Dirichlet constraints and the zero-mean
pressure multiplier.

Velocity DOFs are component-major: global index = component * n + scalar
index, matching the vector basis R_{j + delta n} = R_j e_delta.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .geometry import MultiPatchModel
from .skeleton import MeshSkeleton, plane_jump_tables
from .tabulate import Discretization


class AssemblyError(ValueError):
    pass


def _coo(rows, cols, vals, shape):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                         shape=shape).tocsr()


def _pair_indices(gidx):
    rows = np.broadcast_to(gidx[:, :, None], gidx.shape + (gidx.shape[1],))
    cols = np.broadcast_to(gidx[:, None, :], rows.shape)
    return rows, cols


def assemble_stokes_blocks(model: MultiPatchModel, mu: float,
                           disc: Discretization | None = None,
                           body_force=None, neumann=None):
    """Viscous block A, divergence B, velocity mass M and load vector f.

    A_ij = 2 mu (sym grad R_j, sym grad R_i); B_ij = -(R_i, div R_j);
    M_ij = (R_j, R_i); f from the body force and Neumann tractions.
    """
    if mu <= 0:
        raise AssemblyError("viscosity must be positive")
    disc = disc or Discretization(model)
    n, d = model.n, model.dim
    nu = d * n
    A = sp.csr_matrix((nu, nu))
    B = sp.csr_matrix((n, nu))
    M = sp.csr_matrix((nu, nu))
    f = np.zeros(nu)
    mp = np.zeros(n)
    for p in range(len(model.patches)):
        b = disc.batch(p)
        w = b.w
        G = np.einsum("eqia,eqja,eq->eij", b.gradN, b.gradN, w)
        T = np.einsum("eqia,eqjb,eq->eijab", b.gradN, b.gradN, w)
        Ms = np.einsum("eqi,eqj,eq->eij", b.N, b.N, w)
        D = np.einsum("eqi,eqja,eq->eija", b.N, b.gradN, w)
        rows, cols = _pair_indices(b.gidx)
        for cr in range(d):
            for cc in range(d):
                vals = mu * T[..., cc, cr]
                if cr == cc:
                    vals = vals + mu * G
                A = A + _coo(rows + cr * n, cols + cc * n, vals, (nu, nu))
            M = M + _coo(rows + cr * n, cols + cr * n, Ms, (nu, nu))
        for cc in range(d):
            B = B + _coo(rows, cols + cc * n, -D[..., cc], (n, nu))
        mp += np.bincount(b.gidx.ravel(),
                          np.einsum("eqi,eq->ei", b.N, w).ravel(), minlength=n)
        if body_force is not None:
            F = np.asarray(body_force(b.x.reshape(-1, d))).reshape(b.x.shape)
            fv = np.einsum("eqi,eqc,eq->eic", b.N, F, w)
            for cc in range(d):
                f[cc * n:(cc + 1) * n] += np.bincount(
                    b.gidx.ravel(), fv[..., cc].ravel(), minlength=n)
    if neumann:
        for tag, h_fn in neumann.items():
            if h_fn is None:
                continue
            for p, side in model.tag_sides(tag):
                eb = disc.edge(p, side)
                H = np.asarray(h_fn(eb.x.reshape(-1, d))).reshape(eb.x.shape)
                hv = np.einsum("eqi,eqc,eq->eic", eb.T, H, eb.w)
                for cc in range(d):
                    f[cc * n:(cc + 1) * n] += np.bincount(
                        eb.gidx.ravel(), hv[..., cc].ravel(), minlength=n)
    return A.tocsr(), B.tocsr(), M.tocsr(), f, mp


def assemble_convection(model: MultiPatchModel, u_hat,
                        disc: Discretization | None = None):
    """C(u)_ij = c(u_h; R_j, R_i) with the advecting field from u_hat."""
    disc = disc or Discretization(model)
    n, d = model.n, model.dim
    nu = d * n
    u_hat = np.asarray(u_hat, dtype=float)
    if u_hat.size != nu:
        raise AssemblyError(f"expected velocity vector of size {nu}")
    C = sp.csr_matrix((nu, nu))
    for p in range(len(model.patches)):
        b = disc.batch(p)
        ucomp = np.stack([u_hat[c * n + b.gidx] for c in range(d)], axis=-1)
        uq = np.einsum("eqi,eic->eqc", b.N, ucomp)
        conv = np.einsum("eqc,eqjc->eqj", uq, b.gradN)
        Cs = np.einsum("eqi,eqj,eq->eij", b.N, conv, b.w)
        rows, cols = _pair_indices(b.gidx)
        for cr in range(d):
            C = C + _coo(rows + cr * n, cols + cr * n, Cs, (nu, nu))
    return C.tocsr()


def assemble_skeleton_penalty(model: MultiPatchModel, skeleton: MeshSkeleton,
                              gamma: float, mu: float, sigma: float = 0.0,
                              nq: int | None = None):
    """Skeleton penalty matrix S.

    S_ij = sum_F int_F gamma (mu + sigma h_F^2)^-1 h_F^(2a+3)
    [[d_n^(a+1) R_j]] [[d_n^(a+1) R_i]] dGamma, a = alpha(F) per face.
    """
    if gamma <= 0:
        raise AssemblyError("stabilization parameter must be positive")
    n = model.n
    S = sp.csr_matrix((n, n))
    for plane in skeleton.planes:
        m = plane.alpha + 1
        pj = plane_jump_tables(model, plane, m, nq)
        h = plane.h
        wfac = gamma / (mu + sigma * h ** 2) * h ** (2 * plane.alpha + 3)
        wq = pj.w * wfac[:, None]
        vals = np.einsum("fqi,fqj,fq->fij", pj.jump, pj.jump, wq)
        rows, cols = _pair_indices(pj.gidx)
        S = S + _coo(rows, cols, vals, (n, n))
    return S.tocsr()


@dataclass
class BcSpec:
    """Dirichlet tags map to velocity functions (or 0); Neumann tags to
    traction functions (or None for traction-free)."""

    dirichlet: dict
    neumann: dict = field(default_factory=dict)

    def __post_init__(self):
        overlap = set(self.dirichlet) & set(self.neumann)
        if overlap:
            raise AssemblyError(f"tags in both Dirichlet and Neumann sets: {overlap}")


@dataclass
class DirichletData:
    scalar_dofs: np.ndarray          # sorted global scalar DOFs on Gamma_D
    values: np.ndarray               # (len(scalar_dofs), d) fitted trace
    free_u: np.ndarray               # free velocity DOF indices
    fixed_u: np.ndarray              # prescribed velocity DOF indices
    u_bc: np.ndarray                 # (n_u,) lifting vector


@dataclass
class SaddleSystem:
    """Assembled blocks plus constraint bookkeeping (full DOF numbering)."""

    model: MultiPatchModel
    A: sp.csr_matrix
    B: sp.csr_matrix
    M: sp.csr_matrix
    S: sp.csr_matrix
    f: np.ndarray
    mp: np.ndarray
    mu: float
    gamma: float
    sigma: float = 0.0
    disc: Discretization | None = None
    skeleton: MeshSkeleton | None = None
    dirichlet: DirichletData | None = None
    zero_mean: bool = False
    neumann_tags: tuple = ()

    @property
    def n(self):
        return self.model.n

    @property
    def n_u(self):
        return self.model.n_u


def build_system(model, skeleton, bc: BcSpec, mu, gamma, sigma=0.0,
                 body_force=None, disc=None, nq=None) -> SaddleSystem:
    """Assemble all blocks and apply boundary conditions."""
    disc = disc or Discretization(model, nq)
    A, B, M, f, mp = assemble_stokes_blocks(model, mu, disc, body_force,
                                            bc.neumann)
    S = assemble_skeleton_penalty(model, skeleton, gamma, mu, sigma, nq)
    system = SaddleSystem(model, A, B, M, S, f, mp, mu, gamma, sigma,
                          disc=disc, skeleton=skeleton,
                          neumann_tags=tuple(bc.neumann))
    return apply_dirichlet(system, model, bc)


def apply_dirichlet(system: SaddleSystem, model: MultiPatchModel,
                    bc: BcSpec) -> SaddleSystem:
    """Constrain tagged boundary velocity DOFs.

    Homogeneous data eliminates the DOFs; non-homogeneous data is fitted by
    least squares on boundary quadrature points, and the solvers lift the
    right-hand side accordingly.
    """
    n, d = model.n, model.dim
    disc = system.disc or Discretization(model)
    tagged = []
    for tag in bc.dirichlet:
        tagged.append(model.tag_scalar_dofs(tag))
    if not tagged:
        raise AssemblyError("no Dirichlet tags given")
    dofs = np.unique(np.concatenate(tagged))
    lookup = np.full(n, -1, dtype=int)
    lookup[dofs] = np.arange(dofs.size)
    nd = dofs.size
    values = np.zeros((nd, d))
    if any(callable(g) for g in bc.dirichlet.values()):
        G = sp.csr_matrix((nd, nd))
        rhs = np.zeros((nd, d))
        for tag, g_fn in bc.dirichlet.items():
            for p, side in model.tag_sides(tag):
                eb = disc.edge(p, side)
                # functions whose trace vanishes identically map to slot 0
                # with exactly zero entries
                sub = np.where(lookup[eb.gidx] < 0, 0, lookup[eb.gidx])
                rows, cols = _pair_indices(sub)
                Ge = np.einsum("eqi,eqj,eq->eij", eb.T, eb.T, eb.w)
                G = G + _coo(rows, cols, Ge, (nd, nd))
                if callable(g_fn):
                    gv = np.asarray(g_fn(eb.x.reshape(-1, d))).reshape(eb.x.shape)
                    fe = np.einsum("eqi,eqc,eq->eic", eb.T, gv, eb.w)
                    for c in range(d):
                        rhs[:, c] += np.bincount(sub.ravel(),
                                                 fe[..., c].ravel(),
                                                 minlength=nd)
        lu = sp.linalg.splu(G.tocsc())
        for c in range(d):
            values[:, c] = lu.solve(rhs[:, c])
    fixed = np.concatenate([c * n + dofs for c in range(d)])
    free = np.setdiff1d(np.arange(d * n), fixed, assume_unique=True)
    u_bc = np.zeros(d * n)
    for c in range(d):
        u_bc[c * n + dofs] = values[:, c]
    system.dirichlet = DirichletData(dofs, values, free, fixed, u_bc)
    return system


def attach_zero_mean(system: SaddleSystem) -> SaddleSystem:
    """Augment with the zero-average pressure multiplier row/column."""
    if system.neumann_tags:
        warnings.warn("zero-mean constraint attached although Gamma_N is "
                      "nonempty; the pressure is already fixed", stacklevel=2)
    system.zero_mean = True
    return system


def export_matrix_market(path, matrix):
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix))


def import_matrix_market(path):
    return sp.csr_matrix(scipy.io.mmread(str(path)))
