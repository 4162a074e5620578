"""Verification harness: error norms and convergence rates for the
manufactured cases, the discrete inf-sup constant, cylinder benchmark
quantities of interest, and penalty-matrix sparsity studies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import (BcSpec, SaddleSystem, assemble_convection,
                       attach_zero_mean, build_system)
from .bspline import eval_bspline, eval_lagrange_1d, make_knot_vector
from .cases import (CYLINDER_RADIUS, annulus_polar, quarter_annulus, sphere,
                    unit_square)
from .ioformats import write_csv, write_pgm
from .linalg import GevpResult, factorized, matrix_bandwidth, smallest_nonzero_gevp
from .manufactured import ManufacturedCase
from .solvers import (FlowSolution, SolverParams, solve_generalized_stokes,
                      solve_steady_ns)
from .tabulate import Discretization


def default_gamma(k: int, alpha: int | None = None) -> float:
    """Stabilization parameter defaults: the order-dependent table for
    maximal regularity (k <= 3), 10^-alpha k^-4 otherwise."""
    if alpha is None:
        alpha = k - 1
    if alpha == k - 1 and k in (1, 2, 3):
        return {1: 1.0, 2: 5e-2, 3: 1e-3}[k]
    return 10.0 ** (-alpha) * float(k) ** (-4.0)


# ---------------------------------------------------------------------------
# error norms and convergence studies
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    l2_u: float
    h1_u: float
    l2_p: float
    n_dof: int
    h: float


@dataclass
class RateTable:
    case_id: str
    k: int
    alpha: int
    gamma: float
    rows: list = field(default_factory=list)

    def rates(self, key: str, last: int = 3):
        """Least-squares slope of ln(err) vs ln(h) over the last meshes."""
        hs = np.array([r["h"] for r in self.rows])[-last:]
        es = np.array([r[key] for r in self.rows])[-last:]
        if np.any(es <= 0):
            return np.nan
        A = np.stack([np.log(hs), np.ones_like(hs)], axis=1)
        slope, _ = np.linalg.lstsq(A, np.log(es), rcond=None)[0]
        return float(slope)

    def csv_rows(self):
        out = []
        for i, r in enumerate(self.rows):
            rates = {}
            for key in ("l2_u", "h1_u", "l2_p"):
                if i == 0:
                    rates[key] = None
                else:
                    prev = self.rows[i - 1]
                    rates[key] = (np.log(prev[key] / r[key])
                                  / np.log(prev["h"] / r["h"]))
            out.append([self.case_id, self.k, self.alpha, self.gamma,
                        r["h"], r["n_dof"], r["l2_u"], r["h1_u"], r["l2_p"],
                        rates["l2_u"], rates["h1_u"], rates["l2_p"]])
        return out


CONVERGENCE_CSV_HEADER = ("case,k,alpha,gamma,h,ndof,L2u,H1u,L2p,"
                          "rate_L2u,rate_H1u,rate_L2p").split(",")


def error_norms(model, solution: FlowSolution, case: ManufacturedCase,
                nq: int | None = None, mesh_h: float | None = None) -> ErrorReport:
    """L2/H1-seminorm velocity errors and the L2 pressure error, integrated
    with k+2 Gauss points per direction (quotient-shifted pressure where the
    zero-mean constraint applies)."""
    d = model.dim
    n = model.n
    kmax = max(kv.degree for p in model.patches for kv in p.kvs)
    disc = Discretization(model, nq or (kmax + 2))
    l2u2 = h1u2 = 0.0
    s0 = s1 = s2 = 0.0
    hmax = 0.0
    for p in range(len(model.patches)):
        b = disc.batch(p)
        coef = np.stack([solution.u[c * n + b.gidx] for c in range(d)], axis=-1)
        uh = np.einsum("eqi,eic->eqc", b.N, coef)
        duh = np.einsum("eqia,eic->eqca", b.gradN, coef)
        ph = np.einsum("eqi,ei->eq", b.N, solution.p[b.gidx])
        x = b.x.reshape(-1, d)
        ue = case.u(x).reshape(uh.shape)
        due = case.du(x).reshape(duh.shape)
        pe = case.p(x).reshape(ph.shape)
        l2u2 += (((uh - ue) ** 2).sum(-1) * b.w).sum()
        h1u2 += (((duh - due) ** 2).sum((-1, -2)) * b.w).sum()
        diff = ph - pe
        s0 += b.w.sum()
        s1 += (diff * b.w).sum()
        s2 += (diff ** 2 * b.w).sum()
        hmax = max(hmax, float(b.element_volumes.max()) ** (1.0 / d))
    l2p2 = s2 - s1 ** 2 / s0 if case.zero_mean else s2
    return ErrorReport(float(np.sqrt(l2u2)), float(np.sqrt(h1u2)),
                       float(np.sqrt(max(l2p2, 0.0))), (d + 1) * n,
                       mesh_h if mesh_h is not None else hmax)


def build_case_model(case: ManufacturedCase, k: int, mesh, alpha=None):
    if case.domain_case == "unit_square":
        return unit_square(k, int(mesh), alpha)
    if case.domain_case == "quarter_annulus":
        return quarter_annulus(k, int(mesh))
    if case.domain_case == "annulus_polar":
        e_c, e_r = mesh
        return annulus_polar(k, int(e_c), int(e_r),
                             case.params.get("R1", 1.0),
                             case.params.get("R2", 2.0))
    if case.domain_case == "sphere":
        return sphere(k, int(mesh))
    raise ValueError(f"no geometry builder for '{case.domain_case}'")


def _mesh_h(case: ManufacturedCase, mesh) -> float:
    if case.domain_case == "annulus_polar":
        return 1.0 / mesh[1]
    if case.domain_case == "sphere":
        return 2.0 / mesh
    return 1.0 / mesh


def solve_manufactured(case: ManufacturedCase, k: int, mesh, gamma=None,
                       alpha=None, nq=None, params: SolverParams | None = None):
    """Build geometry + system for a manufactured case and solve it."""
    from .skeleton import build_skeleton

    model = build_case_model(case, k, mesh, alpha)
    skeleton = build_skeleton(model)
    gamma = default_gamma(k, alpha) if gamma is None else gamma
    params = params or SolverParams(gamma=gamma, mu=case.mu, sigma=case.sigma)
    bc = BcSpec(dict(case.dirichlet))
    system = build_system(model, skeleton, bc, case.mu, gamma,
                          sigma=case.sigma, body_force=case.f, nq=nq)
    if case.zero_mean:
        attach_zero_mean(system)
    if case.convection:
        sol = solve_steady_ns(system, params)
    else:
        sol = solve_generalized_stokes(system, params)
    return model, system, sol


def convergence_study(case: ManufacturedCase, k: int, meshes, gamma=None,
                      alpha=None, nq=None, csv_path=None) -> RateTable:
    """Solve the case on a mesh sequence and report errors and rates."""
    gamma = default_gamma(k, alpha) if gamma is None else gamma
    table = RateTable(case.case_id, k,
                      (k - 1) if alpha is None else alpha, gamma)
    for mesh in meshes:
        model, system, sol = solve_manufactured(case, k, mesh, gamma, alpha, nq)
        rep = error_norms(model, sol, case, mesh_h=_mesh_h(case, mesh))
        table.rows.append({"h": rep.h, "n_dof": rep.n_dof, "l2_u": rep.l2_u,
                           "h1_u": rep.h1_u, "l2_p": rep.l2_p,
                           "p_inf": float(np.abs(sol.p).max())})
    if csv_path:
        write_csv(csv_path, CONVERGENCE_CSV_HEADER, table.csv_rows())
    return table


# ---------------------------------------------------------------------------
# inf-sup constant
# ---------------------------------------------------------------------------

INFSUP_CSV_HEADER = "k,alpha,gamma,h,beta_h".split(",")


def infsup_constant(model, gamma: float, mu: float = 1.0,
                    nq: int | None = None) -> tuple[float, GevpResult]:
    """Discrete inf-sup constant: sqrt of the smallest nonzero eigenvalue of
    (B A^-1 B^T + S) q = beta^2 (M_p + S) q with pure-Dirichlet velocity."""
    from .skeleton import build_skeleton

    skeleton = build_skeleton(model)
    bc = BcSpec({tag: 0 for tag in model.boundary_tags})
    system = build_system(model, skeleton, bc, mu, gamma, nq=nq)
    n = model.n
    if n > 4000:
        raise ValueError("inf-sup study limited to n_p <= 4000")
    free = system.dirichlet.free_u
    Aff = system.A[free][:, free].tocsc()
    Bf = system.B[:, free]
    lu = factorized(Aff)
    X = lu.solve(np.asarray(Bf.todense()).T)
    P = Bf @ X + system.S.toarray()
    P = 0.5 * (P + P.T)
    Mp = assemble_scalar_mass(model, system.disc)
    G = Mp.toarray() + system.S.toarray()
    res = smallest_nonzero_gevp(P, G)
    return res.beta_h, res


def assemble_scalar_mass(model, disc: Discretization | None = None):
    disc = disc or Discretization(model)
    n = model.n
    M = sp.csr_matrix((n, n))
    for p in range(len(model.patches)):
        b = disc.batch(p)
        vals = np.einsum("eqi,eqj,eq->eij", b.N, b.N, b.w)
        rows = np.broadcast_to(b.gidx[:, :, None], vals.shape)
        cols = np.broadcast_to(b.gidx[:, None, :], vals.shape)
        M = M + sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                              shape=(n, n)).tocsr()
    return M


# ---------------------------------------------------------------------------
# cylinder benchmark quantities of interest
# ---------------------------------------------------------------------------

def drag_lift(system: SaddleSystem, solution: FlowSolution,
              prev: FlowSolution | None = None, dt: float | None = None,
              u_mean: float = 1.0, radius: float = CYLINDER_RADIUS,
              rho: float = 1.0, tag: str = "cylinder",
              convection: bool = True):
    """Weakly evaluated drag and lift coefficients.

    The residual M du/dt + (C(u) + A) u + B^T p - f is paired with the
    discrete lifting that is -e_i on the cylinder velocity DOFs and zero
    elsewhere; coefficients are scaled by rho * u_mean^2 * radius.
    """
    model = system.model
    n, d = model.n, model.dim
    u, p = solution.u, solution.p
    r = system.A @ u + system.B.T @ p - system.f
    if convection:
        r += assemble_convection(model, u, system.disc) @ u
    if prev is not None and dt is not None:
        r += system.M @ ((u - prev.u) / dt)
    cyl = model.tag_scalar_dofs(tag)
    forces = [-(r[c * n + cyl]).sum() for c in range(d)]
    scale = rho * u_mean ** 2 * radius
    return forces[0] / scale, forces[1] / scale


def pressure_drop(model, solution: FlowSolution,
                  points=((0.15, 0.2), (0.25, 0.2))) -> float:
    """Pointwise pressure difference between the two probe points."""
    from .skeleton import _tensor_param_tables

    vals = []
    for xp in points:
        p_idx, xi = model.locate(np.asarray(xp, dtype=float))
        patch = model.patches[p_idx]
        evals = [eval_bspline(kv, xi[j], 0) for j, kv in enumerate(patch.kvs)]
        param, loc = _tensor_param_tables(patch, evals, 0)
        g = model.scalar_maps[p_idx][loc[0]]
        vals.append(float(param[(0,) * model.dim][0] @ solution.p[g]))
    return vals[0] - vals[1]


@dataclass
class SheddingMetrics:
    min_cd: float
    max_cd: float
    min_cl: float
    max_cl: float
    cycle: float            # 1/f
    strouhal: float


def shedding_metrics(series, u_mean: float = 1.0,
                     diameter: float = 2 * CYLINDER_RADIUS,
                     drag_key: str = "cD", lift_key: str = "cL") -> SheddingMetrics:
    """Extrema over the last full shedding cycle, the cycle length between
    two consecutive lift minima (parabolic refinement), and the Strouhal
    number St = D f / U."""
    t = np.asarray(series.times)
    cl = series.column(lift_key)
    cd = series.column(drag_key)
    mins = [i for i in range(1, len(cl) - 1)
            if cl[i] < cl[i - 1] and cl[i] <= cl[i + 1]]
    if len(mins) < 2:
        raise ValueError("need at least two lift minima in the window")
    i1, i2 = mins[-2], mins[-1]

    def refine(i):
        y0, y1, y2 = cl[i - 1], cl[i], cl[i + 1]
        denom = y0 - 2 * y1 + y2
        if denom <= 0:
            return t[i]
        off = 0.5 * (y0 - y2) / denom
        return t[i] + off * (t[i + 1] - t[i])

    cycle = refine(i2) - refine(i1)
    window = slice(i1, i2 + 1)
    st = diameter / (cycle * u_mean)
    return SheddingMetrics(float(cd[window].min()), float(cd[window].max()),
                           float(cl[window].min()), float(cl[window].max()),
                           float(cycle), float(st))


# ---------------------------------------------------------------------------
# sparsity study
# ---------------------------------------------------------------------------

SPARSITY_CSV_HEADER = "basis,k,alpha,bandwidth".split(",")


def spline_penalty_1d(k: int, alpha: int, n_elements: int = 8,
                      gamma: float = 1.0, mu: float = 1.0):
    """Univariate skeleton-penalty matrix for the spline space S^k_alpha."""
    kv = make_knot_vector(k, np.linspace(0.0, 1.0, n_elements + 1), alpha)
    n = kv.n
    m = alpha + 1
    h = 1.0 / n_elements
    S = np.zeros((n, n))
    r = k - alpha
    for i in range(1, n_elements):
        u = kv.breakpoints[i]
        left = eval_bspline(kv, u, m, side=-1)
        right = eval_bspline(kv, u, m, side=+1)
        jump = np.zeros(k + 1 + r)
        jump[: k + 1] += left.values[m]
        jump[r: r + k + 1] -= right.values[m]
        idx = left.first_index + np.arange(k + 1 + r)
        S[np.ix_(idx, idx)] += (gamma / mu * h ** (2 * alpha + 3)
                                * np.outer(jump, jump))
    return sp.csr_matrix(S)


def lagrange_penalty_1d(k: int, n_elements: int = 8, gamma: float = 1.0,
                        mu: float = 1.0):
    """Univariate penalty matrix for the C0 Lagrange basis (first-derivative
    jumps at the element interfaces)."""
    n = k * n_elements + 1
    h = 1.0 / n_elements
    dl = eval_lagrange_1d(k, 1.0, 1).values[1] / h
    dr = eval_lagrange_1d(k, 0.0, 1).values[1] / h
    S = np.zeros((n, n))
    for e in range(n_elements - 1):
        base = e * k
        jump = np.zeros(2 * k + 1)
        jump[: k + 1] += dl
        jump[k:] -= dr
        idx = base + np.arange(2 * k + 1)
        S[np.ix_(idx, idx)] += gamma / mu * h ** 3 * np.outer(jump, jump)
    return sp.csr_matrix(S)


def penalty_matrix_1d(basis: str, k: int, alpha: int, n_elements: int = 8):
    if basis == "spline":
        return spline_penalty_1d(k, alpha, n_elements)
    if basis == "lagrange":
        return lagrange_penalty_1d(k, n_elements)
    raise ValueError("basis must be 'spline' or 'lagrange'")


def sparsity_study(ks=(1, 2, 3, 4), n_elements: int = 8, out_dir=None,
                   pattern_k: int = 3):
    """Bandwidths of the univariate penalty matrices plus pattern snapshots.

    Returns the CSV rows (basis, k, alpha, bandwidth). When out_dir is given,
    writes the CSV, PGM patterns of the univariate matrices for pattern_k,
    and 2D/3D full-system patterns for the spline spaces of that degree.
    """
    from pathlib import Path

    from .skeleton import build_skeleton

    rows = []
    patterns = {}
    for k in ks:
        for alpha in range(k):
            S = penalty_matrix_1d("spline", k, alpha, n_elements)
            rows.append(["spline", k, alpha, matrix_bandwidth(S)])
            if k == pattern_k:
                patterns[f"penalty_1d_spline_k{k}_a{alpha}.pgm"] = S
        S = penalty_matrix_1d("lagrange", k, 0, n_elements)
        rows.append(["lagrange", k, 0, matrix_bandwidth(S)])
        if k == pattern_k:
            patterns[f"penalty_1d_lagrange_k{k}.pgm"] = S
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "sparsity_bandwidth.csv", SPARSITY_CSV_HEADER, rows)
        for name, S in patterns.items():
            write_pgm(out / name, S)
        for d, e in ((2, 6), (3, 3)):
            for alpha in range(pattern_k):
                model = (unit_square(pattern_k, e, alpha) if d == 2
                         else _cube(pattern_k, e, alpha))
                sk = build_skeleton(model)
                bc = BcSpec({tag: 0 for tag in model.boundary_tags})
                system = build_system(model, sk, bc, 1.0,
                                      default_gamma(pattern_k, alpha))
                K = sp.bmat([[system.A, system.B.T],
                             [system.B, -system.S]])
                write_pgm(out / f"system_{d}d_k{pattern_k}_a{alpha}.pgm", K)
    return rows


def _cube(k, elements, alpha=None):
    from .cases import _affine_patch
    from .geometry import Side, build_multipatch

    bp = np.linspace(0.0, 1.0, elements + 1)
    kv = make_knot_vector(k, bp, alpha)
    patch = _affine_patch([kv, kv, kv], (0, 0, 0), (1, 1, 1))
    tags = {"boundary": [(0, Side(d, e)) for d in range(3) for e in range(2)]}
    return build_multipatch([patch], [], tags, {"case": "cube"})
