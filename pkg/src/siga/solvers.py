"""Flow solvers on assembled saddle systems: steady Stokes, generalized
Stokes, steady Navier-Stokes (Picard) and unsteady Navier-Stokes
(theta-scheme with Picard iterations per step)."""

from __future__ import annotations

import inspect
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import SaddleSystem, assemble_convection
from .linalg import sparse_solve


class PicardDivergenceError(RuntimeError):
    def __init__(self, message, history, t=None):
        super().__init__(message)
        self.history = history
        self.t = t


@dataclass
class SolverParams:
    gamma: float
    mu: float
    sigma: float = 0.0
    tol: float = 1e-8
    tol_step: float = 1e-6
    max_iter: int = 60
    theta: float = 0.5
    dt_schedule: list = field(default_factory=list)   # [(duration, dt), ...]

    def __post_init__(self):
        if self.tol <= 0 or self.tol_step <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")


@dataclass
class FlowSolution:
    u: np.ndarray
    p: np.ndarray
    multiplier: float | None = None
    t: float = 0.0
    iterations: int = 1
    residual: float = 0.0


@dataclass
class TimeSeries:
    times: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    final: FlowSolution | None = None

    def append(self, t, **scalars):
        if self.times and t <= self.times[-1]:
            raise ValueError("times must be strictly increasing")
        self.times.append(t)
        for key, val in scalars.items():
            self.data.setdefault(key, []).append(val)

    def column(self, key):
        return np.asarray(self.data[key])


def _reduced_solve(system: SaddleSystem, Auu, rhs_u, rhs_p):
    """Eliminate Dirichlet DOFs, append the zero-mean multiplier if attached,
    solve, and report the relative linear residual."""
    dd = system.dirichlet
    free = dd.free_u
    B = system.B
    Af = Auu[free][:, free]
    Bf = B[:, free]
    ru = rhs_u[free] - Auu[free][:, dd.fixed_u] @ dd.u_bc[dd.fixed_u]
    rp = rhs_p - B[:, dd.fixed_u] @ dd.u_bc[dd.fixed_u]
    blocks = [[Af, Bf.T], [Bf, -system.S]]
    rhs = [ru, rp]
    if system.zero_mean:
        mp = sp.csr_matrix(system.mp[:, None])
        blocks = [[Af, Bf.T, None],
                  [Bf, -system.S, mp],
                  [None, mp.T, None]]
        rhs.append(np.zeros(1))
    K = sp.bmat(blocks, format="csc")
    b = np.concatenate(rhs)
    x = sparse_solve(K, b)
    resid = np.linalg.norm(K @ x - b) / max(np.linalg.norm(b), 1e-300)
    nf = free.size
    n = system.n
    u = dd.u_bc.copy()
    u[free] = x[:nf]
    p = x[nf: nf + n]
    lam = float(x[-1]) if system.zero_mean else None
    return u, p, lam, resid


def _increment(u, p, u_old, p_old):
    du = np.linalg.norm(u - u_old)
    dp = np.linalg.norm(p - p_old)
    scale = max(np.linalg.norm(u), np.linalg.norm(p), 1.0)
    return max(du, dp) / scale


def solve_generalized_stokes(system: SaddleSystem, params: SolverParams) -> FlowSolution:
    """Solve the (generalized) Stokes saddle problem: A + sigma M."""
    Auu = system.A if params.sigma == 0.0 else system.A + params.sigma * system.M
    u, p, lam, resid = _reduced_solve(system, Auu, system.f, np.zeros(system.n))
    return FlowSolution(u, p, lam, iterations=1, residual=resid)


def solve_stokes(system: SaddleSystem, params: SolverParams) -> FlowSolution:
    return solve_generalized_stokes(system, params)


def solve_steady_ns(system: SaddleSystem, params: SolverParams,
                    u0=None, convection: bool = True) -> FlowSolution:
    """Picard fixed point of C(u)u + A u + B^T p = f, B u - S p = 0.

    Stops when max(||du||, ||dp||) relative to the iterate size drops below
    params.tol. With convection disabled the problem is linear and a single
    solve is returned.
    """
    Auu0 = system.A if params.sigma == 0.0 else system.A + params.sigma * system.M
    if not convection:
        u, p, lam, resid = _reduced_solve(system, Auu0, system.f,
                                          np.zeros(system.n))
        return FlowSolution(u, p, lam, iterations=1, residual=resid)
    u_old = system.dirichlet.u_bc.copy() if u0 is None else np.asarray(u0, float)
    p_old = np.zeros(system.n)
    history = []
    resid = 0.0
    for j in range(1, params.max_iter + 1):
        C = assemble_convection(system.model, u_old, system.disc)
        u, p, lam, resid = _reduced_solve(system, Auu0 + C, system.f,
                                          np.zeros(system.n))
        err = _increment(u, p, u_old, p_old)
        history.append(err)
        u_old, p_old = u, p
        if err < params.tol:
            return FlowSolution(u, p, lam, iterations=j, residual=resid)
    raise PicardDivergenceError(
        f"Picard iteration did not reach tol={params.tol} in "
        f"{params.max_iter} iterations", history)


def _load_at(system, body_force, t):
    """Load vector at time t: system.f plus the given body-force volume term.

    A body force passed here must not also be baked into system.f.
    """
    if body_force is None:
        return system.f
    if t is not None and len(inspect.signature(body_force).parameters) >= 2:
        def bf(x):
            return body_force(x, t)
    else:
        bf = body_force
    n, d = system.n, system.model.dim
    f = np.zeros(d * n)
    for p in range(len(system.model.patches)):
        b = system.disc.batch(p)
        F = np.asarray(bf(b.x.reshape(-1, d))).reshape(b.x.shape)
        fv = np.einsum("eqi,eqc,eq->eic", b.N, F, b.w)
        for c in range(d):
            f[c * n:(c + 1) * n] += np.bincount(b.gidx.ravel(),
                                                fv[..., c].ravel(), minlength=n)
    return f + system.f


def solve_unsteady_ns(system: SaddleSystem, params: SolverParams,
                      body_force=None, u0=None, observers=(),
                      convection: bool = True) -> TimeSeries:
    """theta-scheme time stepping with Picard iterations per step.

    Each Picard iterate solves
    [M/dt + theta (C(u_prev_it) + A)] u + B^T p = rhs,  B u - S p = 0,
    with rhs = [M/dt - (1-theta)(C(u_old) + A)] u_old
    + theta f^i + (1-theta) f^(i-1). Observers are called after each
    accepted step as observer(step, t, solution, previous, dt).
    """
    if not params.dt_schedule:
        raise ValueError("params.dt_schedule is empty")
    theta = params.theta
    A = system.A
    M = system.M
    u_old = system.dirichlet.u_bc.copy() if u0 is None else np.asarray(u0, float)
    p_old = np.zeros(system.n)
    series = TimeSeries()
    t = 0.0
    time_dep = (body_force is not None
                and len(inspect.signature(body_force).parameters) >= 2)
    f_old = _load_at(system, body_force, t if time_dep else None)
    step = 0
    for duration, dt in params.dt_schedule:
        nsteps = int(round(duration / dt))
        for _ in range(nsteps):
            step += 1
            t_new = t + dt
            f_new = (_load_at(system, body_force, t_new) if time_dep else f_old)
            C_old = (assemble_convection(system.model, u_old, system.disc)
                     if convection else sp.csr_matrix((system.n_u, system.n_u)))
            rhs_base = ((M / dt) @ u_old
                        - (1.0 - theta) * ((C_old + A) @ u_old)
                        + theta * f_new + (1.0 - theta) * f_old)
            u_it = u_old.copy()
            p_it = p_old if step > 1 else np.zeros(system.n)
            sol = None
            for j in range(1, params.max_iter + 1):
                C_it = (assemble_convection(system.model, u_it, system.disc)
                        if convection else C_old)
                Auu = M / dt + theta * (C_it + A)
                u, p, lam, resid = _reduced_solve(system, Auu, rhs_base,
                                                  np.zeros(system.n))
                err = _increment(u, p, u_it, p_it)
                u_it, p_it = u, p
                if err < params.tol_step:
                    sol = FlowSolution(u, p, lam, t=t_new, iterations=j,
                                       residual=resid)
                    break
            if sol is None:
                raise PicardDivergenceError(
                    f"Picard did not converge at t={t_new:.6f}", [], t=t_new)
            prev = FlowSolution(u_old, p_old, t=t)
            record = {}
            for obs in observers:
                out = obs(step, t_new, sol, prev, dt)
                if out:
                    record.update(out)
            if record:
                series.append(t_new, **record)
            u_old, p_old = sol.u, sol.p
            f_old = f_new
            t = t_new
    series.final = FlowSolution(u_old, p_old, t=t)
    return series


def write_checkpoint(path, solution: FlowSolution):
    """Restartable text checkpoint: JSON with base-10 float lists."""
    doc = {"t": solution.t, "u": solution.u.tolist(),
           "p": solution.p.tolist(),
           "multiplier": solution.multiplier}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_checkpoint(path) -> FlowSolution:
    with open(path) as fh:
        doc = json.load(fh)
    return FlowSolution(np.array(doc["u"]), np.array(doc["p"]),
                        doc.get("multiplier"), t=doc["t"])
