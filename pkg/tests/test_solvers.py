import numpy as np
import pytest
import scipy.sparse as sp

from siga.assembly import BcSpec, attach_zero_mean, build_system
from siga.cases import annulus_polar, unit_square
from siga.linalg import sparse_solve
from siga.manufactured import manufactured_case
from siga.skeleton import build_skeleton
from siga.solvers import (FlowSolution, PicardDivergenceError, SolverParams,
                          TimeSeries, read_checkpoint, solve_generalized_stokes,
                          solve_steady_ns, solve_stokes, solve_unsteady_ns,
                          write_checkpoint)


@pytest.fixture(scope="module")
def stokes_setup():
    model = unit_square(2, 6)
    sk = build_skeleton(model)
    bc = BcSpec({"boundary": 0})
    case = manufactured_case("square_stokes")
    system = attach_zero_mean(build_system(model, sk, bc, 1.0, 5e-2,
                                           body_force=case.f))
    return model, system, case


def test_discrete_exact_recovery():
    """RHS manufactured from the assembled operator recovers the chosen
    discrete solution to solver accuracy."""
    model = unit_square(2, 4, 0)   # C0: pressure subspace S^2_1 is rich
    sk = build_skeleton(model)
    bc = BcSpec({"boundary": 0})
    system = attach_zero_mean(build_system(model, sk, bc, 1.0, 5e-2))
    dd = system.dirichlet
    rng = np.random.default_rng(3)
    n = model.n
    # choose u* zero on the boundary, p* in the smoother space (S q* = 0)
    u_star = np.zeros(2 * n)
    u_star[dd.free_u] = rng.standard_normal(dd.free_u.size)
    from siga.cases import _affine_patch
    from siga.bspline import make_knot_vector
    from siga.geometry import insert_knots
    kv_s = make_knot_vector(2, np.linspace(0, 1, 5), 1)
    patch = _affine_patch([kv_s, kv_s], (0, 0), (1, 1))
    from tests.test_assembly import _embedding_1d
    emb = _embedding_1d(kv_s, model.patches[0].kvs[0])
    q = rng.standard_normal((kv_s.n, kv_s.n))
    p_star = (emb @ q @ emb.T).ravel()
    p_star -= (system.mp @ p_star) / system.mp.sum()
    assert abs(p_star @ (system.S @ p_star)) < 1e-12
    # the pair (u*, p*) must satisfy the divergence row; project u* onto it:
    # solve the saddle problem with f = A u* + B^T p* and compare pressures
    # only through the residual (u* generally violates B u = S p), so instead
    # manufacture the full RHS including the second row via a multiplier-free
    # consistency: run the solver once and check its residual instead.
    f = system.A @ u_star + system.B.T @ p_star
    rp = system.B @ u_star - system.S @ p_star
    # modified solve: allow nonzero second-row data
    from siga.solvers import _reduced_solve
    u, p, lam, resid = _reduced_solve(system, system.A, f, rp)
    assert resid < 1e-9
    assert np.abs(u - u_star).max() < 1e-8 * max(1, np.abs(u_star).max())
    assert np.abs(p - p_star).max() < 1e-7 * max(1, np.abs(p_star).max())


def test_checkerboard_free_pressure(stokes_setup):
    """Jump energy of the computed pressure stays far below its norm."""
    model, system, case = stokes_setup
    sol = solve_stokes(system, SolverParams(gamma=5e-2, mu=1.0))
    num = sol.p @ (system.S @ sol.p)
    den = sol.p @ sol.p
    from siga.verification import error_norms
    # oscillation indicator small relative to the pressure scale
    assert num < 1e-4 * max(den, 1e-30)
    assert sol.residual < 1e-9


def test_gamma_too_large_loses_accuracy():
    case = manufactured_case("square_stokes")
    model = unit_square(2, 8)
    sk = build_skeleton(model)
    bc = BcSpec({"boundary": 0})
    from siga.verification import error_norms
    errs = {}
    for gam in (5e-2, 1e6):
        system = attach_zero_mean(build_system(model, sk, bc, 1.0, gam,
                                               body_force=case.f))
        sol = solve_stokes(system, SolverParams(gamma=gam, mu=1.0))
        errs[gam] = error_norms(model, sol, case).l2_u
    assert errs[1e6] > errs[5e-2]


def test_sigma_zero_bitwise(stokes_setup):
    model, system, case = stokes_setup
    params = SolverParams(gamma=5e-2, mu=1.0, sigma=0.0)
    a = solve_stokes(system, params)
    b = solve_generalized_stokes(system, params)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.p, b.p)


def test_damkohler_number():
    case = manufactured_case("square_generalized", sigma=1000.0, mu=1.0)
    assert case.sigma * 1.0 ** 2 / case.mu == 1000.0


def test_picard_single_iteration_linear(stokes_setup):
    model, system, case = stokes_setup
    sol = solve_steady_ns(system, SolverParams(gamma=5e-2, mu=1.0),
                          convection=False)
    assert sol.iterations == 1


def test_picard_near_stokes_fast():
    """Large viscosity: Picard converges in a few iterations."""
    case = manufactured_case("couette", mu=50.0)
    from siga.verification import solve_manufactured
    model, system, sol = solve_manufactured(case, 2, (8, 2), gamma=5e-2)
    assert sol.iterations <= 3


def test_picard_divergence_reported():
    model = unit_square(1, 4)
    sk = build_skeleton(model)
    bc = BcSpec({"boundary": 0})

    def body(x):
        # non-gradient forcing so convection matters
        return np.stack([np.full(len(x), 50.0), -50.0 * x[:, 0]], -1)

    system = attach_zero_mean(build_system(model, sk, bc, 1e-4, 1.0,
                                           body_force=body))
    with pytest.raises(PicardDivergenceError) as err:
        solve_steady_ns(system, SolverParams(gamma=1.0, mu=1e-4, max_iter=4))
    assert len(err.value.history) == 4


def test_divergence_row_identity(stokes_setup):
    """Second block row holds: q^T B u = q^T S p - lambda q^T m for all q."""
    model, system, case = stokes_setup
    sol = solve_stokes(system, SolverParams(gamma=5e-2, mu=1.0))
    resid = (system.B @ sol.u - system.S @ sol.p
             + system.mp * sol.multiplier)
    assert np.abs(resid).max() < 1e-10 * max(1.0, np.abs(sol.p).max())


def test_backward_euler_one_step_oracle():
    """theta=1, one step, Stokes limit equals the hand-assembled system."""
    model = unit_square(1, 3)
    sk = build_skeleton(model)
    bc = BcSpec({"boundary": 0})

    def body(x):
        s = np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
        return np.stack([s, 0 * s], -1)

    system = attach_zero_mean(build_system(model, sk, bc, 1.0, 1.0,
                                           body_force=body))
    dt = 0.1
    params = SolverParams(gamma=1.0, mu=1.0, theta=1.0,
                          dt_schedule=[(dt, dt)], tol_step=1e-13)
    series = solve_unsteady_ns(system, params, convection=False)
    fin = series.final
    free = system.dirichlet.free_u
    n = model.n
    K = sp.bmat([[(system.M / dt + system.A)[free][:, free],
                  system.B[:, free].T, None],
                 [system.B[:, free], -system.S,
                  sp.csr_matrix(system.mp[:, None])],
                 [None, sp.csr_matrix(system.mp[None, :]), None]],
                format="csc")
    rhs = np.concatenate([system.f[free], np.zeros(n + 1)])
    x = sparse_solve(K, rhs)
    assert np.abs(fin.u[free] - x[:free.size]).max() < 1e-12
    assert np.abs(fin.p - x[free.size:free.size + n]).max() < 1e-12


def test_steady_state_is_fixed_point(stokes_setup):
    model, system, case = stokes_setup
    st = solve_stokes(system, SolverParams(gamma=5e-2, mu=1.0))
    params = SolverParams(gamma=5e-2, mu=1.0, theta=0.5,
                          dt_schedule=[(1.0, 0.1)], tol_step=1e-12)
    series = solve_unsteady_ns(system, params, u0=st.u, convection=False)
    assert np.abs(series.final.u - st.u).max() < 1e-8


def test_theta_scheme_orders():
    """CN second order and backward Euler first order in the nonstiff,
    weakly stabilized regime."""
    model = unit_square(2, 4)
    sk = build_skeleton(model)
    bc = BcSpec({"boundary": 0})
    mu, gam = 0.004, 1e-5
    system = attach_zero_mean(build_system(model, sk, bc, mu, gam))

    def bf(x, t):
        s = np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
        return np.stack([np.sin(2.0 * t) * s, -0.3 * np.sin(2.0 * t) * s], -1)

    T = 1.0

    def run(theta, dt):
        p = SolverParams(gamma=gam, mu=mu, theta=theta,
                         dt_schedule=[(T, dt)], tol_step=1e-13, max_iter=60)
        return solve_unsteady_ns(system, p, body_force=bf,
                                 convection=False).final

    ref = run(0.5, T / 1024)
    slopes = {}
    for theta in (0.5, 1.0):
        dts = np.array([T / 8, T / 16, T / 32])
        errs = [np.linalg.norm(run(theta, dt).u - ref.u) for dt in dts]
        A = np.stack([np.log(dts), np.ones(3)], 1)
        slopes[theta] = np.linalg.lstsq(A, np.log(errs), rcond=None)[0][0]
    assert abs(slopes[0.5] - 2.0) <= 0.2
    assert abs(slopes[1.0] - 1.0) <= 0.2


def test_couette_zero_pressure_and_center_values():
    """Steady NS couette: pressure essentially zero at high order/resolution."""
    case = manufactured_case("couette")
    from siga.verification import solve_manufactured
    model, system, sol = solve_manufactured(case, 3, (64, 16), gamma=1e-3)
    assert np.abs(sol.p).max() < 1e-8
    assert abs(system.mp @ sol.p) < 1e-12


def test_time_series_and_checkpoint(tmp_path):
    s = TimeSeries()
    s.append(0.1, cD=1.0)
    s.append(0.2, cD=2.0)
    with pytest.raises(ValueError):
        s.append(0.15, cD=0.0)
    assert np.allclose(s.column("cD"), [1, 2])
    sol = FlowSolution(np.arange(4.0), np.arange(3.0), 0.5, t=1.25)
    path = tmp_path / "chk.json"
    write_checkpoint(path, sol)
    back = read_checkpoint(path)
    assert back.t == 1.25
    assert np.array_equal(back.u, sol.u)
    assert np.array_equal(back.p, sol.p)
    assert back.multiplier == 0.5
    # text format: JSON, no binary
    assert path.read_text().startswith("{")
