"""Manufactured flow cases: closed-form velocity/pressure pairs with the
forcing derived symbolically from the strong form,

    f = sigma u + (u . grad) u [Navier-Stokes cases]
        - div(2 mu sym grad u) + grad p,

plus an independent finite-difference forcing path used to cross-check the
symbolic derivation (transcription-error detection).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp

CASE_IDS = ("square_stokes", "square_generalized", "annulus_stokes",
            "couette", "ethier_steinman")


@dataclass
class ManufacturedCase:
    case_id: str
    domain_case: str
    dim: int
    mu: float
    sigma: float
    convection: bool
    zero_mean: bool
    params: dict
    u: callable
    p: callable
    du: callable            # du(x)[i, a, b] = d u_a / d x_b
    f: callable
    dirichlet: dict = field(default_factory=dict)   # tag -> trace callable or 0
    domain_args: dict = field(default_factory=dict)


def _square_stokes_fields():
    x, y = sp.symbols("x y")
    u1 = 2 * sp.exp(x) * (-1 + x) ** 2 * x ** 2 * (y ** 2 - y) * (-1 + 2 * y)
    u2 = -sp.exp(x) * (-1 + x) * x * (-2 + x * (3 + x)) * (-1 + y) ** 2 * y ** 2
    yy = y ** 2 - y
    p = (-424 + 156 * sp.E + yy * (-456
         + sp.exp(x) * (456 + x ** 2 * (228 - 5 * yy)
                        + 2 * x * (-228 + yy)
                        + 2 * x ** 3 * (-36 + yy)
                        + x ** 4 * (12 + yy))))
    return [u1, u2], p, [x, y]


def _annulus_fields():
    x, y = sp.symbols("x y")
    r2 = x ** 2 + y ** 2
    u1 = 1e-6 * x ** 2 * y ** 4 * (r2 - 1) * (r2 - 16) \
        * (5 * x ** 4 + 18 * x ** 2 * y ** 2 - 85 * x ** 2
           + 13 * y ** 4 - 153 * y ** 2 + 80)
    u2 = 1e-6 * x * y ** 5 * (r2 - 1) * (r2 - 16) \
        * (102 * x ** 2 + 34 * y ** 2 - 10 * x ** 4
           - 12 * x ** 2 * y ** 2 - 2 * y ** 4 - 32)
    p = 1e-7 * x * y * (y ** 2 - x ** 2) * (r2 - 16) ** 2 * (r2 - 1) ** 2 \
        * sp.exp(14 * r2 ** sp.Rational(-1, 2))
    return [u1, u2], p, [x, y]


def _couette_fields(omega, r1, r2_out):
    x, y = sp.symbols("x y")
    U = omega * r1
    delta = r1 / r2_out
    A = -U * delta ** 2 / (r1 * (1 - delta ** 2))
    B = U * r1 / (1 - delta ** 2)
    s = A + B / (x ** 2 + y ** 2)
    return [-s * y, s * x], sp.Integer(0), [x, y], A, B


def _ethier_steinman_fields(a, dpar):
    x, y, z = sp.symbols("x y z")
    e = sp.exp
    u1 = -a * (e(a * x) * sp.sin(a * y + dpar * z)
               + e(a * z) * sp.cos(a * x + dpar * y))
    u2 = -a * (e(a * y) * sp.sin(a * z + dpar * x)
               + e(a * x) * sp.cos(a * y + dpar * z))
    u3 = -a * (e(a * z) * sp.sin(a * x + dpar * y)
               + e(a * y) * sp.cos(a * z + dpar * x))
    p = -a ** 2 / 2 * (e(2 * a * x) + e(2 * a * y) + e(2 * a * z)
                       + 2 * sp.sin(a * x + dpar * y)
                       * sp.cos(a * z + dpar * x) * e(a * (y + z))
                       + 2 * sp.sin(a * y + dpar * z)
                       * sp.cos(a * x + dpar * y) * e(a * (z + x))
                       + 2 * sp.sin(a * z + dpar * x)
                       * sp.cos(a * y + dpar * z) * e(a * (x + y)))
    return [u1, u2, u3], p, [x, y, z]


def _build_callables(u_sym, p_sym, syms, mu, sigma, convection):
    dim = len(syms)
    gradu = [[sp.diff(u_sym[a], syms[b]) for b in range(dim)]
             for a in range(dim)]
    f_sym = []
    for a in range(dim):
        visc = sum(sp.diff(mu * (gradu[a][b] + gradu[b][a]), syms[b])
                   for b in range(dim))
        conv = sum(u_sym[b] * gradu[a][b] for b in range(dim)) \
            if convection else sp.Integer(0)
        f_sym.append(sigma * u_sym[a] + conv - visc + sp.diff(p_sym, syms[a]))

    u_fns = [sp.lambdify(syms, expr, modules="numpy") for expr in u_sym]
    p_fn = sp.lambdify(syms, p_sym, modules="numpy")
    du_fns = [[sp.lambdify(syms, gradu[a][b], modules="numpy")
               for b in range(dim)] for a in range(dim)]
    f_fns = [sp.lambdify(syms, expr, modules="numpy") for expr in f_sym]

    def vec(fns):
        def call(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            cols = [x[:, i] for i in range(dim)]
            return np.stack([np.broadcast_to(fn(*cols), (x.shape[0],))
                             for fn in fns], axis=-1)
        return call

    def u(x):
        return vec(u_fns)(x)

    def p(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cols = [x[:, i] for i in range(dim)]
        return np.broadcast_to(p_fn(*cols), (x.shape[0],)).astype(float)

    def du(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cols = [x[:, i] for i in range(dim)]
        npts = x.shape[0]
        out = np.empty((npts, dim, dim))
        for a in range(dim):
            for b in range(dim):
                out[:, a, b] = np.broadcast_to(du_fns[a][b](*cols), (npts,))
        return out

    return u, p, du, vec(f_fns)


@lru_cache(maxsize=None)
def _case_cache(case_id, key):
    params = dict(key)
    mu = params.get("mu", 1.0)
    if case_id == "square_stokes":
        u_sym, p_sym, syms = _square_stokes_fields()
        u, p, du, f = _build_callables(u_sym, p_sym, syms, mu, 0.0, False)
        return ManufacturedCase(case_id, "unit_square", 2, mu, 0.0, False,
                                True, params, u, p, du, f,
                                dirichlet={"boundary": 0})
    if case_id == "square_generalized":
        sigma = params.get("sigma")
        if sigma is None:
            sigma = params.get("Da", 1.0) * mu  # L = 1 for the unit square
        u_sym, p_sym, syms = _square_stokes_fields()
        u, p, du, f = _build_callables(u_sym, p_sym, syms, mu, sigma, False)
        return ManufacturedCase(case_id, "unit_square", 2, mu, sigma, False,
                                True, dict(params, sigma=sigma), u, p, du, f,
                                dirichlet={"boundary": 0})
    if case_id == "annulus_stokes":
        u_sym, p_sym, syms = _annulus_fields()
        u, p, du, f = _build_callables(u_sym, p_sym, syms, mu, 0.0, False)
        return ManufacturedCase(case_id, "quarter_annulus", 2, mu, 0.0, False,
                                True, params, u, p, du, f,
                                dirichlet={"boundary": 0})
    if case_id == "couette":
        omega = params.get("omega", 1.0)
        r1 = params.get("R1", 1.0)
        r2 = params.get("R2", 2.0)
        u_sym, p_sym, syms, A, B = _couette_fields(omega, r1, r2)
        u, p, du, f = _build_callables(u_sym, p_sym, syms, mu, 0.0, True)
        case = ManufacturedCase(case_id, "annulus_polar", 2, mu, 0.0, True,
                                True, dict(params, A=A, B=B), u, p, du, f,
                                dirichlet={"inner": u, "outer": 0},
                                domain_args={"r1": r1, "r2": r2})
        return case
    if case_id == "ethier_steinman":
        a = params.get("a", 1.0)
        dpar = params.get("d", 1.0)
        u_sym, p_sym, syms = _ethier_steinman_fields(a, dpar)
        u, p, du, f = _build_callables(u_sym, p_sym, syms, mu, 0.0, True)
        return ManufacturedCase(case_id, "sphere", 3, mu, 0.0, True, True,
                                params, u, p, du, f,
                                dirichlet={"boundary": u})
    raise ValueError(f"unknown manufactured case '{case_id}'")


def manufactured_case(case_id: str, **params) -> ManufacturedCase:
    """Build a manufactured case; parameters are case-specific (mu, sigma or
    Da, omega/R1/R2, a/d)."""
    key = tuple(sorted(params.items()))
    return _case_cache(case_id, key)


# ---------------------------------------------------------------------------
# independent finite-difference forcing path
# ---------------------------------------------------------------------------

_D1 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
_D2 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0
_OFF = np.arange(-3, 4)


def _fd1(fn, x, a, h):
    acc = 0.0
    for c, o in zip(_D1, _OFF):
        if c:
            xs = x.copy()
            xs[:, a] += o * h
            acc = acc + c * fn(xs)
    return acc / h


def _fd2(fn, x, a, b, h):
    if a == b:
        acc = 0.0
        for c, o in zip(_D2, _OFF):
            if c:
                xs = x.copy()
                xs[:, a] += o * h
                acc = acc + c * fn(xs)
        return acc / h ** 2
    acc = 0.0
    for ca, oa in zip(_D1, _OFF):
        if not ca:
            continue
        for cb, ob in zip(_D1, _OFF):
            if not cb:
                continue
            xs = x.copy()
            xs[:, a] += oa * h
            xs[:, b] += ob * h
            acc = acc + ca * cb * fn(xs)
    return acc / h ** 2


def forcing_fd(case: ManufacturedCase, x, h: float = 1e-2):
    """6th-order finite-difference evaluation of the manufactured forcing,
    independent of the symbolic derivative path."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = case.dim
    npts = x.shape[0]
    u = case.u(x)
    f = case.sigma * u.copy()
    du = np.empty((npts, d, d))
    for a in range(d):
        for b in range(d):
            du[:, a, b] = _fd1(lambda xs, a=a: case.u(xs)[:, a], x, b, h)
    if case.convection:
        f += np.einsum("pb,pab->pa", u, du)
    for a in range(d):
        lap = sum(_fd2(lambda xs, a=a: case.u(xs)[:, a], x, b, b, h)
                  for b in range(d))
        graddiv = sum(_fd2(lambda xs, b=b: case.u(xs)[:, b], x, a, b, h)
                      for b in range(d))
        f[:, a] += -case.mu * (lap + graddiv) + _fd1(case.p, x, a, h)
    return f


def divergence_fd(case: ManufacturedCase, x, h: float = 1e-2):
    """Finite-difference divergence of the exact velocity."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return sum(_fd1(lambda xs, a=a: case.u(xs)[:, a], x, a, h)
               for a in range(case.dim))
