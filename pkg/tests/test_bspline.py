import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siga.bspline import (KnotVectorError, breakpoint_regularity, eval_bspline,
                          eval_lagrange_1d, make_knot_vector)


# -- independent textbook oracle --------------------------------------------

def naive_bspline(flat, k, i, u):
    """Plain Cox-de Boor recursion N_{i,k}(u), right-continuous."""
    if k == 0:
        last = np.max(np.flatnonzero(flat < flat[-1]))
        if flat[i] <= u < flat[i + 1]:
            return 1.0
        if u >= flat[-1] and i == last:
            return 1.0 if u <= flat[-1] else 0.0
        return 0.0
    left = 0.0
    if flat[i + k] > flat[i]:
        left = (u - flat[i]) / (flat[i + k] - flat[i]) * naive_bspline(flat, k - 1, i, u)
    right = 0.0
    if flat[i + k + 1] > flat[i + 1]:
        right = ((flat[i + k + 1] - u) / (flat[i + k + 1] - flat[i + 1])
                 * naive_bspline(flat, k - 1, i + 1, u))
    return left + right


def naive_bspline_deriv(flat, k, i, u, order):
    if order == 0:
        return naive_bspline(flat, k, i, u)
    a = 0.0
    if flat[i + k] > flat[i]:
        a = naive_bspline_deriv(flat, k - 1, i, u, order - 1) / (flat[i + k] - flat[i])
    b = 0.0
    if flat[i + k + 1] > flat[i + 1]:
        b = naive_bspline_deriv(flat, k - 1, i + 1, u, order - 1) \
            / (flat[i + k + 1] - flat[i + 1])
    return k * (a - b)


# -- construction ------------------------------------------------------------

def test_open_quadratic_counts():
    kv = make_knot_vector(2, [0, .25, .5, .75, 1], 1)
    assert np.allclose(kv.flat, [0, 0, 0, .25, .5, .75, 1, 1, 1])
    assert kv.n == 6


def test_single_bezier_element():
    kv = make_knot_vector(3, [0, 1])
    assert np.allclose(kv.flat, [0, 0, 0, 0, 1, 1, 1, 1])
    assert kv.n == 4


def test_c0_quadratic_count():
    kv = make_knot_vector(2, np.linspace(0, 1, 5), 0)
    assert kv.n == 9


def test_invalid_breakpoints():
    with pytest.raises(KnotVectorError):
        make_knot_vector(2, [0, 0.5, 0.5, 1])
    with pytest.raises(KnotVectorError):
        make_knot_vector(2, [0, .5, 1], 2)
    with pytest.raises(KnotVectorError):
        make_knot_vector(2, [0, .5, 1], -1)


def test_periodic_count():
    kv = make_knot_vector(2, np.linspace(0, 1, 9), periodic=True)
    assert kv.n == 8


# -- regularity ---------------------------------------------------------------

def test_breakpoint_regularity():
    cubic1 = make_knot_vector(3, np.linspace(0, 1, 5), 2)
    assert breakpoint_regularity(cubic1, 1) == 2
    cubic3 = make_knot_vector(3, np.linspace(0, 1, 5), 0)
    assert breakpoint_regularity(cubic3, 2) == 0
    per = make_knot_vector(2, np.linspace(0, 1, 9), periodic=True)
    assert breakpoint_regularity(per, 0) == 1
    with pytest.raises(KnotVectorError):
        breakpoint_regularity(cubic1, 0)


# -- evaluation ---------------------------------------------------------------

def test_linear_hats():
    kv = make_knot_vector(1, [0, 1])
    be = eval_bspline(kv, 0.3)
    assert np.allclose(be.values[0], [0.7, 0.3])


def test_quadratic_vs_naive_oracle():
    kv = make_knot_vector(2, [0, 0.5, 1])
    be = eval_bspline(kv, 0.25)
    expect = [naive_bspline(kv.flat, 2, i, 0.25) for i in range(kv.n)]
    nz = np.array(expect)[be.indices]
    assert np.allclose(be.values[0], nz, atol=1e-15)
    assert abs(be.values[0].sum() - 1) < 1e-14


def test_derivative_sum_zero():
    kv = make_knot_vector(3, np.linspace(0, 1, 7), 1)
    for u in np.linspace(0.01, 0.99, 23):
        be = eval_bspline(kv, u, 1)
        assert abs(be.values[1].sum()) < 1e-12


def test_oracle_equivalence_random(rng):
    """Optimized evaluation equals the naive recursion on random samples."""
    count = 0
    while count < 1000:
        k = int(rng.integers(1, 5))
        nbp = int(rng.integers(2, 6))
        bp = np.sort(rng.uniform(0, 1, nbp))
        bp = np.unique(np.concatenate([[0.0], bp, [1.0]]))
        alphas = rng.integers(0, k, max(bp.size - 2, 0))
        kv = make_knot_vector(k, bp, alphas if alphas.size else None)
        u = float(rng.uniform(0, 1))
        d = int(rng.integers(0, k + 1))
        be = eval_bspline(kv, u, d)
        for j, gi in enumerate(be.indices):
            ref = naive_bspline_deriv(kv.flat, k, gi, u, d)
            assert abs(be.values[d, j] - ref) <= 1e-13 * max(1, abs(ref)), \
                (k, bp, u, d)
        count += 1


def test_polynomial_reproduction():
    """Degree-k spline space reproduces monomials with exact derivatives."""
    k = 3
    kv = make_knot_vector(k, np.linspace(0, 1, 6), 2)
    g = kv.greville()
    for q in range(k + 1):
        # coefficients of u^q: symmetric polynomials of interior knots
        coefs = np.empty(kv.n)
        for j in range(kv.n):
            window = kv.flat[j + 1: j + k + 1]
            if q == 0:
                coefs[j] = 1.0
            else:
                from itertools import combinations
                combs = list(combinations(range(k), q))
                coefs[j] = sum(np.prod(window[list(c)]) for c in combs) / len(combs)
        for u in np.linspace(0.05, 0.95, 9):
            be = eval_bspline(kv, u, 2)
            val = be.values[0] @ coefs[be.indices]
            der = be.values[1] @ coefs[be.indices]
            assert abs(val - u ** q) < 1e-11 * max(1, abs(u ** q))
            dref = q * u ** (q - 1) if q >= 1 else 0.0
            assert abs(der - dref) < 1e-10
    # Marsden: the coefficients of u itself are the Greville abscissae
    assert np.allclose(g, kv.greville(), atol=1e-12)


def test_one_sided_continuity():
    """One-sided derivatives agree up to order alpha, differ at alpha+1."""
    k = 3
    for alpha in range(k):
        kv = make_knot_vector(k, np.linspace(0, 1, 5), alpha)
        u = kv.breakpoints[2]
        left = eval_bspline(kv, u, k, side=-1)
        right = eval_bspline(kv, u, k, side=+1)
        vals_l = np.zeros((k + 1, kv.n))
        vals_r = np.zeros((k + 1, kv.n))
        vals_l[:, left.indices] = left.values[: k + 1]
        vals_r[:, right.indices] = right.values[: k + 1]
        scale = np.abs(vals_l).max()
        for d in range(alpha + 1):
            assert np.abs(vals_l[d] - vals_r[d]).max() < 1e-10 * max(scale, 1)
        assert np.abs(vals_l[alpha + 1] - vals_r[alpha + 1]).max() > 1e-6


def test_out_of_range_and_periodic_wrap():
    kv = make_knot_vector(2, [0, .5, 1])
    with pytest.raises(ValueError):
        eval_bspline(kv, 1.5)
    per = make_knot_vector(2, np.linspace(0, 1, 5), periodic=True)
    a = eval_bspline(per, 0.3, 1)
    b = eval_bspline(per, 1.3, 1)
    assert a.first_index == b.first_index
    assert np.allclose(a.values, b.values)


def test_high_derivatives_vanish():
    kv = make_knot_vector(2, [0, .5, 1])
    be = eval_bspline(kv, 0.3, 3)
    assert np.allclose(be.values[3], 0.0)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 4), n_el=st.integers(1, 6),
       u=st.floats(0, 1), periodic=st.booleans())
def test_partition_of_unity_property(k, n_el, u, periodic):
    if periodic and n_el * 1 < k + 1:
        n_el = k + 1
    kv = make_knot_vector(k, np.linspace(0, 1, n_el + 1), periodic=periodic)
    be = eval_bspline(kv, u)
    assert abs(be.values[0].sum() - 1.0) <= 1e-13


# -- Lagrange -----------------------------------------------------------------

def test_lagrange_values():
    assert np.allclose(eval_lagrange_1d(1, 0.25).values[0], [0.75, 0.25])
    assert np.allclose(eval_lagrange_1d(2, 0.5).values[0], [0, 1, 0])
    v = eval_lagrange_1d(3, 1 / 3, 0).values[0]
    assert np.allclose(v, [0, 1, 0, 0], atol=1e-12)


def test_lagrange_interpolation_property():
    k = 4
    nodes = np.linspace(0, 1, k + 1)
    for j, t in enumerate(nodes):
        v = eval_lagrange_1d(k, t).values[0]
        expect = np.zeros(k + 1)
        expect[j] = 1
        assert np.allclose(v, expect, atol=1e-12)
