import numpy as np
import pytest

from siga.quadrature import QuadRule, element_rule, face_rule, gauss_rule


def test_one_point():
    r = gauss_rule(1)
    assert np.allclose(r.points, [0.5]) and np.allclose(r.weights, [1.0])


def test_two_point():
    r = gauss_rule(2)
    assert np.allclose(sorted(r.points), [(1 - 1 / np.sqrt(3)) / 2,
                                          (1 + 1 / np.sqrt(3)) / 2])
    assert np.allclose(r.weights, [0.5, 0.5])


def test_cubic_exact_with_two_points():
    r = gauss_rule(2)
    assert abs((r.weights * r.points ** 3).sum() - 0.25) < 1e-15


@pytest.mark.parametrize("n", range(1, 17))
def test_exactness_orders(n):
    r = gauss_rule(n)
    assert np.all(r.weights > 0)
    assert abs(r.weights.sum() - 1.0) < 1e-14
    for q in range(2 * n):
        exact = 1.0 / (q + 1)
        assert abs((r.weights * r.points ** q).sum() - exact) < 1e-13


def test_out_of_range():
    with pytest.raises(ValueError):
        gauss_rule(0)
    with pytest.raises(ValueError):
        gauss_rule(17)


def test_tensor_counts():
    assert element_rule(2, 2).points.shape == (9, 2)
    assert face_rule(3, 3).points.shape == (16, 2)


def test_tensor_weights_multiply():
    r = element_rule(1, 2, n=2)
    r1 = gauss_rule(2)
    expect = np.outer(r1.weights, r1.weights).ravel()
    assert np.allclose(r.weights, expect)


def test_mass_of_unit_square():
    r = element_rule(2, 2)
    assert abs(r.weights.sum() - 1.0) < 1e-14
