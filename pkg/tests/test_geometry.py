import numpy as np
import pytest

from siga.bspline import make_knot_vector
from siga.cases import (annulus_polar, case_geometry, cylinder_channel,
                        quarter_annulus, sphere, two_patch_square, unit_square)
from siga.geometry import (AnalyticMap, GeometryError, build_patch, invert_map,
                           map_derivatives, map_jets, model_from_json,
                           model_to_json)


def affine_patch_2d(k=2, elements=3, scale=2.0):
    kv = make_knot_vector(k, np.linspace(0, 1, elements + 1))
    g = kv.greville()
    cps = np.stack(np.meshgrid(scale * g, scale * g, indexing="ij"),
                   -1).reshape(-1, 2)
    return build_patch([kv, kv], cps)


def test_build_patch_validation():
    kv = make_knot_vector(1, [0, 1])
    cps = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
    build_patch([kv, kv], cps)
    with pytest.raises(GeometryError):
        build_patch([kv, kv], cps[:3])
    with pytest.raises(GeometryError):
        build_patch([kv, kv], cps, weights=[1, 1, 0.0, 1])


def test_affine_map_jets():
    patch = affine_patch_2d()
    jet = map_derivatives(patch, [0.33, 0.71], 3)
    assert np.allclose(jet.x[0], [0.66, 1.42])
    assert np.allclose(jet.jacobian[0], 2 * np.eye(2), atol=1e-13)
    assert np.abs(jet.jets[2]).max() < 1e-12
    assert np.abs(jet.jets[3]).max() < 1e-12


def test_quarter_annulus_exact_circle():
    model = quarter_annulus(2, 4)
    patch = model.patches[0]
    for t in np.linspace(0, 1, 100):
        x = map_jets(patch, [[t, 0.0]], 0).x[0]
        assert abs(np.hypot(*x) - 1.0) < 1e-12
        x = map_jets(patch, [[t, 1.0]], 0).x[0]
        assert abs(np.hypot(*x) - 4.0) < 1e-12


def test_nurbs_partition_of_unity():
    model = quarter_annulus(3, 5)
    patch = model.patches[0]
    from siga.bspline import eval_bspline
    from siga.skeleton import _tensor_param_tables
    rng = np.random.default_rng(0)
    for _ in range(20):
        xi = rng.uniform(0, 1, 2)
        evals = [eval_bspline(kv, xi[j], 0) for j, kv in enumerate(patch.kvs)]
        param, _ = _tensor_param_tables(patch, evals, 0)
        assert abs(param[(0, 0)].sum() - 1.0) < 1e-13


def test_polar_map_derivatives():
    am = AnalyticMap("polar_annulus", {"R1": 1.0, "R2": 2.0})
    kvp = make_knot_vector(2, np.linspace(0, 1, 9), periodic=True)
    kvr = make_knot_vector(2, np.linspace(0, 1, 3))
    patch = build_patch([kvp, kvr], analytic=am)
    jet = map_derivatives(patch, [0.0, 0.5], 1)
    assert np.allclose(jet.x[0], [0.0, 1.5], atol=1e-14)
    assert np.allclose(jet.jacobian[0][:, 0], [2 * np.pi * 1.5, 0], atol=1e-12)
    jet = map_derivatives(patch, [0.25, 0.0], 0)
    assert np.allclose(jet.x[0], [1.0, 0.0], atol=1e-14)


def test_map_second_derivatives_vs_fd():
    model = quarter_annulus(2, 3)
    patch = model.patches[0]
    xi0 = np.array([0.41, 0.37])
    jet = map_jets(patch, xi0[None], 2)
    h = 1e-4
    for a in range(2):
        for b in range(2):
            ea, eb = np.zeros(2), np.zeros(2)
            ea[a] = h
            eb[b] = h
            pts = np.array([xi0 + ea + eb, xi0 + ea - eb,
                            xi0 - ea + eb, xi0 - ea - eb])
            vals = map_jets(patch, pts, 0).x
            fd = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * h * h)
            rel = np.abs(jet.jets[2][0, :, a, b] - fd) / max(np.abs(fd).max(), 1)
            assert rel.max() < 1e-7


def test_invert_map():
    patch = affine_patch_2d(scale=1.0)
    xi = invert_map(patch, np.array([0.3, 0.7]))
    assert np.allclose(xi, [0.3, 0.7], atol=1e-10)
    am = AnalyticMap("polar_annulus", {"R1": 1.0, "R2": 2.0})
    kvp = make_knot_vector(2, np.linspace(0, 1, 9), periodic=True)
    kvr = make_knot_vector(2, np.linspace(0, 1, 3))
    pol = build_patch([kvp, kvr], analytic=am)
    xi = invert_map(pol, np.array([0.0, 1.5]))
    assert np.allclose(xi, [0.0, 0.5], atol=1e-9) or np.allclose(
        xi, [1.0, 0.5], atol=1e-9)
    with pytest.raises(GeometryError):
        invert_map(affine_patch_2d(scale=1.0), np.array([1.5, 1.5]))


def test_multipatch_counts():
    assert unit_square(2, 4).n == 36
    assert two_patch_square(2, 4).n == 2 * 36 - 6
    assert cylinder_channel(2, 0).n == 342


def test_cylinder_refinement_counts():
    # 3n tracks the published sequence minus the duplicated ring-downstream
    # interface functions (10/18/34 at levels 0..2)
    assert 3 * cylinder_channel(2, 0).n == 1056 - 30
    assert 3 * cylinder_channel(2, 1).n == 3420 - 54
    assert 3 * cylinder_channel(2, 2).n == 12180 - 102


def test_nonconforming_interface_rejected():
    from siga.geometry import InterfaceSpec, Side, build_multipatch
    a = two_patch_square(2, 4)
    left, right = a.patches
    # break conformity: shift the right patch
    bad = build_patch(right.kvs, right.control_points + 0.01, right.weights)
    with pytest.raises(GeometryError):
        build_multipatch([left, bad], [InterfaceSpec(0, Side(0, 1), 1, Side(0, 0))])


def test_linkage_idempotent():
    model = two_patch_square(2, 4)
    other = two_patch_square(2, 4)
    assert model.n == other.n
    for a, b in zip(model.scalar_maps, other.scalar_maps):
        assert np.array_equal(a, b)


def test_sphere_map_points():
    model = sphere(2, 4)
    patch = model.patches[0]
    x = map_jets(patch, [[1.0, 0.0, 0.0]], 0).x[0]
    assert np.allclose(x, [1, 0, 0], atol=1e-14)
    x = map_jets(patch, [[1.0, 1.0, 1.0]], 0).x[0]
    assert np.allclose(x, np.ones(3) / np.sqrt(3), atol=1e-14)


def test_case_geometry_dispatch():
    assert case_geometry("unit_square", 2, 4).n == 36
    assert case_geometry("annulus_polar", 2, (8, 2)).n == 32
    with pytest.raises(GeometryError):
        case_geometry("nope", 2, 4)


def test_jacobian_positive_all_cases():
    from siga.tabulate import element_batch
    models = [unit_square(2, 4), quarter_annulus(2, 4), annulus_polar(2, 8, 2),
              cylinder_channel(2, 0), sphere(1, 3)]
    for model in models:
        for p in range(len(model.patches)):
            element_batch(model, p)  # raises on non-positive detJ


def test_geometric_exactness_cylinder():
    model = cylinder_channel(2, 1)
    for p in range(4):
        xi = np.stack([np.linspace(0, 1, 40), np.zeros(40)], -1)
        x = map_jets(model.patches[p], xi, 0).x
        r = np.hypot(x[:, 0] - 0.2, x[:, 1] - 0.2)
        assert np.abs(r - 0.05).max() < 1e-12


def test_json_round_trip(tmp_path):
    from siga.geometry import load_model, save_model
    for model in (cylinder_channel(2, 0), annulus_polar(2, 8, 2)):
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert back.n == model.n
        assert back.dim == model.dim
        for pa, pb in zip(model.patches, back.patches):
            if pa.analytic is None:
                assert np.allclose(pa.control_points, pb.control_points)
            else:
                assert pa.analytic.name == pb.analytic.name
        # second round trip is identical text
        doc1 = model_to_json(model)
        doc2 = model_to_json(model_from_json(doc1))
        import json
        assert json.dumps(doc1, sort_keys=True) == json.dumps(doc2, sort_keys=True)
