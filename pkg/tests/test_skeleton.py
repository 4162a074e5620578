import numpy as np
import pytest

from siga.bspline import eval_bspline
from siga.cases import annulus_polar, quarter_annulus, two_patch_square, unit_square
from siga.geometry import invert_map, map_jets
from siga.skeleton import (build_skeleton, face_jump, physical_partials,
                           plane_jump_tables)
from siga.tabulate import Discretization


def coefficient_jumps(model, skeleton, coef, order):
    worst = 0.0
    for plane in skeleton.planes:
        pj = plane_jump_tables(model, plane, order)
        vals = np.einsum("fql,fl->fq", pj.jump, coef[pj.gidx])
        worst = max(worst, float(np.abs(vals).max()))
    return worst


def test_face_count_and_h():
    model = unit_square(2, 4)
    sk = build_skeleton(model)
    assert len(sk.faces) == 24
    assert all(f.kind == "intra" for f in sk.faces)
    assert all(abs(f.h - 0.25) < 1e-13 for f in sk.faces)


def test_face_count_formula():
    # intra count per patch: sum_d (e_d - 1) prod_{d' != d} e_d'
    for els in [(3, 5), (4, 4)]:
        from siga.bspline import make_knot_vector
        from siga.cases import _affine_patch
        from siga.geometry import Side, build_multipatch
        kvs = [make_knot_vector(2, np.linspace(0, 1, e + 1)) for e in els]
        patch = _affine_patch(kvs, (0, 0), (1, 1))
        model = build_multipatch([patch], [], {"boundary": []})
        sk = build_skeleton(model)
        expect = (els[0] - 1) * els[1] + (els[1] - 1) * els[0]
        assert len(sk.faces) == expect


def test_interpatch_alpha_zero():
    model = two_patch_square(3, 4)
    sk = build_skeleton(model)
    inter = sk.inter
    assert len(inter) == 4
    assert all(f.alpha == 0 for f in inter)


def test_periodic_seam_alpha():
    model = annulus_polar(3, 8, 2)
    sk = build_skeleton(model)
    seam = [f for f in sk.faces if f.location == 0 and f.direction == 0]
    assert len(seam) == 2
    assert all(f.alpha == 2 for f in seam)
    assert all(f.kind == "intra" for f in seam)


def test_h_halves_under_refinement():
    h1 = {f.h for f in build_skeleton(unit_square(2, 4)).faces}
    h2 = {f.h for f in build_skeleton(unit_square(2, 8)).faces}
    assert max(h2) * 2 - max(h1) < 1e-13


def test_h_mode_variants():
    model = unit_square(2, 4)
    disc = Discretization(model)
    sk_ratio = build_skeleton(model, "volume_ratio", disc=disc)
    sk_mean = build_skeleton(model, "volume_mean", disc=disc)
    # on the uniform unit square all definitions coincide with the spacing
    for sk in (sk_ratio, sk_mean):
        assert all(abs(f.h - 0.25) < 1e-13 for f in sk.faces)


def test_jump_vanishing_random_coefficients(rng):
    for k, alpha in [(2, 1), (3, 1), (4, 3)]:
        model = unit_square(k, 3, alpha)
        sk = build_skeleton(model)
        coef = rng.standard_normal(model.n)
        for m in range(alpha + 1):
            assert coefficient_jumps(model, sk, coef, m) < 1e-10
        assert coefficient_jumps(model, sk, coef, alpha + 1) > 1e-3


def test_interpatch_c0_jump():
    model = two_patch_square(2, 3)
    sk = build_skeleton(model)
    rng = np.random.default_rng(1)
    coef = rng.standard_normal(model.n)
    inter = [p for p in sk.planes if p.kind == "inter"]
    pj0 = plane_jump_tables(model, inter[0], 0)
    pj1 = plane_jump_tables(model, inter[0], 1)
    v0 = np.einsum("fql,fl->fq", pj0.jump, coef[pj0.gidx])
    v1 = np.einsum("fql,fl->fq", pj1.jump, coef[pj1.gidx])
    assert np.abs(v0).max() < 1e-12
    assert np.abs(v1).max() > 1e-3


def test_face_jump_single_face_oracle():
    """Plane-wise jumps equal one-sided two-trace evaluations at the same
    point (independent de Boor trace oracle)."""
    model = unit_square(2, 4, 1)
    sk = build_skeleton(model)
    face = [f for f in sk.faces if f.direction == 0][5]
    gidx, jump, x, w = face_jump(model, sk, face, 2)
    q = 1  # some quadrature point of the face
    xi = x[q]  # identity map: physical = parametric
    gl, phl = physical_partials(model, 0, xi, 2, sides=[-1, 1])
    gr, phr = physical_partials(model, 0, xi, 2, sides=[1, 1])
    # x-normal face: the order-2 normal derivative is d2/dx2
    for j, g in enumerate(gidx):
        dl = phl[2][np.flatnonzero(gl == g), 0, 0]
        dr = phr[2][np.flatnonzero(gr == g), 0, 0]
        expect = (dl[0] if dl.size else 0.0) - (dr[0] if dr.size else 0.0)
        assert abs(jump[q, j] - expect) < 1e-9 * max(1.0, abs(expect))


def test_normal_consistency():
    """Unit normals agree between the two one-sided evaluations and are
    orthogonal to the face tangent."""
    model = quarter_annulus(2, 3)
    sk = build_skeleton(model)
    for plane in sk.planes[:4]:
        pj = plane_jump_tables(model, plane, 1)
        assert np.abs(np.linalg.norm(pj.normal, axis=-1) - 1).max() < 1e-12
        patch = model.patches[plane.patch]
        delta = plane.direction
        cross = 1 - delta
        u_b = patch.kvs[delta].breakpoints[plane.location]
        # evaluate jets on both sides at the same parametric face points
        nq = pj.x.shape[1]
        kv_c = patch.kvs[cross]
        xi = np.empty((plane.n_faces * nq, 2))
        xi[:, delta] = u_b
        from siga.quadrature import gauss_rule
        rule = gauss_rule(nq)
        cc = []
        for e in range(kv_c.n_elements):
            lo, hi = kv_c.element_bounds(e)
            cc.append(lo + rule.points * (hi - lo))
        xi[:, cross] = np.concatenate(cc)
        for sgn, store in ((-1, "m"), (1, "p")):
            sides = [1, 1]
            sides[delta] = sgn
            J = map_jets(patch, xi, 1, sides=sides).jacobian
            Jinv = np.linalg.inv(J)
            nvec = Jinv[:, delta, :]
            nvec = nvec / np.linalg.norm(nvec, axis=-1, keepdims=True)
            tang = J[..., cross]
            dots = np.abs((nvec * tang).sum(-1)) / np.linalg.norm(tang, axis=-1)
            assert dots.max() < 1e-12
            if sgn == -1:
                n_minus = nvec
            else:
                assert np.abs(nvec - n_minus).max() < 1e-12


def test_physical_partials_monomial_on_annulus():
    """A physical polynomial field has exact physical partials through the
    curved rational map."""
    model = quarter_annulus(3, 3)
    patch = model.patches[0]
    # linear precision: the rational basis with control x-coordinates as
    # coefficients reproduces f(x, y) = x exactly (single patch, identity
    # linkage, so global index = local index)
    rng = np.random.default_rng(2)
    coef_x = patch.control_points[:, 0]
    for _ in range(5):
        xi = rng.uniform(0.05, 0.95, 2)
        gidx, phys = physical_partials(model, 0, xi, 2)
        cx = coef_x[gidx]
        grad = phys[1].T @ cx
        hess = np.einsum("lab,l->ab", phys[2], cx)
        assert np.allclose(grad, [1.0, 0.0], atol=1e-11)
        assert np.abs(hess).max() < 1e-9


def test_physical_partials_vs_fd(rng):
    """m-th physical derivatives match physical-space finite differences."""
    model = quarter_annulus(3, 3)
    patch = model.patches[0]
    coef = rng.standard_normal(model.n)

    def field(xs, seed_xi):
        out = []
        for xx in xs:
            xi = invert_map(patch, xx, seed=seed_xi)
            from siga.skeleton import _tensor_param_tables
            evals = [eval_bspline(kv, xi[j], 0) for j, kv in enumerate(patch.kvs)]
            param, loc = _tensor_param_tables(patch, evals, 0)
            out.append(param[(0, 0)][0] @ coef[model.scalar_maps[0][loc[0]]])
        return np.array(out)

    xi0 = np.array([0.43, 0.57])
    gidx, phys = physical_partials(model, 0, xi0, 3)
    x0 = map_jets(patch, xi0[None], 0).x[0]
    h = 2e-4
    e = np.eye(2)
    grad = phys[1].T @ coef[gidx]
    for a in range(2):
        fd = (field([x0 + h * e[a]], xi0) - field([x0 - h * e[a]], xi0)) / (2 * h)
        assert abs(grad[a] - fd[0]) < 1e-6 * max(1, abs(grad[a]))
    hess = np.einsum("lab,l->ab", phys[2], coef[gidx])
    fd = (field([x0 + h * (e[0] + e[1])], xi0)[0]
          - field([x0 + h * (e[0] - e[1])], xi0)[0]
          - field([x0 + h * (e[1] - e[0])], xi0)[0]
          + field([x0 - h * (e[0] + e[1])], xi0)[0]) / (4 * h * h)
    assert abs(hess[0, 1] - fd) < 1e-5 * max(1.0, abs(fd))
