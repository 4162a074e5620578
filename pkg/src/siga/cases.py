"""Predefined case geometries: unit square, quarter annulus, periodic polar
annulus, five-patch cylinder channel, and the cube-to-sphere map."""

from __future__ import annotations

import numpy as np

from .bspline import make_knot_vector
from .geometry import (AnalyticMap, GeometryError, InterfaceSpec,
                       MultiPatchModel, NurbsPatch, Side, build_multipatch,
                       build_patch, elevate_degree, insert_knots,
                       refine_uniform)

# Channel benchmark constants
CHANNEL_LENGTH = 2.2
CHANNEL_HEIGHT = 0.41
CYLINDER_RADIUS = 0.05
CYLINDER_CENTER = (0.2, 0.2)
OGRID_WIDTH = 0.4          # x-extent of the block holding the cylinder
RADIAL_GRADING = 1.3       # span growth away from the cylinder
DOWNSTREAM_GRADING = {"steady": 1.3, "unsteady": 1.1}

CASE_IDS = ("unit_square", "quarter_annulus", "annulus_polar",
            "cylinder_channel", "sphere")


def _affine_patch(kvs, corners_lo, corners_hi):
    """Axis-aligned box patch with Greville control points (exact affine map)."""
    d = len(kvs)
    grevs = []
    for delta, kv in enumerate(kvs):
        g = kv.greville()
        a, b = kv.domain
        t = (g - a) / (b - a)
        grevs.append(corners_lo[delta] + t * (corners_hi[delta] - corners_lo[delta]))
    mesh = np.meshgrid(*grevs, indexing="ij")
    cps = np.stack([m.ravel() for m in mesh], axis=-1)
    return build_patch(kvs, cps)


def unit_square(k: int, elements: int, alpha=None) -> MultiPatchModel:
    bp = np.linspace(0.0, 1.0, elements + 1)
    kv = make_knot_vector(k, bp, alpha)
    patch = _affine_patch([kv, kv], (0.0, 0.0), (1.0, 1.0))
    tags = {"boundary": [(0, Side(0, 0)), (0, Side(0, 1)),
                         (0, Side(1, 0)), (0, Side(1, 1))]}
    return build_multipatch([patch], [], tags,
                            {"case": "unit_square", "k": k, "elements": elements})


def two_patch_square(k: int, elements: int, alpha=None) -> MultiPatchModel:
    """Unit square split at x = 1/2 into two conforming patches."""
    bp = np.linspace(0.0, 1.0, elements + 1)
    kv_y = make_knot_vector(k, bp, alpha)
    kv_x = make_knot_vector(k, 0.5 * bp, alpha)
    left = _affine_patch([kv_x, kv_y], (0.0, 0.0), (0.5, 1.0))
    kv_x2 = make_knot_vector(k, 0.5 + 0.5 * bp, alpha)
    right = _affine_patch([kv_x2, kv_y], (0.5, 0.0), (1.0, 1.0))
    interfaces = [InterfaceSpec(0, Side(0, 1), 1, Side(0, 0))]
    tags = {"boundary": [(0, Side(0, 0)), (0, Side(1, 0)), (0, Side(1, 1)),
                         (1, Side(0, 1)), (1, Side(1, 0)), (1, Side(1, 1))]}
    return build_multipatch([left, right], interfaces, tags,
                            {"case": "two_patch_square", "k": k})


def _arc_ruled_patch(center, radius, angle_start, angle_end, outer_start,
                     outer_end, k, n_circ, radial_breaks):
    """Quarter-arc to straight-segment ruled patch, exact circle inner edge.

    Circumferential direction runs from angle_start to angle_end (one 90
    degree Bezier arc before refinement); radial direction from the circle to
    the straight outer segment. Degree elevated to (k, k) exactly, then
    refined to n_circ uniform circumferential elements and the given radial
    breakpoints.
    """
    inner, w_in = _arc_control_points(center, radius, angle_start, angle_end)
    outer_start = np.asarray(outer_start, float)
    outer_end = np.asarray(outer_end, float)
    outer = np.array([outer_start, 0.5 * (outer_start + outer_end), outer_end])
    cps = np.empty((3, 2, 2))
    wts = np.empty((3, 2))
    cps[:, 0] = inner
    cps[:, 1] = outer
    wts[:, 0] = w_in
    wts[:, 1] = 1.0
    kv_c = make_knot_vector(2, [0.0, 1.0])
    kv_r = make_knot_vector(1, [0.0, 1.0])
    patch = build_patch([kv_c, kv_r], cps.reshape(-1, 2), wts.reshape(-1))
    patch = elevate_degree(patch, [k - 2, k - 1])
    if n_circ > 1:
        patch = insert_knots(patch, 0, np.arange(1, n_circ) / n_circ)
    rb = np.asarray(radial_breaks, float)
    if rb.size:
        patch = insert_knots(patch, 1, rb)
    return patch


def _graded_breaks(n: int, ratio: float) -> np.ndarray:
    """Interior breakpoints of n spans with lengths growing by ``ratio``."""
    spans = ratio ** np.arange(n)
    t = np.concatenate([[0.0], np.cumsum(spans)]) / spans.sum()
    return t[1:-1]


def _arc_control_points(center, radius, a0_deg, a1_deg):
    """Rational quadratic Bezier control points and weights of a 90 deg arc."""
    cx, cy = center
    a0, a1 = np.deg2rad(a0_deg), np.deg2rad(a1_deg)
    if not np.isclose(abs(a1 - a0), np.pi / 2):
        raise GeometryError("arc helper covers 90 degree arcs")
    amid = 0.5 * (a0 + a1)
    w_mid = np.cos(0.5 * abs(a1 - a0))
    pts = np.array([
        [cx + radius * np.cos(a0), cy + radius * np.sin(a0)],
        [cx + radius / w_mid * np.cos(amid), cy + radius / w_mid * np.sin(amid)],
        [cx + radius * np.cos(a1), cy + radius * np.sin(a1)],
    ])
    return pts, np.array([1.0, w_mid, 1.0])


def quarter_annulus(k: int, elements: int, r1=1.0, r2=4.0) -> MultiPatchModel:
    """Exact quarter annulus ring, R1=1 to R2=4, in the first quadrant."""
    if k < 2:
        raise GeometryError("exact annulus geometry needs degree >= 2")
    inner, wts = _arc_control_points((0.0, 0.0), r1, 90.0, 0.0)
    outer = inner * (r2 / r1)
    cps = np.stack([inner, outer], axis=1)          # (3 circ, 2 rad, 2)
    w = np.stack([wts, wts], axis=1)
    kv_c = make_knot_vector(2, [0.0, 1.0])
    kv_r = make_knot_vector(1, [0.0, 1.0])
    patch = build_patch([kv_c, kv_r], cps.reshape(-1, 2), w.reshape(-1))
    patch = elevate_degree(patch, [k - 2, k - 1])
    patch = insert_knots(patch, 0, np.arange(1, elements) / elements)
    patch = insert_knots(patch, 1, np.arange(1, elements) / elements)
    tags = {"boundary": [(0, Side(0, 0)), (0, Side(0, 1)),
                         (0, Side(1, 0)), (0, Side(1, 1))]}
    return build_multipatch([patch], [], tags,
                            {"case": "quarter_annulus", "k": k,
                             "elements": elements})


def annulus_polar(k: int, e_circ: int, e_rad: int, r1=1.0, r2=2.0) -> MultiPatchModel:
    """Full annulus via the analytic polar map, periodic circumferentially."""
    kv_c = make_knot_vector(k, np.linspace(0.0, 1.0, e_circ + 1), periodic=True)
    kv_r = make_knot_vector(k, np.linspace(0.0, 1.0, e_rad + 1))
    patch = build_patch([kv_c, kv_r],
                        analytic=AnalyticMap("polar_annulus", {"R1": r1, "R2": r2}))
    tags = {"inner": [(0, Side(1, 0))], "outer": [(0, Side(1, 1))]}
    return build_multipatch([patch], [], tags,
                            {"case": "annulus_polar", "k": k,
                             "elements": [e_circ, e_rad], "R1": r1, "R2": r2})


def sphere(k: int, elements: int) -> MultiPatchModel:
    """Unit ball parameterized from the bi-unit cube."""
    kv = make_knot_vector(k, np.linspace(-1.0, 1.0, elements + 1))
    patch = build_patch([kv, kv, kv], analytic=AnalyticMap("cube_sphere"))
    tags = {"boundary": [(0, Side(d, e)) for d in range(3) for e in range(2)]}
    return build_multipatch([patch], [], tags,
                            {"case": "sphere", "k": k, "elements": elements})


def cylinder_channel(k: int, refine_level: int = 0,
                     variant: str = "steady") -> MultiPatchModel:
    """Five-patch channel with a circular obstacle (benchmark geometry).

    Four ruled patches surround the cylinder (8x5 elements at the coarsest
    level, radially graded toward the cylinder); a downstream patch spans the
    remaining channel (8x8, coarsened toward the outflow). Patches are
    conforming; C0 continuity across interfaces.
    """
    if k < 2:
        raise GeometryError("cylinder geometry needs degree >= 2")
    cx, cy = CYLINDER_CENTER
    w, h = OGRID_WIDTH, CHANNEL_HEIGHT
    corners = {45.0: (w, h), -45.0: (w, 0.0), -135.0: (0.0, 0.0), 135.0: (0.0, h)}
    radial_breaks = _graded_breaks(5, RADIAL_GRADING)
    ring = []
    # clockwise angle runs; outer edges trace the block sides
    for a_start, a_end in ((45.0, -45.0), (-45.0, -135.0),
                           (-135.0, -225.0), (135.0, 45.0)):
        key_s = a_start if a_start in corners else a_start + 360.0
        key_e = a_end if a_end in corners else a_end + 360.0
        ring.append(_arc_ruled_patch((cx, cy), CYLINDER_RADIUS, a_start, a_end,
                                     corners[key_s], corners[key_e],
                                     k, 8, radial_breaks))
    down_ratio = DOWNSTREAM_GRADING[variant]
    kv_v = ring[0].kvs[0]
    down_breaks = _graded_breaks(8, down_ratio)
    kv_h = make_knot_vector(k, np.concatenate([[0.0], down_breaks, [1.0]]))
    # vertical direction of the downstream patch runs downward to match the
    # right ring patch's circumferential direction
    downstream = _affine_patch([kv_v, kv_h], (h, w), (0.0, CHANNEL_LENGTH))
    cps = downstream.control_points[:, ::-1].copy()
    downstream = build_patch(downstream.kvs, cps)
    patches = ring + [downstream]
    interfaces = [
        InterfaceSpec(0, Side(0, 1), 1, Side(0, 0)),
        InterfaceSpec(1, Side(0, 1), 2, Side(0, 0)),
        InterfaceSpec(2, Side(0, 1), 3, Side(0, 0)),
        InterfaceSpec(3, Side(0, 1), 0, Side(0, 0)),
        InterfaceSpec(0, Side(1, 1), 4, Side(1, 0)),
    ]
    tags = {
        "cylinder": [(p, Side(1, 0)) for p in range(4)],
        "inflow": [(2, Side(1, 1))],
        "walls": [(1, Side(1, 1)), (3, Side(1, 1)),
                  (4, Side(0, 0)), (4, Side(0, 1))],
        "outflow": [(4, Side(1, 1))],
    }
    model = build_multipatch(patches, interfaces, tags, {
        "case": "cylinder_channel", "k": k, "refine_level": refine_level,
        "variant": variant, "radial_grading": RADIAL_GRADING,
        "downstream_grading": down_ratio,
        "L": CHANNEL_LENGTH, "H": CHANNEL_HEIGHT, "R": CYLINDER_RADIUS,
        "center": list(CYLINDER_CENTER)})
    if refine_level:
        patches = [refine_uniform(p, refine_level) for p in model.patches]
        model = build_multipatch(patches, interfaces, tags, model.metadata)
    return model


def case_geometry(case_id: str, k: int, refine, alpha=None,
                  variant: str = "steady") -> MultiPatchModel:
    """Build a predefined case geometry.

    ``refine`` means elements per direction (unit_square, quarter_annulus,
    sphere), an (e_circ, e_rad) pair (annulus_polar), or the uniform
    refinement level (cylinder_channel).
    """
    if case_id == "unit_square":
        return unit_square(k, int(refine), alpha)
    if case_id == "quarter_annulus":
        if alpha not in (None, k - 1):
            raise GeometryError("quarter_annulus supports maximal regularity only")
        return quarter_annulus(k, int(refine))
    if case_id == "annulus_polar":
        if alpha not in (None, k - 1):
            raise GeometryError("annulus_polar supports maximal regularity only")
        e_circ, e_rad = refine
        return annulus_polar(k, int(e_circ), int(e_rad))
    if case_id == "cylinder_channel":
        if alpha not in (None, k - 1):
            raise GeometryError("cylinder_channel supports maximal regularity only")
        return cylinder_channel(k, int(refine), variant)
    if case_id == "sphere":
        if alpha not in (None, k - 1):
            raise GeometryError("sphere supports maximal regularity only")
        return sphere(k, int(refine))
    raise GeometryError(f"unknown case_id '{case_id}' (choose from {CASE_IDS})")
