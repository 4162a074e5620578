"""Skeleton-stabilized isogeometric analysis for incompressible viscous flow."""

__version__ = "0.1.0"

from .bspline import (BasisEval, KnotVector, breakpoint_regularity,
                      eval_bspline, eval_lagrange_1d, make_knot_vector)
from .geometry import (AnalyticMap, InterfaceSpec, MapJet, MultiPatchModel,
                       NurbsPatch, Side, build_multipatch, build_patch,
                       invert_map, load_model, map_derivatives, save_model)
from .quadrature import QuadRule, element_rule, face_rule, gauss_rule

__all__ = [
    "BasisEval", "KnotVector", "breakpoint_regularity", "eval_bspline",
    "eval_lagrange_1d", "make_knot_vector",
    "AnalyticMap", "InterfaceSpec", "MapJet", "MultiPatchModel", "NurbsPatch",
    "Side", "build_multipatch", "build_patch", "invert_map", "load_model",
    "map_derivatives", "save_model",
    "QuadRule", "element_rule", "face_rule", "gauss_rule",
]
