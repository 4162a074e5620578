"""Artifact writers: CSV tables, portable graymap sparsity patterns, legacy
VTK field exports, and run manifests. All output is deterministic."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def format_float(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    return f"{v:.12e}"


def write_csv(path, header, rows):
    """Rows are sequences; floats are fixed-formatted for reproducibility."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(format_float(float(v)))
            elif v is None:
                cells.append("")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pgm(path, matrix, rel_tol: float = 1e-14):
    """P2 graymap of the sparsity pattern: nonzero entries black."""
    M = sp.coo_matrix(matrix)
    dense = np.zeros(M.shape, dtype=bool)
    if M.nnz:
        cut = rel_tol * np.abs(M.data).max()
        keep = np.abs(M.data) > cut
        dense[M.row[keep], M.col[keep]] = True
    lines = ["P2", f"{M.shape[1]} {M.shape[0]}", "255"]
    for i in range(M.shape[0]):
        lines.append(" ".join("0" if dense[i, j] else "255"
                              for j in range(M.shape[1])))
    Path(path).write_text("\n".join(lines) + "\n")


def write_vtk(path, model, solution, samples_per_element: int = 2):
    """Legacy ASCII unstructured-grid export of sampled velocity magnitude
    and pressure on a per-element sampling grid."""
    from .bspline import eval_bspline
    from .geometry import map_jets
    from .skeleton import _tensor_param_tables

    d = model.dim
    n = model.n
    s = samples_per_element
    points = []
    cells = []
    vmag = []
    pres = []
    offset = 0
    for pidx, patch in enumerate(model.patches):
        axes = []
        for kv in patch.kvs:
            ticks = []
            for e in range(kv.n_elements):
                lo, hi = kv.element_bounds(e)
                loc = np.linspace(lo, hi, s + 1)
                ticks.append(loc[:-1] if e < kv.n_elements - 1 else loc)
            axes.append(np.concatenate(ticks))
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        shp = grid.shape[:-1]
        pts = grid.reshape(-1, d)
        x = map_jets(patch, pts, 0).x
        for xi in pts:
            evals = [eval_bspline(kv, xi[j], 0) for j, kv in enumerate(patch.kvs)]
            param, loc = _tensor_param_tables(patch, evals, 0)
            g = model.scalar_maps[pidx][loc[0]]
            uvals = [param[(0,) * d][0] @ solution.u[c * n + g] for c in range(d)]
            vmag.append(float(np.hypot(*uvals) if d == 2
                              else np.linalg.norm(uvals)))
            pres.append(float(param[(0,) * d][0] @ solution.p[g]))
        if d == 2:
            pts3 = np.concatenate([x, np.zeros((x.shape[0], 1))], axis=1)
        else:
            pts3 = x
        points.append(pts3)
        strides = np.array([int(np.prod(shp[j + 1:])) for j in range(d)])
        ranges = [np.arange(sh - 1) for sh in shp]
        mesh = np.meshgrid(*ranges, indexing="ij")
        base = sum(strides[j] * mesh[j].ravel() for j in range(d)) + offset
        if d == 2:
            quad = np.stack([base, base + strides[0],
                             base + strides[0] + strides[1],
                             base + strides[1]], axis=1)
            cells.append(quad)
        else:
            hexa = np.stack([base,
                             base + strides[0],
                             base + strides[0] + strides[1],
                             base + strides[1],
                             base + strides[2],
                             base + strides[0] + strides[2],
                             base + strides[0] + strides[1] + strides[2],
                             base + strides[1] + strides[2]], axis=1)
            cells.append(hexa)
        offset += pts3.shape[0]
    pts3 = np.concatenate(points)
    cells = np.concatenate(cells)
    npts, ncell = pts3.shape[0], cells.shape[0]
    nverts = cells.shape[1]
    ctype = 9 if d == 2 else 12
    out = ["# vtk DataFile Version 3.0", "siga field export", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {npts} double"]
    out += [" ".join(format_float(c) for c in row) for row in pts3]
    out.append(f"CELLS {ncell} {ncell * (nverts + 1)}")
    out += [f"{nverts} " + " ".join(str(v) for v in row) for row in cells]
    out.append(f"CELL_TYPES {ncell}")
    out += [str(ctype)] * ncell
    out.append(f"POINT_DATA {npts}")
    out.append("SCALARS velocity_magnitude double 1")
    out.append("LOOKUP_TABLE default")
    out += [format_float(v) for v in vmag]
    out.append("SCALARS pressure double 1")
    out.append("LOOKUP_TABLE default")
    out += [format_float(v) for v in pres]
    Path(path).write_text("\n".join(out) + "\n")


def write_manifest(path, config: dict, timings: dict, outputs: list):
    from . import __version__

    doc = {"config": config, "version": __version__,
           "timings_s": {k: round(v, 3) for k, v in timings.items()},
           "outputs": sorted(str(o) for o in outputs),
           "written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
