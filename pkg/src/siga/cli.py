"""Command-line front end: run cases, studies and benchmarks from JSON
configs (CLI flags override config values); emit CSV/VTK/PGM artifacts and a
run manifest. Exit codes: 0 success, 1 compute failure, 2 config violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

COMMANDS = ("solve", "convergence", "infsup", "sparsity",
            "cylinder-steady", "cylinder-unsteady", "sphere")

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "case": {"type": "string"},
        "k": {"type": "integer", "minimum": 1, "maximum": 6},
        "alpha": {"type": ["integer", "string", "null"]},
        "levels": {"type": "integer", "minimum": 1, "maximum": 8},
        "meshes": {"type": "array", "items": {"type": ["integer", "array"]}},
        "gamma": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "mu": {"type": "number", "exclusiveMinimum": 0},
        "sigma": {"type": "number", "minimum": 0},
        "da": {"type": "number", "minimum": 0},
        "refine": {"type": "integer", "minimum": 0, "maximum": 5},
        "u_max": {"type": "number"},
        "theta": {"type": "number", "minimum": 0, "maximum": 1},
        "t_develop": {"type": "number", "minimum": 0},
        "t_end": {"type": "number", "exclusiveMinimum": 0},
        "dt_develop": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "out": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "elements": {"type": "integer", "minimum": 1},
        "vtk": {"type": "boolean"},
        "h_mode": {"enum": ["face", "volume_ratio", "volume_mean"]},
    },
}

_DEFAULTS = {"mu": 1.0, "sigma": 0.0, "out": "out", "seed": 0, "vtk": False,
             "theta": 0.5, "h_mode": "face"}


class ConfigError(ValueError):
    pass


def validate_config(cfg: dict) -> dict:
    if jsonschema is None:
        raise ConfigError("jsonschema is required to validate configs")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field '{path}': {exc.message}") from exc
    merged = dict(_DEFAULTS)
    merged.update({k: v for k, v in cfg.items() if v is not None})
    if "command" not in merged:
        raise ConfigError("config field 'command': a subcommand is required")
    return merged


def _parse_alpha(val, k):
    if val in (None, "max"):
        return None
    a = int(val)
    if not 0 <= a <= k - 1:
        raise ConfigError(f"config field 'alpha': need 0 <= alpha <= {k - 1}")
    return a


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_solve(cfg, outputs, timings):
    from .ioformats import write_csv, write_vtk
    from .manufactured import manufactured_case
    from .verification import error_norms, solve_manufactured

    case = manufactured_case(cfg["case"], mu=cfg["mu"],
                             **({"sigma": cfg["sigma"]} if cfg.get("sigma")
                                else {}))
    k = cfg["k"]
    mesh = cfg.get("elements", 16)
    if case.domain_case == "annulus_polar":
        mesh = (4 * mesh, mesh)
    alpha = _parse_alpha(cfg.get("alpha"), k)
    t0 = time.time()
    model, system, sol = solve_manufactured(case, k, mesh,
                                            cfg.get("gamma"), alpha)
    timings["solve"] = time.time() - t0
    rep = error_norms(model, sol, case)
    out = _out_dir(cfg)
    path = out / f"solve_{cfg['case']}_k{k}.csv"
    write_csv(path, ["case", "k", "ndof", "L2u", "H1u", "L2p", "residual"],
              [[cfg["case"], k, rep.n_dof, rep.l2_u, rep.h1_u, rep.l2_p,
                sol.residual]])
    outputs.append(path)
    if cfg["vtk"]:
        vtk = out / f"solve_{cfg['case']}_k{k}.vtk"
        write_vtk(vtk, model, sol)
        outputs.append(vtk)
    return 0


def _run_convergence(cfg, outputs, timings):
    from .ioformats import write_csv
    from .manufactured import manufactured_case
    from .verification import CONVERGENCE_CSV_HEADER, convergence_study

    kwargs = {"mu": cfg["mu"]}
    if cfg.get("da"):
        kwargs["Da"] = cfg["da"]
    if cfg.get("sigma"):
        kwargs["sigma"] = cfg["sigma"]
    case = manufactured_case(cfg["case"], **kwargs)
    k = cfg["k"]
    alpha = _parse_alpha(cfg.get("alpha"), k)
    if "meshes" in cfg:
        meshes = [tuple(m) if isinstance(m, (list, tuple)) else m
                  for m in cfg["meshes"]]
    else:
        base = (8, 2) if case.domain_case == "annulus_polar" else 8
        meshes = []
        for lvl in range(cfg.get("levels", 4)):
            meshes.append(tuple(b * 2 ** lvl for b in base)
                          if isinstance(base, tuple) else base * 2 ** lvl)
    t0 = time.time()
    table = convergence_study(case, k, meshes, cfg.get("gamma"), alpha)
    timings["study"] = time.time() - t0
    out = _out_dir(cfg)
    path = out / f"convergence_{cfg['case']}_k{k}.csv"
    write_csv(path, CONVERGENCE_CSV_HEADER, table.csv_rows())
    outputs.append(path)
    return 0


def _run_infsup(cfg, outputs, timings):
    from .cases import unit_square
    from .ioformats import write_csv
    from .verification import INFSUP_CSV_HEADER, default_gamma, infsup_constant

    k = cfg["k"]
    alpha = _parse_alpha(cfg.get("alpha"), k)
    gamma = cfg.get("gamma") or default_gamma(k, alpha)
    meshes = cfg.get("meshes", [4, 8, 16])
    rows = []
    t0 = time.time()
    for e in meshes:
        model = unit_square(k, int(e), alpha)
        beta, _ = infsup_constant(model, gamma, cfg["mu"])
        rows.append([k, (k - 1) if alpha is None else alpha, gamma,
                     1.0 / int(e), beta])
    timings["infsup"] = time.time() - t0
    out = _out_dir(cfg)
    path = out / f"infsup_k{k}.csv"
    write_csv(path, INFSUP_CSV_HEADER, rows)
    outputs.append(path)
    return 0


def _run_sparsity(cfg, outputs, timings):
    from .verification import sparsity_study

    out = _out_dir(cfg)
    t0 = time.time()
    ks = (cfg["k"],) if cfg.get("k") else (1, 2, 3, 4)
    sparsity_study(ks=ks, out_dir=out)
    timings["sparsity"] = time.time() - t0
    outputs.append(out / "sparsity_bandwidth.csv")
    return 0


def _cylinder_system(cfg, refine, variant, u_max):
    from .assembly import BcSpec, build_system
    from .cases import CHANNEL_HEIGHT, cylinder_channel
    from .skeleton import build_skeleton
    from .verification import default_gamma

    model = cylinder_channel(cfg["k"], refine, variant)
    sk = build_skeleton(model, cfg["h_mode"])

    def inflow(x):
        y = x[:, 1]
        prof = 4.0 * u_max * y * (CHANNEL_HEIGHT - y) / CHANNEL_HEIGHT ** 2
        return np.stack([prof, np.zeros_like(prof)], axis=-1)

    bc = BcSpec({"inflow": inflow, "walls": 0, "cylinder": 0},
                {"outflow": None})
    gamma = cfg.get("gamma") or default_gamma(cfg["k"])
    system = build_system(model, sk, bc, cfg["mu"], gamma)
    return model, system, gamma


def _run_cylinder_steady(cfg, outputs, timings):
    from .ioformats import write_csv, write_vtk
    from .solvers import SolverParams, solve_steady_ns
    from .verification import drag_lift, pressure_drop

    cfg.setdefault("k", 2)
    u_max = cfg.get("u_max", 0.3)
    mu = cfg["mu"] if cfg["mu"] != 1.0 else 1e-3
    cfg = dict(cfg, mu=mu)
    t0 = time.time()
    model, system, gamma = _cylinder_system(cfg, cfg.get("refine", 2),
                                            "steady", u_max)
    timings["assembly"] = time.time() - t0
    params = SolverParams(gamma=gamma, mu=mu)
    t0 = time.time()
    sol = solve_steady_ns(system, params)
    timings["solve"] = time.time() - t0
    u_mean = 2.0 / 3.0 * u_max
    cd, cl = drag_lift(system, sol, u_mean=u_mean)
    dp = pressure_drop(model, sol)
    out = _out_dir(cfg)
    path = out / "cylinder_steady_qoi.csv"
    write_csv(path, ["ndof", "reynolds", "cD", "cL", "dp", "picard_iters"],
              [[3 * model.n, 2 * u_mean * 0.05 / mu, cd, cl, dp,
                sol.iterations]])
    outputs.append(path)
    if cfg["vtk"]:
        vtk = out / "cylinder_steady.vtk"
        write_vtk(vtk, model, sol)
        outputs.append(vtk)
    return 0


def _run_cylinder_unsteady(cfg, outputs, timings):
    from .ioformats import write_csv
    from .solvers import SolverParams, solve_unsteady_ns
    from .verification import drag_lift, pressure_drop, shedding_metrics

    cfg.setdefault("k", 2)
    u_max = cfg.get("u_max", 1.5)
    mu = cfg["mu"] if cfg["mu"] != 1.0 else 1e-3
    cfg = dict(cfg, mu=mu)
    t_dev = cfg.get("t_develop", 4.0)
    t_end = cfg.get("t_end", 10.0)
    dt_dev = cfg.get("dt_develop", 1.0 / 20.0)
    dt = cfg.get("dt", 1.0 / 200.0)
    model, system, gamma = _cylinder_system(cfg, cfg.get("refine", 1),
                                            "unsteady", u_max)
    u_mean = 2.0 / 3.0 * u_max
    params = SolverParams(gamma=gamma, mu=mu, theta=cfg["theta"],
                          dt_schedule=[(t_dev, dt_dev), (t_end - t_dev, dt)])

    def qoi(step, t, sol, prev, dt_step):
        cd, cl = drag_lift(system, sol, prev, dt_step, u_mean=u_mean)
        return {"cD": cd, "cL": cl, "dp": pressure_drop(model, sol)}

    t0 = time.time()
    series = solve_unsteady_ns(system, params, observers=[qoi])
    timings["time_integration"] = time.time() - t0
    out = _out_dir(cfg)
    path = out / "cylinder_unsteady_series.csv"
    write_csv(path, ["t", "cD", "cL", "dp"],
              [[t, cd, cl, dp] for t, cd, cl, dp in
               zip(series.times, series.data["cD"], series.data["cL"],
                   series.data["dp"])])
    outputs.append(path)
    tail = [i for i, t in enumerate(series.times) if t > t_dev]
    metrics = shedding_metrics(_window(series, tail[0]), u_mean=u_mean)
    mpath = out / "cylinder_unsteady_metrics.csv"
    write_csv(mpath, ["min_cD", "max_cD", "min_cL", "max_cL",
                      "cycle", "strouhal"],
              [[metrics.min_cd, metrics.max_cd, metrics.min_cl,
                metrics.max_cl, metrics.cycle, metrics.strouhal]])
    outputs.append(mpath)
    return 0


def _window(series, start):
    from .solvers import TimeSeries

    out = TimeSeries(series.times[start:],
                     {k: v[start:] for k, v in series.data.items()})
    return out


def _run_sphere(cfg, outputs, timings):
    from .ioformats import write_csv
    from .manufactured import manufactured_case
    from .verification import CONVERGENCE_CSV_HEADER, convergence_study

    case = manufactured_case("ethier_steinman", mu=cfg["mu"])
    k = cfg.get("k", 2)
    meshes = [int(m) for m in cfg.get("meshes", [5, 8, 12])]
    t0 = time.time()
    table = convergence_study(case, k, meshes, cfg.get("gamma"))
    timings["study"] = time.time() - t0
    out = _out_dir(cfg)
    path = out / f"sphere_convergence_k{k}.csv"
    write_csv(path, CONVERGENCE_CSV_HEADER, table.csv_rows())
    outputs.append(path)
    return 0


_RUNNERS = {
    "solve": _run_solve,
    "convergence": _run_convergence,
    "infsup": _run_infsup,
    "sparsity": _run_sparsity,
    "cylinder-steady": _run_cylinder_steady,
    "cylinder-unsteady": _run_cylinder_unsteady,
    "sphere": _run_sphere,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="siga",
                                 description="skeleton-stabilized isogeometric "
                                             "flow solver")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=str, help="JSON config file; flags override")
    ap.add_argument("--case", type=str)
    ap.add_argument("--k", type=int)
    ap.add_argument("--alpha", type=str)
    ap.add_argument("--levels", type=int)
    ap.add_argument("--meshes", type=str,
                    help="comma-separated element counts, e.g. 4,8,16")
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--mu", type=float)
    ap.add_argument("--sigma", type=float)
    ap.add_argument("--da", type=float)
    ap.add_argument("--refine", type=int)
    ap.add_argument("--u-max", dest="u_max", type=float)
    ap.add_argument("--theta", type=float)
    ap.add_argument("--t-develop", dest="t_develop", type=float)
    ap.add_argument("--t-end", dest="t_end", type=float)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--dt-develop", dest="dt_develop", type=float)
    ap.add_argument("--elements", type=int)
    ap.add_argument("--out", type=str)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--vtk", action="store_true", default=None)
    ap.add_argument("--h-mode", dest="h_mode", type=str)
    return ap


def main(argv=None) -> int:
    from .ioformats import write_manifest

    args = build_parser().parse_args(argv)
    cfg = {}
    if args.config:
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 2
    for key, val in vars(args).items():
        if key == "config" or val is None:
            continue
        if key == "meshes" and isinstance(val, str):
            val = [int(tok) for tok in val.split(",") if tok]
        cfg[key] = val
    try:
        cfg = validate_config(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outputs: list = []
    timings: dict = {}
    t0 = time.time()
    try:
        code = _RUNNERS[cfg["command"]](cfg, outputs, timings)
    except Exception as exc:  # solver/validation failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    timings["total"] = time.time() - t0
    manifest = _out_dir(cfg) / "run_manifest.json"
    write_manifest(manifest, cfg, timings, outputs)
    return code


if __name__ == "__main__":
    sys.exit(main())
