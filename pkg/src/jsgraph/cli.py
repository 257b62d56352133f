"""Command line front end.

Subcommands:

  scene-list  print the builtin scenes
  check       decide solvability of a scene or config domain (JSON)
  geodesic    shoot or connect a mu-geodesic, emit x,y,s CSV
  solve       run the truncated sequence, emit per-level CSVs + report
  flux        flux of a stored solution across a polyline curve
  export      stored solution -> Wavefront OBJ + sidecar JSON

Configs are plain INI-style text: a [run] section for parameters, and
either `scene = <name>` or a [chart] section plus one [boundary.arc]
section per arc. Reports are JSON with floats at 17 significant
digits, so rerunning a config byte-reproduces them.

Exit codes: 0 success (including a clean "unsolvable" decision),
1 domain rejection (build/admissibility/solvability), 2 numerical or
usage failure.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import chart as chartmod
from . import domain as domainmod
from . import mesh as meshmod
from . import mugeo
from . import solver as solvermod
from .chart import ChartError, Rectangle, Disk, SubmersionChart, validate_chart
from .domain import (BoundaryArc, DomainBuildError, FINITE, MINUS_INF,
                     PLUS_INF, build_domain, check_admissibility,
                     check_js_conditions)
from .expr import ParseError, parse_expr
from .mugeo import CurveSample

__all__ = ["RunConfig", "ConfigError", "load_config", "main"]

_LABELS = {"finite": FINITE, "plus_inf": PLUS_INF, "minus_inf": MINUS_INF}


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ config

@dataclass
class RunConfig:
    scene: Optional[str] = None
    chart_spec: Dict[str, str] = field(default_factory=dict)
    arc_specs: List[Dict[str, str]] = field(default_factory=list)
    h: Optional[float] = None
    schedule: List[float] = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    tol: float = 1e-9
    geo_tol: float = 1e-5
    nu_thresh: float = 0.1
    decrease: float = 1.9
    quad: str = "d4"
    out: str = "."

    def validate(self):
        for name in ("tol", "geo_tol", "nu_thresh"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.h is not None and self.h <= 0.0:
            raise ConfigError("h must be positive")
        if sorted(self.schedule) != self.schedule or \
                len(set(self.schedule)) != len(self.schedule):
            raise ConfigError("schedule must be strictly increasing")
        if self.scene is not None and \
                self.scene not in chartmod.scene_names():
            raise ConfigError(f"unknown scene {self.scene!r}")
        if self.scene is None and not self.chart_spec:
            raise ConfigError("config needs a scene or a [chart] section")
        return self


def _parse_sections(path):
    sections = []
    current = None
    with open(path) as f:
        for ln, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith(";"):
                continue
            if line.startswith("["):
                if not line.endswith("]"):
                    raise ConfigError(f"{path}:{ln}: unterminated section")
                current = (line[1:-1].strip().lower(), {})
                sections.append(current)
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key = value")
            if current is None:
                raise ConfigError(f"{path}:{ln}: key before any [section]")
            key, _, val = line.partition("=")
            current[1][key.strip().lower()] = val.strip()
    return sections


def load_config(path) -> RunConfig:
    """Parse and validate a run config; defaults fill missing keys."""
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} does not exist")
    cfg = RunConfig()
    for name, kv in _parse_sections(path):
        if name == "run":
            for k, v in kv.items():
                if k == "scene":
                    cfg.scene = v
                elif k == "h":
                    cfg.h = float(v)
                elif k == "schedule":
                    cfg.schedule = [float(t) for t in v.split(",") if t]
                elif k in ("tol", "geo_tol", "nu_thresh", "decrease"):
                    setattr(cfg, k, float(v))
                elif k == "quad":
                    cfg.quad = v
                elif k == "out":
                    cfg.out = v
                else:
                    raise ConfigError(f"unknown [run] key {k!r}")
        elif name == "chart":
            cfg.chart_spec.update(kv)
        elif name in ("boundary.arc", "boundary"):
            cfg.arc_specs.append(dict(kv))
        else:
            raise ConfigError(f"unknown section [{name}]")
    env_out = os.environ.get("JSGRAPH_OUT")
    if env_out:
        cfg.out = env_out
    return cfg.validate()


def _chart_from_spec(spec: Dict[str, str]) -> SubmersionChart:
    reg = spec.get("region")
    if not reg:
        raise ConfigError("[chart] needs a region line")
    toks = reg.split()
    try:
        if toks[0] == "rectangle":
            x0, x1, y0, y1 = (float(t) for t in toks[1:5])
            periodic = len(toks) > 5 and toks[5] == "periodic"
            region = Rectangle(x0, x1, y0, y1, periodic_x=periodic)
        elif toks[0] == "disk":
            cx, cy, r = (float(t) for t in toks[1:4])
            region = Disk(cx, cy, r)
        else:
            raise ConfigError(f"unknown region kind {toks[0]!r}")
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad region spec {reg!r}: {exc}") from None
    try:
        return SubmersionChart(
            region=region,
            lam=parse_expr(spec.get("lam", "1")),
            mu=parse_expr(spec.get("mu", "1")),
            tau=parse_expr(spec.get("tau", "0")),
            a=parse_expr(spec.get("a", "0")),
            b=parse_expr(spec.get("b", "0")),
            name=spec.get("name", "custom"),
        )
    except ParseError as exc:
        raise ConfigError(f"bad chart expression: {exc}") from None


def _arc_from_spec(c: SubmersionChart, spec: Dict[str, str]) -> BoundaryArc:
    label = _LABELS.get(spec.get("label", ""))
    if label is None:
        raise ConfigError(
            f"arc label must be one of {sorted(_LABELS)}, "
            f"got {spec.get('label')!r}")
    value = spec.get("value")
    closed = spec.get("closed", "false").lower() in ("true", "1", "yes")
    n = int(spec.get("n", "129"))
    if "points_file" in spec:
        pts = np.loadtxt(spec["points_file"], delimiter=",", ndmin=2)[:, :2]
    elif "segment" in spec:
        x0, y0, x1, y1 = (float(t) for t in spec["segment"].split())
        t = np.linspace(0.0, 1.0, n)
        pts = np.column_stack([x0 + t * (x1 - x0), y0 + t * (y1 - y0)])
    elif "geodesic" in spec:
        x0, y0, x1, y1 = (float(t) for t in spec["geodesic"].split())
        arc = mugeo.mu_geodesic_connect(c, (x0, y0), (x1, y1))
        pts = arc.points
    elif "circle" in spec:
        toks = [float(t) for t in spec["circle"].split()]
        cx, cy, r = toks[:3]
        th0, th1 = (toks[3], toks[4]) if len(toks) >= 5 \
            else (0.0, 2.0 * math.pi)
        full = abs((th1 - th0) - 2.0 * math.pi) < 1e-12
        th = np.linspace(th0, th1, n + 1)
        if full:
            th = th[:-1]
            closed = True
        pts = np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])
    else:
        raise ConfigError(
            "arc needs points_file, segment, geodesic, or circle")
    return BoundaryArc(CurveSample(pts, closed=closed), label, value=value,
                       name=spec.get("name", ""))


def resolve_scene(cfg: RunConfig):
    """(chart, domain or None) from a config."""
    if cfg.scene is not None:
        return chartmod.builtin_scene(cfg.scene)
    c = _chart_from_spec(cfg.chart_spec)
    if not cfg.arc_specs:
        return c, None
    arcs = [_arc_from_spec(c, s) for s in cfg.arc_specs]
    loops: List[List[BoundaryArc]] = [[]]
    for s, a in zip(cfg.arc_specs, arcs):
        if s.get("new_loop", "false").lower() in ("true", "1", "yes") \
                and loops[-1]:
            loops.append([])
        loops[-1].append(a)
    d = build_domain(c, loops, geo_tol=cfg.geo_tol)
    return c, d


# ------------------------------------------------------ serialization

def _jval(v, parts, indent):
    pad = "  " * indent
    if isinstance(v, dict):
        if not v:
            parts.append("{}")
            return
        parts.append("{\n")
        for i, (k, item) in enumerate(v.items()):
            parts.append(f'{pad}  "{k}": ')
            _jval(item, parts, indent + 1)
            parts.append(",\n" if i < len(v) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(v, (list, tuple)):
        seq = list(v)
        if not seq:
            parts.append("[]")
            return
        flat = all(isinstance(t, (int, float, np.floating, np.integer))
                   for t in seq)
        if flat:
            parts.append("[" + ", ".join(_jscalar(t) for t in seq) + "]")
            return
        parts.append("[\n")
        for i, item in enumerate(seq):
            parts.append(pad + "  ")
            _jval(item, parts, indent + 1)
            parts.append(",\n" if i < len(seq) - 1 else "\n")
        parts.append(pad + "]")
    elif isinstance(v, np.ndarray):
        _jval(v.tolist(), parts, indent)
    else:
        parts.append(_jscalar(v))


def _jscalar(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return '"nan"'
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        return format(v, ".17g")
    return json.dumps(str(v))


def jdumps(obj) -> str:
    """Deterministic JSON: floats at 17 significant digits."""
    parts: List[str] = []
    _jval(obj, parts, 0)
    return "".join(parts) + "\n"


def _write(path, text):
    with open(path, "w") as f:
        f.write(text)


def _solution_csv(path, s: solvermod.GraphSolution):
    """Per-vertex x, y, u plus vertex-averaged nu and W."""
    m = s.mesh
    acc_nu = np.zeros(m.n_vertices)
    acc_w = np.zeros(m.n_vertices)
    cnt = np.zeros(m.n_vertices)
    for i in range(3):
        np.add.at(acc_nu, m.tris[:, i], s.nu)
        np.add.at(acc_w, m.tris[:, i], s.w)
        np.add.at(cnt, m.tris[:, i], 1.0)
    cnt[cnt == 0] = 1.0
    with open(path, "w") as f:
        f.write("x,y,u,nu,W\n")
        for k in range(m.n_vertices):
            f.write(",".join(format(t, ".17g") for t in (
                m.points[k, 0], m.points[k, 1], s.u[k],
                acc_nu[k] / cnt[k], acc_w[k] / cnt[k])) + "\n")


def _polygon_dict(p):
    return {
        "edges": [list(e) for e in p.edges],
        "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma,
        "margin": p.margin, "status": p.status,
        "is_full_boundary": p.is_full_boundary,
        "vertices": [[float(x), float(y)] for x, y in p.points],
    }


def _check_report(c, d, cfg):
    comp = validate_chart(c)
    adm = check_admissibility(d)
    js = check_js_conditions(d)
    return {
        "scene": cfg.scene or c.name,
        "chart": {"name": c.name, "max_defect": comp.max_defect,
                  "min_lam": comp.min_lam, "min_mu": comp.min_mu},
        "domain": {"kind": d.kind, "n_arcs": len(d.arcs()),
                   "diameter": d.diameter},
        "admissible": adm.admissible,
        "admissibility_failures": list(adm.failures),
        "corner_angles": adm.corner_angles,
        "decision": js.decision,
        "solvable": js.solvable,
        "conclusive": js.conclusive,
        "marginal": [_polygon_dict(p) for p in js.marginal],
        "overflow": js.overflow,
        "boundary_equality_gap": js.boundary_equality_gap,
        "n_polygons": len(js.polygons),
        "polygons": [_polygon_dict(p) for p in js.polygons],
        "violations": [_polygon_dict(p) for p in js.violations],
    }


# --------------------------------------------------------- subcommands

def _cmd_scene_list(args):
    rows = []
    for name in chartmod.scene_names():
        c, d = chartmod.builtin_scene(name)
        rows.append({
            "name": name,
            "info": chartmod.scene_info(name),
            "periodic": c.periodic,
            "has_domain": d is not None,
        })
    sys.stdout.write(jdumps(rows))
    return 0


def _resolve(args, need_domain=True):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig(scene=args.scene).validate()
    for name in ("h", "tol", "nu_thresh", "out", "quad"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "schedule", None):
        cfg.schedule = [float(t) for t in args.schedule.split(",") if t]
        cfg.validate()
    c, d = resolve_scene(cfg)
    if need_domain and d is None:
        raise DomainBuildError(
            "this chart has no canonical domain; define [boundary.arc] "
            "sections in a config")
    return cfg, c, d


def _cmd_check(args):
    cfg, c, d = _resolve(args)
    rep = _check_report(c, d, cfg)
    text = jdumps(rep)
    sys.stdout.write(text)
    if args.json:
        _write(args.json, text)
    return 0


def _cmd_geodesic(args):
    cfg, c, _ = _resolve(args, need_domain=False)
    p = (args.start[0], args.start[1])
    if args.to is not None:
        arc = mugeo.mu_geodesic_connect(c, p, tuple(args.to))
    else:
        if args.theta is None or args.length is None:
            raise ConfigError("geodesic needs --to or --theta and --length")
        arc = mugeo.mu_geodesic_shoot(c, p, args.theta, args.length)
    lines = ["x,y,s"]
    for (x, y), s in zip(arc.points, arc.s):
        lines.append(",".join(format(t, ".17g") for t in (x, y, s)))
    text = "\n".join(lines) + "\n"
    if args.out_file:
        _write(args.out_file, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_solve(args):
    cfg, c, d = _resolve(args)
    os.makedirs(cfg.out, exist_ok=True)
    rep = _check_report(c, d, cfg)
    if not rep["admissible"] or not rep["solvable"]:
        _write(os.path.join(cfg.out, "report.json"), jdumps(rep))
        if not args.force:
            sys.stderr.write(
                f"domain rejected: decision={rep['decision']} "
                f"admissible={rep['admissible']} (see report.json; "
                "use --force to solve the truncated levels anyway)\n")
            return 1

    h = cfg.h if cfg.h is not None else 0.05 * d.diameter
    m = meshmod.triangulate(d, h)
    meshmod.save_mesh(m, os.path.join(cfg.out, "mesh.txt"))
    r = solvermod.solve_truncated_sequence(
        d, schedule=cfg.schedule, tol=cfg.tol, quad=cfg.quad, mesh=m)
    levels = []
    for n, s in zip(r.schedule, r.solutions):
        tag = format(n, "g")
        _solution_csv(os.path.join(cfg.out, f"level_{tag}.csv"), s)
        levels.append({
            "n": n, "energy": s.energy, "residual": s.residual_norm,
            "iterations": s.iterations, "converged": s.converged,
            "u_at_p0": r.u_at_p0[r.schedule.index(n)],
            "warnings": s.warnings,
        })
    s_last = r.solutions[-1]

    flux_checks = []
    for k, (_, _, a) in enumerate(d.arcs()):
        try:
            fr = solvermod.flux(
                s_last, CurveSample(a.points, closed=a.closed,
                                    normal_side=-1))
        except solvermod.SolveError:
            continue
        flux_checks.append({"arc": k, "label": a.label,
                            "value": fr.value, "mu_length": fr.mu_length,
                            "ratio": fr.ratio})
    p0 = r.p0
    rad = 0.08 * d.diameter
    th = np.linspace(0.0, 2.0 * math.pi, 129)[:-1]
    loop = np.column_stack([p0[0] + rad * np.cos(th),
                            p0[1] + rad * np.sin(th)])
    try:
        fr = solvermod.flux(s_last, CurveSample(loop, closed=True))
        flux_checks.append({"arc": None, "label": "interior_loop",
                            "value": fr.value, "mu_length": fr.mu_length,
                            "ratio": fr.ratio})
    except solvermod.SolveError:
        pass

    divergence = None
    if len(r.schedule) >= 2:
        drep = solvermod.detect_divergence_lines(
            r, nu_thresh=cfg.nu_thresh, decrease=cfg.decrease,
            geo_tol=cfg.geo_tol)
        divergence = {
            "per_level_min_nu": drep.per_level_min_nu,
            "interior_area": drep.interior_area,
            "flagged_area": drep.flagged_area,
            "lines": [],
        }
        for i, l in enumerate(drep.lines):
            path = os.path.join(cfg.out, f"divergence_{i}.csv")
            _write(path, "x,y\n" + "\n".join(
                f"{format(x, '.17g')},{format(y, '.17g')}"
                for x, y in l.geodesic) + "\n")
            divergence["lines"].append({
                "triangles": int(len(l.triangles)),
                "nu_min": l.nu_min, "point": list(l.point),
                "direction": list(l.direction), "closed": l.closed,
                "max_kappa": l.max_kappa, "area": l.area,
                "csv": os.path.basename(path),
            })

    rep.update({
        "h": h,
        "mesh": {"vertices": m.n_vertices, "triangles": m.n_triangles,
                 "euler": m.euler_characteristic(),
                 "periodic_pairs": int(m.periodic_pairs.shape[0])},
        "schedule": r.schedule,
        "levels": levels,
        "p0": [p0[0], p0[1]],
        "sup_changes": r.sup_changes,
        "normalized_sup_changes": r.normalized_sup_changes,
        "flux_checks": flux_checks,
        "divergence": divergence,
    })
    _write(os.path.join(cfg.out, "report.json"), jdumps(rep))
    sys.stdout.write(jdumps({
        "out": cfg.out, "decision": rep["decision"],
        "levels": len(levels),
        "files": sorted(os.listdir(cfg.out)),
    }))
    bad = [lv for lv in levels if not lv["converged"]]
    return 2 if bad else 0


def _load_solution(args, c):
    m = meshmod.load_mesh(args.mesh)
    data = np.loadtxt(args.solution, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != m.n_vertices:
        raise ConfigError(
            f"solution file has {data.shape[0]} rows for a mesh with "
            f"{m.n_vertices} vertices")
    if not np.allclose(data[:, :2], m.points, atol=1e-9):
        raise ConfigError("solution vertices do not match the mesh")
    return m, solvermod.solution_from_nodal(m, c, data[:, 2])


def _cmd_flux(args):
    cfg, c, _ = _resolve(args, need_domain=False)
    _, s = _load_solution(args, c)
    pts = np.loadtxt(args.curve, delimiter=",", ndmin=2)[:, :2]
    curve = CurveSample(pts, closed=args.closed, normal_side=args.side)
    fr = solvermod.flux(s, curve)
    sys.stdout.write(jdumps(fr.as_dict()))
    return 0


def _cmd_export(args):
    cfg, c, _ = _resolve(args, need_domain=False)
    m, s = _load_solution(args, c)
    obj_path = args.out_file or "surface.obj"
    with open(obj_path, "w") as f:
        f.write("# minimal graph surface, chart coordinates (x y u)\n")
        for (x, y), u in zip(m.points, s.u):
            f.write(f"v {format(x, '.17g')} {format(y, '.17g')} "
                    f"{format(u, '.17g')}\n")
        for i, j, k in m.tris:
            f.write(f"f {i + 1} {j + 1} {k + 1}\n")
    side = {
        "format": "wavefront-obj",
        "embedding": "chart-coordinate",
        "isometric": False,
        "note": "positions are chart coordinates plus height, not an "
                "isometric embedding of the graph metric",
        "vertices": m.n_vertices,
        "triangles": m.n_triangles,
    }
    _write(obj_path + ".json", jdumps(side))
    sys.stdout.write(jdumps({"obj": obj_path, "sidecar": obj_path + ".json"}))
    return 0


# -------------------------------------------------------------- main

def _build_parser():
    ap = argparse.ArgumentParser(
        prog="jsgraph",
        description="Jenkins-Serrin solvability and minimal Killing graphs")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, domain=True):
        p.add_argument("--scene", default=None,
                       help="builtin scene name (see scene-list)")
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument("--out", dest="out", default=None,
                       help="output directory")

    p = sub.add_parser("scene-list", help="print builtin scenes")
    p.set_defaults(fn=_cmd_scene_list)

    p = sub.add_parser("check", help="decide solvability, print JSON")
    common(p)
    p.add_argument("--json", default=None, help="also write report here")
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("geodesic", help="mu-geodesic to CSV (x,y,s)")
    common(p, domain=False)
    p.add_argument("--from", dest="start", nargs=2, type=float,
                   required=True, metavar=("X", "Y"))
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--length", type=float, default=None)
    p.add_argument("--to", nargs=2, type=float, default=None,
                   metavar=("X", "Y"))
    p.add_argument("--out-file", default=None)
    p.set_defaults(fn=_cmd_geodesic)

    p = sub.add_parser("solve", help="run the truncated sequence")
    common(p)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--schedule", default=None, help="comma list, e.g. 1,2,4,8")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--nu-thresh", dest="nu_thresh", type=float, default=None)
    p.add_argument("--quad", default=None,
                   choices=["centroid", "d2", "d4", "high"])
    p.add_argument("--force", action="store_true",
                   help="solve even when the decision is not solvable")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("flux", help="flux of a stored solution")
    common(p, domain=False)
    p.add_argument("--mesh", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--curve", required=True, help="CSV of x,y points")
    p.add_argument("--closed", action="store_true")
    p.add_argument("--side", type=int, default=1, choices=[1, -1])
    p.set_defaults(fn=_cmd_flux)

    p = sub.add_parser("export", help="stored solution to OBJ")
    common(p, domain=False)
    p.add_argument("--mesh", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--out-file", default=None)
    p.set_defaults(fn=_cmd_export)
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "scene", None) and getattr(args, "config", None):
        sys.stderr.write("give either --scene or --config, not both\n")
        return 2
    if args.cmd not in ("scene-list",) and \
            not getattr(args, "scene", None) and \
            not getattr(args, "config", None):
        sys.stderr.write("a --scene or --config is required\n")
        return 2
    try:
        return args.fn(args)
    except (DomainBuildError,) as exc:
        sys.stderr.write(f"domain: {exc}\n")
        return 1
    except ChartError as exc:
        sys.stderr.write(f"chart: {exc}\n")
        return 1
    except (ConfigError, ParseError) as exc:
        sys.stderr.write(f"config: {exc}\n")
        return 2
    except (solvermod.SolveError, meshmod.MeshError,
            mugeo.RegionExitError, mugeo.NoConnectionError) as exc:
        sys.stderr.write(f"numerical: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"io: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
