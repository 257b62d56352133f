"""Minimal Killing graphs over planar charts: solvability and solvers.

The pieces, bottom up:

  expr    tiny symbolic expressions (parse, evaluate, differentiate)
  chart   local models of a Killing submersion over a planar region
  mugeo   geometry of the conformal mu-metric: lengths, geodesics,
          geodesic curvature
  domain  boundary loops with +inf / -inf / finite labels, inscribed
          polygon enumeration, the solvability decision
  mesh    conforming triangle meshes of the domains
  solver  P1 finite elements for the minimal graph equation, truncated
          boundary value sequences, flux, divergence line detection
  cli     the `jsgraph` command
"""

from .expr import (DomainError, Expr, ParseError, diff_expr, eval_expr,
                   eval_expr_many, parse_expr)
from .chart import (ChartError, CompatibilityReport, Disk, Rectangle,
                    SubmersionChart, builtin_scene, scene_info, scene_names,
                    validate_chart)
from .mugeo import (CurveSample, GeodesicArc, NoConnectionError,
                    RegionExitError, mu_geodesic_connect,
                    mu_geodesic_curvature_all, mu_geodesic_shoot, mu_length)
from .domain import (AdmissibilityReport, BoundaryArc, DomainBuildError,
                     FINITE, InscribedPolygon, JSDomain, JSReport, MINUS_INF,
                     PLUS_INF, build_domain, check_admissibility,
                     check_js_conditions, rectangle_domain, square_domain,
                     strip_domain)
from .mesh import (MeshError, TriMesh, load_mesh, mesh_quality, save_mesh,
                   triangulate)
from .solver import (DivergenceLine, DivergenceReport, FluxReport,
                     GraphSolution, SequenceResult, SolveError,
                     angle_function_field, detect_divergence_lines,
                     dirichlet_values, factorization_gap, flux, point_values,
                     sequence_boundary_data, solution_from_nodal,
                     solve_dirichlet, solve_truncated_sequence)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # expr
    "Expr", "ParseError", "DomainError", "parse_expr", "eval_expr",
    "eval_expr_many", "diff_expr",
    # chart
    "ChartError", "CompatibilityReport", "Rectangle", "Disk",
    "SubmersionChart", "validate_chart", "builtin_scene", "scene_names",
    "scene_info",
    # mugeo
    "CurveSample", "GeodesicArc", "RegionExitError", "NoConnectionError",
    "mu_length", "mu_geodesic_shoot", "mu_geodesic_connect",
    "mu_geodesic_curvature_all",
    # domain
    "PLUS_INF", "MINUS_INF", "FINITE", "BoundaryArc", "JSDomain",
    "DomainBuildError", "AdmissibilityReport", "InscribedPolygon",
    "JSReport", "build_domain", "check_admissibility", "check_js_conditions",
    "rectangle_domain", "square_domain", "strip_domain",
    # mesh
    "MeshError", "TriMesh", "triangulate", "mesh_quality", "save_mesh",
    "load_mesh",
    # solver
    "SolveError", "GraphSolution", "SequenceResult", "FluxReport",
    "DivergenceLine", "DivergenceReport", "solve_dirichlet",
    "solve_truncated_sequence", "sequence_boundary_data", "dirichlet_values",
    "solution_from_nodal", "point_values", "angle_function_field", "flux",
    "factorization_gap", "detect_divergence_lines",
]
