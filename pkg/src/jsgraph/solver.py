"""Minimal Killing-graph solver on P1 triangle meshes.

The graph of u over the chart is minimal when u is a stationary point
of the area energy

    E(u) = int lam^2 * W dx dy,   W = sqrt(1 + mu^2 |Gu|^2),

with Gu the orthonormal-frame gradient defect

    Gu = (u_x / lam - a,  u_y / lam - b).

In chart coordinates the weak form loses every metric factor:

    R(u; phi) = int (mu^2 / W) [(u_x - lam a) phi_x
                                + (u_y - lam b) phi_y] dx dy,

which is what gets assembled here. E is convex in grad u, so a damped
Newton iteration with an energy line search converges globally and the
discrete minimizer is unique for fixed boundary data.

Boundary data is handed over per mesh marker (arc ids and corner ids);
the truncated-sequence driver builds the +-n / clamped data of the
exhaustion procedure, warm-starting each level from the previous one.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .expr import Expr, parse_expr, eval_expr_many
from .domain import JSDomain, PLUS_INF, MINUS_INF, FINITE
from .mesh import TriMesh
from . import mugeo
from .mugeo import CurveSample

__all__ = [
    "GraphSolution", "SequenceResult", "FluxReport", "DivergenceReport",
    "DivergenceLine", "SolveError", "solve_dirichlet",
    "solve_truncated_sequence", "sequence_boundary_data", "flux",
    "angle_function_field", "detect_divergence_lines", "factorization_gap",
    "point_values", "solution_from_nodal", "dirichlet_values",
]

BValue = Union[float, int, str, Callable]


class SolveError(RuntimeError):
    pass


# ------------------------------------------------------------ quadrature

def _duffy_rule(n):
    """Collapsed n x n Gauss-Legendre rule on the unit simplex,
    normalized so the weights sum to 1. All weights positive."""
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    S, T = np.meshgrid(s, s, indexing="ij")
    WS, WT = np.meshgrid(ws, ws, indexing="ij")
    xi = S.ravel()
    eta = (T * (1.0 - S)).ravel()
    wq = (2.0 * WS * WT * (1.0 - S)).ravel()
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return bary, wq


def _quad_rule(name):
    if name == "centroid":
        return (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]))
    if name == "d2":
        b = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        return b, np.full(3, 1 / 3)
    if name == "d4":
        a1, b1, w1 = 0.108103018168070, 0.445948490915965, 0.223381589678011
        a2, b2, w2 = 0.816847572980459, 0.091576213509771, 0.109951743655322
        bary = np.array([
            [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
            [a2, b2, b2], [b2, a2, b2], [b2, b2, a2],
        ])
        return bary, np.array([w1, w1, w1, w2, w2, w2])
    if name == "high":
        return _duffy_rule(8)
    raise ValueError(f"unknown quadrature rule {name!r}")


# ------------------------------------------------------------- assembler

class _Assembler:
    """Vectorized energy / residual / Hessian of the discrete area
    functional over canonical (seam-folded) vertex ids."""

    def __init__(self, mesh: TriMesh, chart, quad="d4"):
        self.mesh = mesh
        self.chart = chart
        self.quad = quad
        pts, tris = mesh.points, mesh.tris
        self.cmap = mesh.canonical_map()
        self.ids = self.cmap[tris]
        p0, p1, p2 = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
        d1, d2 = p1 - p0, p2 - p0
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.area = 0.5 * det
        # hat gradients: grad phi_i constant per triangle
        g = np.empty((tris.shape[0], 3, 2))
        g[:, 1, 0] = d2[:, 1] / det
        g[:, 1, 1] = -d2[:, 0] / det
        g[:, 2, 0] = -d1[:, 1] / det
        g[:, 2, 1] = d1[:, 0] / det
        g[:, 0] = -g[:, 1] - g[:, 2]
        self.grads = g

        bary, wq = _quad_rule(quad)
        self.wq = wq
        qx = (bary[None, :, 0] * p0[:, None, 0]
              + bary[None, :, 1] * p1[:, None, 0]
              + bary[None, :, 2] * p2[:, None, 0])
        qy = (bary[None, :, 0] * p0[:, None, 1]
              + bary[None, :, 1] * p1[:, None, 1]
              + bary[None, :, 2] * p2[:, None, 1])
        lam = chart.ev("lam", qx.ravel(), qy.ravel()).reshape(qx.shape)
        mu = chart.ev("mu", qx.ravel(), qy.ravel()).reshape(qx.shape)
        av = chart.ev("a", qx.ravel(), qy.ravel()).reshape(qx.shape)
        bv = chart.ev("b", qx.ravel(), qy.ravel()).reshape(qx.shape)
        self.lam2 = lam * lam
        self.mu2 = mu * mu
        self.k2 = self.mu2 / self.lam2
        self.lamA = lam * av
        self.lamB = lam * bv
        self.rows = np.repeat(self.ids, 3, axis=1).ravel()
        self.cols = np.tile(self.ids, (1, 3)).ravel()
        self.n = mesh.n_vertices

    def _wfields(self, u):
        du = np.einsum("ti,tid->td", u[self.ids], self.grads)
        wx = du[:, 0, None] - self.lamA
        wy = du[:, 1, None] - self.lamB
        W = np.sqrt(1.0 + self.k2 * (wx * wx + wy * wy))
        return du, wx, wy, W

    def energy(self, u):
        _, _, _, W = self._wfields(u)
        return float(self.area @ ((self.lam2 * W) @ self.wq))

    def residual(self, u):
        _, wx, wy, W = self._wfields(u)
        cw = self.mu2 / W
        rx = (cw * wx) @ self.wq
        ry = (cw * wy) @ self.wq
        R = np.zeros(self.n)
        for i in range(3):
            np.add.at(R, self.ids[:, i],
                      self.area * (rx * self.grads[:, i, 0]
                                   + ry * self.grads[:, i, 1]))
        return R

    def hessian(self, u):
        _, wx, wy, W = self._wfields(u)
        cw = self.mu2 / W
        cq = self.k2 * cw / (W * W)
        m11 = (cw - cq * wx * wx) @ self.wq
        m12 = (-cq * wx * wy) @ self.wq
        m22 = (cw - cq * wy * wy) @ self.wq
        g = self.grads
        vals = np.empty((self.ids.shape[0], 3, 3))
        for i in range(3):
            for j in range(3):
                vals[:, i, j] = self.area * (
                    m11 * g[:, i, 0] * g[:, j, 0]
                    + m12 * (g[:, i, 0] * g[:, j, 1]
                             + g[:, i, 1] * g[:, j, 0])
                    + m22 * g[:, i, 1] * g[:, j, 1])
        H = sp.coo_matrix((vals.ravel(), (self.rows, self.cols)),
                          shape=(self.n, self.n))
        return H.tocsr()


# ------------------------------------------------------- boundary values

def _eval_bvalue(v: BValue, x, y):
    if isinstance(v, Expr):
        return np.asarray(eval_expr_many(v, x, y), dtype=float)
    if callable(v):
        return np.asarray(v(x, y), dtype=float)
    if isinstance(v, str):
        return np.asarray(eval_expr_many(parse_expr(v), x, y), dtype=float)
    return np.full(np.shape(x), float(v))


def dirichlet_values(mesh: TriMesh, bdata: Dict[int, BValue]):
    """(fixed mask, values) over vertices from per-marker data.

    Every boundary marker appearing in the mesh must be covered; values
    may be numbers, expression strings in x and y, or callables.
    """
    marked = np.unique(mesh.marker[mesh.marker >= 0])
    missing = [int(m) for m in marked if int(m) not in bdata]
    if missing:
        raise SolveError(f"boundary data missing for markers {missing}")
    fixed = mesh.marker >= 0
    vals = np.zeros(mesh.n_vertices)
    for m in marked:
        sel = mesh.marker == m
        v = _eval_bvalue(bdata[int(m)],
                         mesh.points[sel, 0], mesh.points[sel, 1])
        if not np.all(np.isfinite(v)):
            raise SolveError(f"boundary data on marker {int(m)} not finite")
        vals[sel] = v
    # fold the seam: the slave column mirrors its master
    if mesh.periodic_pairs.size:
        sl, ma = mesh.periodic_pairs[:, 0], mesh.periodic_pairs[:, 1]
        both = fixed[sl] & fixed[ma]
        if np.any(np.abs(vals[sl][both] - vals[ma][both]) > 1e-12):
            raise SolveError("periodic seam carries conflicting values")
        fixed[ma] |= fixed[sl]
        vals[ma] = np.where(fixed[sl], vals[sl], vals[ma])
        fixed[sl] = fixed[ma]
        vals[sl] = vals[ma]
    return fixed, vals


# ------------------------------------------------------------- solution

@dataclass
class GraphSolution:
    """Nodal solution with per-triangle (centroid) derived fields."""

    mesh: TriMesh
    chart: object
    u: np.ndarray
    gu: np.ndarray          # (nt, 2) frame components of Gu
    w: np.ndarray           # (nt,) area element W >= 1
    nu: np.ndarray          # (nt,) angle function mu / W
    mu_c: np.ndarray        # (nt,) mu at centroids
    energy: float
    residual_norm: float
    tol: float
    converged: bool
    iterations: int
    quad: str
    warnings: List[str] = field(default_factory=list)

    def validate(self):
        if np.any(self.w < 1.0 - 1e-12):
            raise SolveError("area element below 1")
        if np.any(self.nu <= 0.0) or np.any(self.nu > self.mu_c + 1e-12):
            raise SolveError("angle function outside (0, mu]")
        return self

    def gradient_defect(self):
        return self.gu


def _centroid_fields(mesh, chart, u):
    pts, tris = mesh.points, mesh.tris
    c = pts[tris].mean(axis=1)
    p0, p1, p2 = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    d1, d2 = p1 - p0, p2 - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    u0, u1, u2 = u[tris[:, 0]], u[tris[:, 1]], u[tris[:, 2]]
    ux = ((u1 - u0) * d2[:, 1] - (u2 - u0) * d1[:, 1]) / det
    uy = ((u2 - u0) * d1[:, 0] - (u1 - u0) * d2[:, 0]) / det
    lam = chart.ev("lam", c[:, 0], c[:, 1])
    mu = chart.ev("mu", c[:, 0], c[:, 1])
    av = chart.ev("a", c[:, 0], c[:, 1])
    bv = chart.ev("b", c[:, 0], c[:, 1])
    gu = np.column_stack([ux / lam - av, uy / lam - bv])
    w = np.sqrt(1.0 + mu * mu * (gu[:, 0] ** 2 + gu[:, 1] ** 2))
    return gu, w, mu / w, mu


def _linear_solve(H, rhs, warnings):
    d = sp.csr_matrix(H).diagonal()
    d = np.where(np.abs(d) > 1e-300, d, 1.0)
    M = sp.diags(1.0 / d)
    try:
        x, info = spla.cg(H, rhs, rtol=1e-12, atol=0.0, maxiter=1500, M=M)
    except TypeError:  # older scipy spells the tolerance differently
        x, info = spla.cg(H, rhs, tol=1e-12, atol=0.0, maxiter=1500, M=M)
    if info == 0:
        nr = float(np.linalg.norm(rhs))
        if nr == 0.0 or np.linalg.norm(H @ x - rhs) <= 1e-10 * nr:
            return x
    try:
        return spla.splu(sp.csc_matrix(H)).solve(rhs)
    except RuntimeError:
        warnings.append("singular linearization, regularized")
        reg = H + 1e-12 * sp.eye(H.shape[0], format="csr")
        return spla.splu(sp.csc_matrix(reg)).solve(rhs)


def solve_dirichlet(mesh: TriMesh, chart, bdata: Dict[int, BValue],
                    tol: float = 1e-9, max_iter: int = 200,
                    quad: str = "d4", u0: Optional[np.ndarray] = None,
                    ) -> GraphSolution:
    """Minimize the discrete area energy at fixed boundary values.

    Damped Newton with Armijo backtracking (c = 1e-4, halving); the
    linearization is SPD because the energy is convex. Stops when the
    free-node residual norm drops below tol; a failure to converge
    returns the best iterate with converged=False.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    asm = _Assembler(mesh, chart, quad=quad)
    fixed, fvals = dirichlet_values(mesh, bdata)
    cmap = mesh.canonical_map()
    canon = cmap == np.arange(mesh.n_vertices)
    free = canon & ~fixed

    if u0 is not None:
        u = np.array(u0, dtype=float)
        if u.shape != (mesh.n_vertices,):
            raise ValueError("u0 has wrong shape")
    else:
        u = np.full(mesh.n_vertices,
                    float(np.mean(fvals[fixed])) if np.any(fixed) else 0.0)
    u[fixed] = fvals[fixed]
    u = u[cmap]

    warnings: List[str] = []
    e = asm.energy(u)
    rnorm = math.inf
    best_u, best_r = u.copy(), math.inf
    r_first = None
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        R = asm.residual(u)
        rnorm = float(np.linalg.norm(R[free]))
        if r_first is None:
            r_first = max(rnorm, tol)
        if rnorm < best_r:
            if rnorm > 0.9 * best_r:
                stall += 1
            else:
                stall = 0
            best_u, best_r = u.copy(), rnorm
        else:
            stall += 1
        if best_r <= tol:
            break
        # a stagnation exit is only legitimate in the endgame, where
        # the assembly's rounding floor can sit above an aggressive tol
        if stall >= 4 and best_r <= max(1e4 * tol, 1e-8 * r_first):
            warnings.append(
                f"residual stagnated at {best_r:.3e} (floating point floor)")
            break
        H = asm.hessian(u)
        Hff = H[free][:, free]
        step = _linear_solve(Hff, -R[free], warnings)
        slope = float(R[free] @ step)
        if slope >= 0.0:
            warnings.append("non-descent direction, gradient fallback")
            step = -R[free]
            slope = -float(R[free] @ R[free])
        t = 1.0
        un = u.copy()
        accepted = False
        while t >= 1e-14:
            un[free] = u[free] + t * step
            un = un[cmap]
            en = asm.energy(un)
            if en <= e + 1e-4 * t * slope:
                accepted = True
                break
            if t == 1.0:
                # near the minimum the energy decrease (~ residual^2)
                # drowns in rounding; accept a full Newton step that
                # still contracts the residual
                rfull = float(np.linalg.norm(asm.residual(un)[free]))
                if rfull <= 0.9 * rnorm:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            warnings.append("line search stalled")
            break
        u, e = un, en
    else:
        it = max_iter

    u, rnorm = best_u, best_r
    converged = rnorm <= tol
    if not converged:
        warnings.append(
            f"no convergence after {it} iterations "
            f"(residual {rnorm:.3e} > tol {tol:.1e})")
    gu, w, nu, mu_c = _centroid_fields(mesh, chart, u)
    return GraphSolution(mesh=mesh, chart=chart, u=u, gu=gu, w=w, nu=nu,
                         mu_c=mu_c, energy=e, residual_norm=rnorm, tol=tol,
                         converged=converged, iterations=it, quad=quad,
                         warnings=warnings)


def solution_from_nodal(mesh: TriMesh, chart, u, tol: float = 1e-9,
                        quad: str = "d4") -> GraphSolution:
    """Wrap existing nodal values (e.g. reloaded from a file) as a
    GraphSolution, recomputing the derived fields and the residual."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ValueError("nodal array has wrong length")
    asm = _Assembler(mesh, chart, quad=quad)
    cmap = mesh.canonical_map()
    u = u[cmap]
    fixed = mesh.marker >= 0
    free = (cmap == np.arange(mesh.n_vertices)) & ~fixed
    rnorm = float(np.linalg.norm(asm.residual(u)[free]))
    gu, w, nu, mu_c = _centroid_fields(mesh, chart, u)
    return GraphSolution(mesh=mesh, chart=chart, u=u, gu=gu, w=w, nu=nu,
                         mu_c=mu_c, energy=asm.energy(u),
                         residual_norm=rnorm, tol=tol,
                         converged=rnorm <= tol, iterations=0, quad=quad)


def angle_function_field(s: GraphSolution):
    """Per-triangle angle function with a min/max summary."""
    return {"nu": s.nu,
            "min": float(s.nu.min()), "max": float(s.nu.max())}


# --------------------------------------------------------- point lookup

class _Locator:
    """Uniform-grid point location over the triangles."""

    def __init__(self, mesh: TriMesh, period: float = 0.0, x0: float = 0.0):
        self.mesh = mesh
        self.period = period
        self.x0 = x0
        pts = mesh.points
        t = pts[mesh.tris]
        self.lo = t.min(axis=1)
        self.hi = t.max(axis=1)
        self.cell = max(mesh.h, 1e-12)
        self.org = pts.min(axis=0)
        buckets: Dict[Tuple[int, int], list] = {}
        ilo = np.floor((self.lo - self.org) / self.cell).astype(int)
        ihi = np.floor((self.hi - self.org) / self.cell).astype(int)
        for k in range(mesh.n_triangles):
            for ix in range(ilo[k, 0], ihi[k, 0] + 1):
                for iy in range(ilo[k, 1], ihi[k, 1] + 1):
                    buckets.setdefault((ix, iy), []).append(k)
        self.buckets = {k: np.array(v, dtype=np.int32)
                        for k, v in buckets.items()}

    def locate(self, x, y):
        """Triangle index and barycentric coords, or (-1, None)."""
        if self.period > 0.0:
            x = self.x0 + math.fmod(x - self.x0, self.period)
            if x < self.x0:
                x += self.period
        key = (int(math.floor((x - self.org[0]) / self.cell)),
               int(math.floor((y - self.org[1]) / self.cell)))
        best, bl = -1, -math.inf
        for dx in (0, -1, 1):
            for dy in (0, -1, 1):
                for k in self.buckets.get((key[0] + dx, key[1] + dy), ()):
                    lam = self._bary(k, x, y)
                    m = lam.min()
                    if m > bl:
                        best, bl = k, m
        if bl < -1e-9:
            return -1, None
        return best, self._bary(best, x, y)

    def _bary(self, k, x, y):
        tri = self.mesh.tris[k]
        p = self.mesh.points[tri]
        d = ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1])
             - (p[2, 0] - p[0, 0]) * (p[1, 1] - p[0, 1]))
        l1 = ((x - p[0, 0]) * (p[2, 1] - p[0, 1])
              - (p[2, 0] - p[0, 0]) * (y - p[0, 1])) / d
        l2 = ((p[1, 0] - p[0, 0]) * (y - p[0, 1])
              - (x - p[0, 0]) * (p[1, 1] - p[0, 1])) / d
        return np.array([1.0 - l1 - l2, l1, l2])


def _locator(mesh: TriMesh, chart=None) -> _Locator:
    loc = getattr(mesh, "_point_locator", None)
    if loc is None:
        period = mesh.period if mesh.periodic_pairs.size else 0.0
        x0 = chart.region.x0 if (chart is not None and period) else \
            float(mesh.points[:, 0].min())
        loc = _Locator(mesh, period=period, x0=x0)
        mesh._point_locator = loc
    return loc


def point_values(s: GraphSolution, pts) -> np.ndarray:
    """P1 interpolation of the solution at chart points."""
    loc = _locator(s.mesh, s.chart)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.empty(pts.shape[0])
    for i, (x, y) in enumerate(pts):
        k, lam = loc.locate(x, y)
        if k < 0:
            raise SolveError(f"point ({x:.6g}, {y:.6g}) outside the mesh")
        out[i] = float(lam @ s.u[s.mesh.tris[k]])
    return out


# ------------------------------------------------------------- sequence

@dataclass
class SequenceResult:
    domain: JSDomain
    mesh: TriMesh
    schedule: List[int]
    solutions: List[GraphSolution]
    p0: Tuple[float, float]
    u_at_p0: List[float]
    sup_changes: List[float]
    normalized_sup_changes: List[float]
    interior_nodes: np.ndarray
    report_scale: float

    def level(self, n: int) -> GraphSolution:
        return self.solutions[self.schedule.index(n)]

    def normalized(self, n: int) -> np.ndarray:
        i = self.schedule.index(n)
        return self.solutions[i].u - self.u_at_p0[i]


def sequence_boundary_data(dom: JSDomain, n: float) -> Dict[int, BValue]:
    """Marker values of truncation level n: +-n on the infinite arcs,
    the finite data clamped to [-n, n], corner rules as documented
    (opposite infinities average to 0, a finite value wins over an
    infinite neighbour, two finite arcs average)."""
    arcs = dom.arcs()
    bd: Dict[int, BValue] = {}
    for k, (_, _, arc) in enumerate(arcs):
        if arc.label == PLUS_INF:
            bd[k] = float(n)
        elif arc.label == MINUS_INF:
            bd[k] = float(-n)
        else:
            e = arc.value
            bd[k] = (lambda x, y, e=e, n=n:
                     np.clip(eval_expr_many(e, x, y), -n, n))
    base = len(arcs)

    def fin(k, px, py):
        return float(np.clip(
            eval_expr_many(arcs[k][2].value, px, py), -n, n))

    for j, row in enumerate(dom.corner_table()):
        ka, kb = row["arc_in"], row["arc_out"]
        la, lb = arcs[ka][2].label, arcs[kb][2].label
        px, py = row["point"]
        if la == FINITE and lb == FINITE:
            v = 0.5 * (fin(ka, px, py) + fin(kb, px, py))
        elif la == FINITE:
            v = fin(ka, px, py)
        elif lb == FINITE:
            v = fin(kb, px, py)
        elif la == lb:
            v = float(n) if la == PLUS_INF else float(-n)
        else:
            v = 0.0
        bd[base + j] = v
    return bd


def _interior_mask(dom: JSDomain, mesh: TriMesh, scale: float):
    """Nodes of the domain shrunk by `scale` toward its center."""
    cx, cy = dom.interior_point()
    x, y = mesh.points[:, 0], mesh.points[:, 1]
    if dom.kind == "annulus":
        qx, qy = x, cy + (y - cy) / scale
    else:
        qx, qy = cx + (x - cx) / scale, cy + (y - cy) / scale
    return dom.contains(qx, qy)


def solve_truncated_sequence(dom: JSDomain, h: Optional[float] = None,
                             schedule: Sequence[int] = (1, 2, 4, 8),
                             tol: float = 1e-9, quad: str = "d4",
                             mesh: Optional[TriMesh] = None,
                             report_scale: float = 0.6) -> SequenceResult:
    """Solve the exhaustion levels of the Jenkins-Serrin problem.

    Each level n fixes +n / -n on the infinite arcs and the clamped
    finite data elsewhere, warm-started from the previous level. The
    interior sup-norm changes (raw and after subtracting u(p0)) are
    recorded on the report_scale-shrunken domain.
    """
    schedule = [float(n) for n in schedule]
    if sorted(schedule) != schedule or len(set(schedule)) != len(schedule):
        raise ValueError("schedule must be strictly increasing")
    if mesh is None:
        from .mesh import triangulate
        if h is None:
            h = 0.05 * dom.diameter
        mesh = triangulate(dom, h)
    p0 = dom.interior_point()
    inner = _interior_mask(dom, mesh, report_scale)

    sols: List[GraphSolution] = []
    u_p0: List[float] = []
    raw: List[float] = []
    norm: List[float] = []
    prev = None
    for n in schedule:
        bd = sequence_boundary_data(dom, n)
        s = solve_dirichlet(mesh, dom.chart, bd, tol=tol, quad=quad,
                            u0=(prev.u if prev is not None else None))
        v0 = float(point_values(s, [p0])[0])
        if prev is not None:
            raw.append(float(np.max(np.abs(s.u[inner] - prev.u[inner]))))
            norm.append(float(np.max(np.abs(
                (s.u[inner] - v0) - (prev.u[inner] - u_p0[-1])))))
        sols.append(s)
        u_p0.append(v0)
        prev = s
    return SequenceResult(domain=dom, mesh=mesh,
                          schedule=[float(n) for n in schedule],
                          solutions=sols, p0=p0, u_at_p0=u_p0,
                          sup_changes=raw, normalized_sup_changes=norm,
                          interior_nodes=inner, report_scale=report_scale)


# ----------------------------------------------------------------- flux

@dataclass
class FluxReport:
    value: float
    mu_length: float
    ratio: float
    n_segments: int
    closed: bool

    def as_dict(self):
        return {"value": self.value, "mu_length": self.mu_length,
                "ratio": self.ratio, "n_segments": self.n_segments,
                "closed": self.closed}


def flux(s: GraphSolution, curve, side: Optional[int] = None) -> FluxReport:
    """Flux of X_u = mu^2 Gu / W across the curve.

    Midpoint quadrature on sub-segments of length about h/4; X_u is
    taken from the triangle containing each midpoint (one-sided trace
    on boundary curves). The normal is the curve's normal_side times
    the left normal, and the chart factor lam converts the euclidean
    line element to the metric one, so |value| <= mu-length holds up
    to quadrature error.
    """
    if not isinstance(curve, CurveSample):
        curve = CurveSample(np.asarray(curve, dtype=float))
    sgn = float(side if side is not None else curve.normal_side)
    pts = curve.points
    if curve.closed:
        pts = np.vstack([pts, pts[:1]])
    loc = _locator(s.mesh, s.chart)
    X = (s.mu_c * s.mu_c / s.w)[:, None] * s.gu

    total = 0.0
    nseg = 0
    hh = 0.25 * s.mesh.h
    for k in range(pts.shape[0] - 1):
        p, q = pts[k], pts[k + 1]
        ell = float(np.hypot(*(q - p)))
        if ell == 0.0:
            continue
        m = max(1, int(math.ceil(ell / hh)))
        t = (np.arange(m) + 0.5) / m
        mids = p[None, :] + t[:, None] * (q - p)[None, :]
        tang = (q - p) / ell
        nrm = sgn * np.array([-tang[1], tang[0]])
        lam = s.chart.ev("lam", mids[:, 0], mids[:, 1])
        for i in range(m):
            ki, _ = loc.locate(mids[i, 0], mids[i, 1])
            if ki < 0:
                raise SolveError(
                    f"flux curve leaves the mesh near "
                    f"({mids[i, 0]:.6g}, {mids[i, 1]:.6g})")
            total += float(X[ki] @ nrm) * float(lam[i]) * (ell / m)
        nseg += m
    lmu = mugeo.mu_length(s.chart, curve)
    return FluxReport(value=total, mu_length=lmu,
                      ratio=total / lmu if lmu > 0 else math.nan,
                      n_segments=nseg, closed=curve.closed)


# -------------------------------------------------------- factorization

def factorization_gap(s1: GraphSolution, s2: GraphSolution):
    """Both sides of the monotonicity identity

        < Gu/Wu - Gv/Wv , Gu - Gv >
            = (Wu + Wv) / (2 mu^2) * ( |mu Gu/Wu - mu Gv/Wv|^2
                                       + (1/Wu - 1/Wv)^2 ),

    evaluated per triangle from the centroid fields. The left side is
    assembled directly, the right side independently, so their
    agreement is a genuine cross-check; both are nonnegative.
    """
    if s1.mesh is not s2.mesh and not (
            s1.mesh.points.shape == s2.mesh.points.shape
            and np.array_equal(s1.mesh.tris, s2.mesh.tris)
            and np.allclose(s1.mesh.points, s2.mesh.points)):
        raise SolveError("factorization_gap needs solutions on one mesh")
    gu, gv = s1.gu, s2.gu
    wu, wv = s1.w, s2.w
    mu = s1.mu_c
    du = gu / wu[:, None] - gv / wv[:, None]
    lhs = np.einsum("td,td->t", du, gu - gv)
    rhs = ((wu + wv) / (2.0 * mu * mu)
           * (np.einsum("td,td->t", mu[:, None] * du, mu[:, None] * du)
              + (1.0 / wu - 1.0 / wv) ** 2))
    return {"lhs": lhs, "rhs": rhs,
            "max_abs_diff": float(np.max(np.abs(lhs - rhs)))
            if lhs.size else 0.0}


# ---------------------------------------------------- divergence lines

@dataclass
class DivergenceLine:
    triangles: np.ndarray
    nu_min: float
    point: Tuple[float, float]
    direction: Tuple[float, float]
    geodesic: np.ndarray
    closed: bool
    max_kappa: float
    area: float


@dataclass
class DivergenceReport:
    lines: List[DivergenceLine]
    per_level_min_nu: List[float]
    nu_thresh: float
    decrease: float
    interior_frac: float
    interior_area: float

    @property
    def flagged_area(self):
        return sum(l.area for l in self.lines)


def _tri_adjacency(mesh: TriMesh):
    cmap = mesh.canonical_map()
    t = cmap[mesh.tris]
    edge_owner: Dict[Tuple[int, int], int] = {}
    nbr: List[List[int]] = [[] for _ in range(mesh.n_triangles)]
    for k in range(mesh.n_triangles):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(t[k, a], t[k, b]), max(t[k, a], t[k, b]))
            other = edge_owner.pop(key, None)
            if other is None:
                edge_owner[key] = k
            else:
                nbr[k].append(other)
                nbr[other].append(k)
    return nbr


def _wrapped_dists(pts, refs, period):
    dx = pts[:, None, 0] - refs[None, :, 0]
    if period > 0.0:
        dx -= period * np.round(dx / period)
    dy = pts[:, None, 1] - refs[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


def _even_spacing(line, frac=0.3):
    """Drop points closer than frac * median spacing to their kept
    neighbor (the integrator's exact-landing step can be tiny, which
    wrecks the finite-difference curvature stencils). Endpoints win
    over their neighbors."""
    if line.shape[0] < 3:
        return line
    seg = np.hypot(np.diff(line[:, 0]), np.diff(line[:, 1]))
    thr = frac * float(np.median(seg))
    keep = [0]
    for i in range(1, line.shape[0]):
        if np.hypot(*(line[i] - line[keep[-1]])) >= thr:
            keep.append(i)
    last = line.shape[0] - 1
    if keep[-1] != last:
        if len(keep) > 1:
            keep[-1] = last
        else:
            keep.append(last)
    return line[keep]


def detect_divergence_lines(r: SequenceResult, nu_thresh: float = 0.1,
                            decrease: float = 1.9,
                            interior_frac: float = 0.8,
                            geo_tol: float = 1e-5) -> DivergenceReport:
    """Flag interior triangles whose angle function collapses along the
    schedule and fit a geodesic through each cluster.

    A triangle qualifies when nu < nu_thresh at the last level and nu
    dropped by at least `decrease` between the last two levels.
    Clusters of edge-adjacent flagged triangles get a geodesic shot
    from the nu-argmin centroid, orthogonal to Gu there; a cluster is
    reported when the fitted line stays inside the cluster's
    3h-neighborhood.
    """
    if len(r.solutions) < 2:
        raise SolveError("divergence detection needs at least 2 levels")
    mesh, dom = r.mesh, r.domain
    chart = dom.chart
    cent = mesh.points[mesh.tris].mean(axis=1)
    if dom.kind == "annulus":
        cx, cy = dom.interior_point()
        qx, qy = cent[:, 0], cy + (cent[:, 1] - cy) / interior_frac
    else:
        cx, cy = dom.interior_point()
        qx = cx + (cent[:, 0] - cx) / interior_frac
        qy = cy + (cent[:, 1] - cy) / interior_frac
    interior = dom.contains(qx, qy)
    areas = np.abs(
        0.5 * ((mesh.points[mesh.tris[:, 1], 0]
                - mesh.points[mesh.tris[:, 0], 0])
               * (mesh.points[mesh.tris[:, 2], 1]
                  - mesh.points[mesh.tris[:, 0], 1])
               - (mesh.points[mesh.tris[:, 2], 0]
                  - mesh.points[mesh.tris[:, 0], 0])
               * (mesh.points[mesh.tris[:, 1], 1]
                  - mesh.points[mesh.tris[:, 0], 1])))
    per_level = [float(s.nu[interior].min()) if np.any(interior)
                 else math.nan for s in r.solutions]

    nu_last = r.solutions[-1].nu
    nu_prev = r.solutions[-2].nu
    flag = interior & (nu_last < nu_thresh) \
        & (nu_prev >= decrease * nu_last)
    report = DivergenceReport(
        lines=[], per_level_min_nu=per_level, nu_thresh=nu_thresh,
        decrease=decrease, interior_frac=interior_frac,
        interior_area=float(areas[interior].sum()))
    if not np.any(flag):
        return report

    nbr = _tri_adjacency(mesh)
    seen = np.zeros(mesh.n_triangles, dtype=bool)
    period = mesh.period if mesh.periodic_pairs.size else 0.0
    h = mesh.h
    for seed in np.flatnonzero(flag):
        if seen[seed]:
            continue
        stack, members = [int(seed)], []
        seen[seed] = True
        while stack:
            k = stack.pop()
            members.append(k)
            for j in nbr[k]:
                if flag[j] and not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        members = np.array(sorted(members), dtype=np.int64)
        sub_nu = nu_last[members]
        kmin = members[int(np.argmin(sub_nu))]
        p = cent[kmin]
        g = r.solutions[-1].gu[kmin]
        gn = np.hypot(*g)
        if gn < 1e-30:
            continue
        theta = math.atan2(g[1], g[0]) + 0.5 * math.pi
        refs = cent[members]
        ext = float(_wrapped_dists(refs, refs[:1], period).max()) \
            + float(_wrapped_dists(refs, p[None, :], period).max())
        rho0 = float(chart.ev("rho", p[0], p[1]))
        L = max(1.25 * rho0 * ext, 4.0 * rho0 * h)
        segs = []
        for th in (theta, theta + math.pi):
            try:
                arc = mugeo.mu_geodesic_shoot(chart, tuple(p), th, L,
                                              region_stop=True)
                segs.append(arc.points)
            except mugeo.RegionExitError:
                continue
        if not segs:
            continue
        if len(segs) == 2:
            line = np.vstack([segs[0][::-1], segs[1][1:]])
        else:
            line = segs[0]
        keep = dom.contains(line[:, 0], line[:, 1], margin=-1e-9)
        line = line[keep]
        line = _even_spacing(line)
        if line.shape[0] < 4:
            continue
        d = _wrapped_dists(line, refs, period).min(axis=1)
        if float(d.max()) > 3.0 * h:
            continue
        span = float(np.ptp(line[:, 0]))
        closed = bool(period > 0.0 and span >= period * (1 - 1e-9))
        _, kap = mugeo.mu_geodesic_curvature_all(chart, CurveSample(line))
        maxk = float(np.max(np.abs(kap)))
        report.lines.append(DivergenceLine(
            triangles=members, nu_min=float(sub_nu.min()),
            point=(float(p[0]), float(p[1])),
            direction=(math.cos(theta), math.sin(theta)),
            geodesic=line, closed=closed, max_kappa=maxk,
            area=float(areas[members].sum())))
    return report
