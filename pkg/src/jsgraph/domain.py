"""Domains for the Dirichlet problem with prescribed +inf / -inf / finite
boundary data.

A domain is bounded by arcs, each labeled:

    PLUS_INF   the solution is required to blow up to +infinity; the arc
               must be a mu-geodesic
    MINUS_INF  blow-down to -infinity; also a mu-geodesic
    FINITE     continuous data given by an expression in x, y; the arc
               must be mu-convex toward the domain

Solvability is decided by length comparisons over inscribed polygons:
regions bounded by full boundary arcs and interior geodesic chords
joining corners (for periodic charts, by pairs of closed loops including
closed geodesics). Writing alpha(P), beta(P) for the total mu-length of
the PLUS_INF and MINUS_INF arcs on the boundary of P and gamma(P) for
its mu-perimeter, the conditions are

    2*alpha(P) < gamma(P)  and  2*beta(P) < gamma(P)

strictly for every inscribed polygon, except that when the whole
boundary consists of infinite arcs the polygon P = Omega is instead
subject to alpha = beta (within 1e-9 relative). Margins within 1e-9 of
zero cannot be certified strict in floating point; they are treated as
violations and flagged marginal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .chart import SubmersionChart
from .expr import Expr, parse_expr
from . import mugeo
from .mugeo import CurveSample, mu_length

__all__ = [
    "PLUS_INF", "MINUS_INF", "FINITE",
    "BoundaryArc", "JSDomain", "DomainBuildError",
    "build_domain", "check_admissibility", "AdmissibilityReport",
    "enumerate_inscribed_polygons", "InscribedPolygon",
    "check_js_conditions", "JSReport",
    "square_domain", "rectangle_domain", "strip_domain",
    "points_in_polygon", "polyline_hausdorff",
]

PLUS_INF = "plus_inf"
MINUS_INF = "minus_inf"
FINITE = "finite"
_LABELS = (PLUS_INF, MINUS_INF, FINITE)

# relative margin below which a strict length inequality cannot be
# certified in floating point; such polygons are reported as violations
# and flagged marginal
MARGIN_REL = 1e-9


class DomainBuildError(ValueError):
    pass


@dataclass
class BoundaryArc:
    """One labeled piece of the boundary, sampled along its travel
    direction. Finite arcs carry their data as an expression in x, y."""

    curve: CurveSample
    label: str
    value: Optional[Expr] = None
    name: str = ""

    def __post_init__(self):
        if self.label not in _LABELS:
            raise DomainBuildError(f"unknown arc label {self.label!r}")
        if self.label == FINITE and self.value is None:
            raise DomainBuildError("finite arcs need a boundary value expression")
        if self.label != FINITE and self.value is not None:
            raise DomainBuildError("infinite arcs carry no boundary value")
        if isinstance(self.value, str):
            self.value = parse_expr(self.value)


@dataclass
class _NormArc:
    """Arc after loop normalization: oriented with the domain on its left,
    so normal_side=+1 is the inner conormal."""

    points: np.ndarray
    label: str
    value: Optional[Expr]
    closed: bool
    name: str
    mu_len: float = 0.0

    @property
    def curve(self) -> CurveSample:
        return CurveSample(self.points.copy(), closed=self.closed, normal_side=1)


# -- small planar helpers ------------------------------------------------------

def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def points_in_polygon(px, py, poly: np.ndarray):
    """Even-odd test of points against a closed polyline (no repeated
    endpoint). Vectorized over points; boundary points are ambiguous at
    machine precision, pair with a distance test when that matters."""
    px = np.atleast_1d(np.asarray(px, dtype=float))
    py = np.atleast_1d(np.asarray(py, dtype=float))
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for a0, b0, a1, b1 in zip(x0, y0, x1, y1):
        if b0 == b1:
            continue
        straddle = (b0 <= py) != (b1 <= py)
        xs = a0 + (py - b0) * (a1 - a0) / (b1 - b0)
        inside ^= straddle & (px < xs)
    return inside


def _dist_to_segments(pts: np.ndarray, seg0: np.ndarray, seg1: np.ndarray) -> np.ndarray:
    """Min distance of each point to a set of segments, chunked."""
    out = np.full(len(pts), np.inf)
    d = seg1 - seg0
    dd = np.einsum("ij,ij->i", d, d)
    dd[dd == 0] = 1.0
    for lo in range(0, len(pts), 2048):
        p = pts[lo:lo + 2048]
        w = p[:, None, :] - seg0[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", w, d) / dd[None, :], 0.0, 1.0)
        proj = seg0[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.linalg.norm(p[:, None, :] - proj, axis=2)
        out[lo:lo + 2048] = dist.min(axis=1)
    return out


def polyline_hausdorff(a: np.ndarray, b: np.ndarray,
                       closed_a: bool = True, closed_b: bool = True) -> float:
    """Symmetric Hausdorff distance between two polylines (points of one
    against the segments of the other)."""

    def segs(p, closed):
        if closed:
            return p, np.vstack([p[1:], p[:1]])
        return p[:-1], p[1:]

    sa0, sa1 = segs(a, closed_a)
    sb0, sb1 = segs(b, closed_b)
    d_ab = _dist_to_segments(a, sb0, sb1).max()
    d_ba = _dist_to_segments(b, sa0, sa1).max()
    return float(max(d_ab, d_ba))


def _segments_properly_cross(p0, p1, q0, q1, eps=1e-12):
    """True when open segments (p0,p1) and (q0,q1) cross transversally."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) \
            - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    d1 = orient(q0, q1, p0)
    d2 = orient(q0, q1, p1)
    d3 = orient(p0, p1, q0)
    d4 = orient(p0, p1, q1)
    return ((d1 > eps) & (d2 < -eps) | (d1 < -eps) & (d2 > eps)) \
        & ((d3 > eps) & (d4 < -eps) | (d3 < -eps) & (d4 > eps))


def _polyline_simple(pts: np.ndarray, closed: bool = True) -> bool:
    """No transversal self-crossing among non-adjacent segments."""
    if closed:
        s0 = pts
        s1 = np.vstack([pts[1:], pts[:1]])
    else:
        s0, s1 = pts[:-1], pts[1:]
    n = len(s0)
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-30)
    eps = 1e-12 * scale * scale
    for i in range(n - 1):
        j0 = i + 2
        j1 = n - 1 if (closed and i == 0) else n
        if j0 >= j1:
            continue
        cross = _segments_properly_cross(
            s0[i][None, :], s1[i][None, :], s0[j0:j1], s1[j0:j1], eps)
        if np.any(cross):
            return False
    return True


def _corner_angle(t_in: np.ndarray, t_out: np.ndarray) -> float:
    """Interior angle at a corner of a loop traversed with the domain on
    the left: the turn from the reversed incoming tangent to the outgoing
    tangent, in (0, 2pi). Angles in a conformal metric equal chart angles."""
    a = math.atan2(-t_in[1], -t_in[0]) - math.atan2(t_out[1], t_out[0])
    return a % (2.0 * math.pi)


# -- the domain ----------------------------------------------------------------

@dataclass
class JSDomain:
    chart: SubmersionChart
    loops: List[List[_NormArc]]
    kind: str                    # "disk" or "annulus"
    geo_tol: float
    geodesic_defects: List[float] = field(default_factory=list)
    convexity_minima: List[float] = field(default_factory=list)

    def __post_init__(self):
        self._loop_pts = [self._assemble_loop(lp) for lp in self.loops]
        self._seg_cache = None

    @staticmethod
    def _assemble_loop(arcs: List[_NormArc]) -> np.ndarray:
        if len(arcs) == 1 and arcs[0].closed:
            return arcs[0].points
        parts = [a.points[:-1] for a in arcs]
        return np.vstack(parts)

    # -- geometry queries

    def loop_points(self, i: int) -> np.ndarray:
        return self._loop_pts[i]

    def bbox(self):
        pts = np.vstack(self._loop_pts)
        return (pts[:, 0].min(), pts[:, 0].max(),
                pts[:, 1].min(), pts[:, 1].max())

    @property
    def diameter(self) -> float:
        x0, x1, y0, y1 = self.bbox()
        return math.hypot(x1 - x0, y1 - y0)

    def _segments(self):
        if self._seg_cache is None:
            s0s, s1s = [], []
            for pts in self._loop_pts:
                s0s.append(pts)
                s1s.append(np.vstack([pts[1:], pts[:1]]))
            self._seg_cache = (np.vstack(s0s), np.vstack(s1s))
        return self._seg_cache

    def boundary_distance(self, x, y) -> np.ndarray:
        pts = np.column_stack([np.atleast_1d(np.asarray(x, float)),
                               np.atleast_1d(np.asarray(y, float))])
        s0, s1 = self._segments()
        return _dist_to_segments(pts, s0, s1)

    def contains(self, x, y, margin: float = 0.0) -> np.ndarray:
        """Membership test; margin > 0 requires that distance to the
        boundary as well, margin < 0 dilates by |margin|."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.kind == "annulus":
            inside = self._annulus_contains(x, y, margin)
        else:
            inside = points_in_polygon(x, y, self._loop_pts[0])
            if margin > 0.0:
                inside &= self.boundary_distance(x, y) >= margin
            elif margin < 0.0:
                inside |= self.boundary_distance(x, y) <= -margin
        return inside

    def _annulus_contains(self, x, y, margin):
        c = self.chart
        period = c.region.period
        xw = c.region.x0 + np.mod(x - c.region.x0, period)
        ys = []
        for pts in self._loop_pts:
            order = np.argsort(pts[:, 0])
            ys.append(np.interp(xw, pts[order, 0], pts[order, 1],
                                period=period))
        ylo = np.minimum(*ys)
        yhi = np.maximum(*ys)
        return (y > ylo + margin) & (y < yhi - margin)

    def interior_point(self) -> Tuple[float, float]:
        x0, x1, y0, y1 = self.bbox()
        if self.kind == "annulus":
            return (0.5 * (x0 + x1), 0.5 * (y0 + y1))
        pts = self._loop_pts[0]
        a = _signed_area(pts)
        cx = float(np.sum((pts[:, 0] + np.roll(pts[:, 0], -1))
                          * (pts[:, 0] * np.roll(pts[:, 1], -1)
                             - np.roll(pts[:, 0], -1) * pts[:, 1])) / (6 * a))
        cy = float(np.sum((pts[:, 1] + np.roll(pts[:, 1], -1))
                          * (pts[:, 0] * np.roll(pts[:, 1], -1)
                             - np.roll(pts[:, 0], -1) * pts[:, 1])) / (6 * a))
        if bool(self.contains(cx, cy, margin=0.02 * self.diameter)[0]):
            return (cx, cy)
        gx, gy = np.meshgrid(np.linspace(x0, x1, 41), np.linspace(y0, y1, 41))
        gx, gy = gx.ravel(), gy.ravel()
        keep = self.contains(gx, gy)
        d = self.boundary_distance(gx[keep], gy[keep])
        k = int(np.argmax(d))
        return (float(gx[keep][k]), float(gy[keep][k]))

    # -- boundary structure

    def arcs(self) -> List[Tuple[int, int, _NormArc]]:
        return [(i, j, a) for i, lp in enumerate(self.loops)
                for j, a in enumerate(lp)]

    def corners(self, loop: int) -> np.ndarray:
        arcs = self.loops[loop]
        if len(arcs) == 1 and arcs[0].closed:
            return np.zeros((0, 2))
        return np.array([a.points[0] for a in arcs])

    @property
    def has_finite(self) -> bool:
        return any(a.label == FINITE for _, _, a in self.arcs())

    def corner_table(self) -> List[dict]:
        """Global corner list: point plus the flat indices (into arcs())
        of the incoming and outgoing arc. Order: loops in order, corners
        in travel order (corner j of a loop starts its arc j)."""
        flat = {(li, ai): k for k, (li, ai, _) in enumerate(self.arcs())}
        out = []
        for li, lp in enumerate(self.loops):
            if len(lp) == 1 and lp[0].closed:
                continue
            m = len(lp)
            for j in range(m):
                out.append({
                    "point": (float(lp[j].points[0, 0]), float(lp[j].points[0, 1])),
                    "loop": li,
                    "local": j,
                    "arc_in": flat[(li, (j - 1) % m)],
                    "arc_out": flat[(li, j)],
                })
        return out


# -- construction and validation ----------------------------------------------

def build_domain(chart: SubmersionChart, loops: Sequence[Sequence[BoundaryArc]],
                 geo_tol: float = 1e-5) -> JSDomain:
    """Validate and normalize a domain.

    Checks: arcs inside the chart region, loops closed and simple,
    orientation with the domain on the left (fixed up silently), infinite
    arcs geodesic to geo_tol, finite arcs mu-convex toward the domain.
    Raises DomainBuildError when a check fails. Corner-based
    admissibility is separate, see check_admissibility.
    """
    if len(loops) == 0:
        raise DomainBuildError("no boundary loops")
    c = chart
    if len(loops) == 1:
        kind = "disk"
    elif len(loops) == 2 and c.periodic:
        kind = "annulus"
    else:
        raise DomainBuildError(
            "expected one loop (disk) or two loops on a periodic chart (annulus)")

    norm_loops = []
    for li, loop in enumerate(loops):
        if len(loop) == 0:
            raise DomainBuildError(f"loop {li} is empty")
        arcs = [_NormArc(points=np.asarray(a.curve.points, dtype=float).copy(),
                         label=a.label, value=a.value,
                         closed=a.curve.closed or len(loop) == 1
                         and _is_closed(a.curve.points),
                         name=a.name or f"loop{li}.arc{ai}")
                for ai, a in enumerate(loop)]
        _check_in_region(c, arcs)
        _weld_loop(arcs, li)
        arcs = _orient_loop(c, arcs, li, kind, loops_hint=loops)
        norm_loops.append(arcs)

    if kind == "annulus":
        norm_loops.sort(key=lambda lp: -float(np.mean(lp[0].points[:, 1])))

    dom = JSDomain(chart=c, loops=norm_loops, kind=kind, geo_tol=geo_tol)

    for li, lp in enumerate(norm_loops):
        pts = dom.loop_points(li)
        # the seam segment of an annulus loop jumps back a full period in
        # unwrapped coordinates, so leave it out of the crossing test
        if not _polyline_simple(pts, closed=(kind != "annulus")):
            raise DomainBuildError(f"loop {li} crosses itself")

    for li, ai, a in dom.arcs():
        a.mu_len = mu_length(c, a.curve)
        if a.mu_len <= 0:
            raise DomainBuildError(f"arc {a.name} has zero mu-length")
        _, kappa = mugeo.mu_geodesic_curvature_all(c, a.curve)
        if a.label in (PLUS_INF, MINUS_INF):
            defect = float(np.max(np.abs(kappa)))
            dom.geodesic_defects.append(defect)
            if defect > geo_tol:
                raise DomainBuildError(
                    f"arc {a.name} is labeled infinite but is not a "
                    f"mu-geodesic (max |ktilde| = {defect:.3g} > {geo_tol:g})")
        else:
            kmin = float(np.min(kappa))
            dom.convexity_minima.append(kmin)
            if kmin < -geo_tol:
                raise DomainBuildError(
                    f"finite arc {a.name} is not mu-convex toward the "
                    f"domain (min ktilde = {kmin:.3g} < -{geo_tol:g})")
    return dom


def _is_closed(points) -> bool:
    p = np.asarray(points, dtype=float)
    return bool(np.linalg.norm(p[0] - p[-1]) < 1e-9 * (1 + np.ptp(p)))


def _check_in_region(c: SubmersionChart, arcs: List[_NormArc]):
    for a in arcs:
        ok = c.region.contains(a.points[:, 0], a.points[:, 1])
        if not np.all(ok):
            k = int(np.argmin(ok))
            raise DomainBuildError(
                f"arc {a.name} leaves the chart region near {tuple(a.points[k])}")


def _weld_loop(arcs: List[_NormArc], li: int):
    if len(arcs) == 1 and arcs[0].closed:
        return
    diam = max(np.ptp(np.vstack([a.points for a in arcs]), axis=0).max(), 1e-30)
    tol = 1e-6 * (1 + diam)
    for k, a in enumerate(arcs):
        b = arcs[(k + 1) % len(arcs)]
        gap = np.linalg.norm(a.points[-1] - b.points[0])
        if gap > tol:
            raise DomainBuildError(
                f"loop {li} is not closed: arc {a.name} ends "
                f"{gap:.3g} away from the start of {b.name}")
        corner = 0.5 * (a.points[-1] + b.points[0])
        a.points[-1] = corner
        b.points[0] = corner


def _orient_loop(c, arcs, li, kind, loops_hint):
    """Put the domain on the left of the travel direction."""
    pts = JSDomain._assemble_loop(arcs)
    if kind == "disk":
        flip = _signed_area(pts) < 0
    else:
        # annulus on a periodic chart: the loop with the larger mean y is
        # the top and must run toward decreasing x
        mean_y = float(np.mean(pts[:, 1]))
        others = [float(np.mean(np.vstack([np.asarray(a.curve.points)
                                           for a in lp])[:, 1]))
                  for lp in loops_hint]
        is_top = mean_y >= max(others) - 1e-12
        net = _net_x_travel(arcs)
        flip = (net > 0) if is_top else (net < 0)
    if flip:
        arcs = [
            _NormArc(points=a.points[::-1].copy(), label=a.label, value=a.value,
                     closed=a.closed, name=a.name, mu_len=a.mu_len)
            for a in reversed(arcs)]
    return arcs


def _net_x_travel(arcs) -> float:
    tot = 0.0
    for a in arcs:
        tot += float(a.points[-1, 0] - a.points[0, 0])
    return tot


# -- admissibility --------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    admissible: bool
    failures: List[str]
    witness: Optional[Tuple[float, float]] = None
    corner_angles: List[float] = field(default_factory=list)


def check_admissibility(dom: JSDomain) -> AdmissibilityReport:
    """Corner rules: no cusps, and two arcs of the same infinite family
    must not meet at a convex corner (interior angle below pi)."""
    failures: List[str] = []
    witness = None
    angles: List[float] = []
    for li, lp in enumerate(dom.loops):
        if len(lp) == 1 and lp[0].closed:
            continue
        m = len(lp)
        for k in range(m):
            a, b = lp[k], lp[(k + 1) % m]
            t_in = a.points[-1] - a.points[-2]
            t_out = b.points[1] - b.points[0]
            theta = _corner_angle(t_in, t_out)
            angles.append(theta)
            pt = (float(b.points[0, 0]), float(b.points[0, 1]))
            if theta < 1e-6 or theta > 2 * math.pi - 1e-6:
                failures.append(
                    f"cusp at corner {pt} between {a.name} and {b.name}")
                witness = witness or pt
            if (a.label == b.label and a.label in (PLUS_INF, MINUS_INF)
                    and theta < math.pi - 1e-7):
                failures.append(
                    f"two {a.label} arcs meet at a convex corner {pt} "
                    f"(interior angle {theta:.4f} < pi)")
                witness = witness or pt
    return AdmissibilityReport(admissible=not failures, failures=failures,
                               witness=witness, corner_angles=angles)


# -- inscribed polygons ---------------------------------------------------------

@dataclass
class InscribedPolygon:
    edges: List[tuple]           # ("arc", li, ai) | ("chord", i, j, k) | ("geodesic", y)
    alpha: float
    beta: float
    gamma: float
    points: np.ndarray
    is_full_boundary: bool
    # filled by check_js_conditions
    margin: float = math.nan
    status: str = ""

    def describe(self) -> str:
        names = []
        for e in self.edges:
            if e[0] == "arc":
                names.append(f"arc[{e[1]}.{e[2]}]")
            elif e[0] == "chord":
                names.append(f"chord[{e[1]}-{e[2]}#{e[3]}]")
            else:
                names.append(f"geodesic[y~{e[1]:.4f}]")
        return " + ".join(names)


def enumerate_inscribed_polygons(dom: JSDomain, max_count: int = 10000
                                 ) -> Tuple[List[InscribedPolygon], bool]:
    """All inscribed polygons (up to max_count). Returns (list, overflow).

    Disk domains: simple cycles in the multigraph on the corners whose
    edges are the boundary arcs and interior geodesic chords between
    corners (at most 4 distinct chords per pair), discarding cycles whose
    trace is not a simple curve. Periodic annuli: the full boundary and
    the bands cut off by closed geodesics.
    """
    if dom.kind == "annulus":
        return _enumerate_annulus(dom, max_count)
    return _enumerate_disk(dom, max_count)


def _full_boundary_polygon(dom: JSDomain) -> InscribedPolygon:
    alpha = sum(a.mu_len for _, _, a in dom.arcs() if a.label == PLUS_INF)
    beta = sum(a.mu_len for _, _, a in dom.arcs() if a.label == MINUS_INF)
    gamma = sum(a.mu_len for _, _, a in dom.arcs())
    edges = [("arc", li, ai) for li, ai, _ in dom.arcs()]
    pts = np.vstack([dom.loop_points(i) for i in range(len(dom.loops))])
    return InscribedPolygon(edges=edges, alpha=alpha, beta=beta, gamma=gamma,
                            points=pts, is_full_boundary=True)


def _enumerate_disk(dom: JSDomain, max_count: int):
    c = dom.chart
    loop = dom.loops[0]
    polys = [_full_boundary_polygon(dom)]
    corners = dom.corners(0)
    m = len(corners)
    if m == 0:
        return polys, False

    # edge table: (u, v, kind, payload); boundary arc k joins corner k to k+1
    edges = []
    for k, a in enumerate(loop):
        edges.append((k, (k + 1) % m, "arc", (0, k)))
    diam = dom.diameter
    for i in range(m):
        for j in range(i + 1, m):
            try:
                chords = mugeo.mu_geodesic_connect_all(c, corners[i], corners[j])
            except mugeo.RegionExitError:
                chords = []
            for kk, ch in enumerate(chords):
                if _chord_degenerate(dom, i, j, ch, diam):
                    continue
                edges.append((i, j, "chord", (i, j, kk, ch)))

    cycles, overflow = _simple_cycles(m, edges, max_count)
    for cyc in cycles:
        if len(cyc) == len(loop) and all(e[2] == "arc" for e in cyc):
            continue  # the full boundary, already included
        poly = _assemble_cycle(dom, cyc)
        if poly is not None:
            polys.append(poly)
            if len(polys) > max_count:
                return polys, True
    return polys, overflow


def _chord_degenerate(dom: JSDomain, i, j, ch, diam) -> bool:
    """Drop chords that coincide with a boundary arc or leave the domain."""
    loop = dom.loops[0]
    m = len(loop)
    for k, a in enumerate(loop):
        if {k, (k + 1) % m} == {i, j}:
            dh = polyline_hausdorff(ch.points, a.points,
                                    closed_a=False, closed_b=False)
            if dh < 1e-4 * diam:
                return True
    pts = ch.points
    s = ch.s / max(ch.mu_len, 1e-30)
    mid = (s > 0.05) & (s < 0.95)
    if not np.any(mid):
        return True
    inside = dom.contains(pts[mid, 0], pts[mid, 1],
                          margin=1e-9 * diam)
    return not bool(np.all(inside))


def _simple_cycles(m, edges, max_count):
    """Vertex-simple cycles of the corner multigraph, deduplicated by
    their edge set. Edges are undirected."""
    adj = [[] for _ in range(m)]
    for eid, (u, v, kind, payload) in enumerate(edges):
        adj[u].append((v, eid))
        adj[v].append((u, eid))
    seen = set()
    cycles = []
    overflow = False

    def dfs(start, node, path_nodes, path_edges):
        nonlocal overflow
        if overflow:
            return
        for (w, eid) in adj[node]:
            if eid in path_edges:
                continue
            if w == start and len(path_edges) >= 1:
                key = frozenset(path_edges + [eid])
                if len(path_edges) + 1 >= 2 and key not in seen:
                    seen.add(key)
                    cycles.append([edges[e] for e in path_edges + [eid]])
                    if len(cycles) >= max_count:
                        overflow = True
                        return
                continue
            if w <= start or w in path_nodes:
                continue
            dfs(start, w, path_nodes | {w}, path_edges + [eid])

    for s in range(m):
        dfs(s, s, {s}, [])
        if overflow:
            break
    return cycles, overflow


def _assemble_cycle(dom: JSDomain, cyc) -> Optional[InscribedPolygon]:
    """Orient the edge cycle, build its polyline, verify simplicity, and
    measure alpha, beta, gamma."""
    loop = dom.loops[0]
    corners = dom.corners(0)
    m = len(corners)

    # rebuild the vertex sequence from the edge chain
    u0, v0 = cyc[0][0], cyc[0][1]
    if len(cyc) == 1:
        seq = [u0]
    else:
        u1, v1 = cyc[1][0], cyc[1][1]
        first = u0 if v0 in (u1, v1) else v0
        seq = [first]
        for e in cyc[:-1]:
            a, b = e[0], e[1]
            seq.append(b if seq[-1] == a else a)

    parts = []
    alpha = beta = gamma = 0.0
    edge_desc = []
    for t, e in enumerate(cyc):
        u, v, kind, payload = e
        tail = seq[t]
        if kind == "arc":
            li, ai = payload
            a = loop[ai]
            pts = a.points if tail == ai else a.points[::-1]
            if a.label == PLUS_INF:
                alpha += a.mu_len
            elif a.label == MINUS_INF:
                beta += a.mu_len
            gamma += a.mu_len
            edge_desc.append(("arc", li, ai))
        else:
            i, j, kk, ch = payload
            pts = ch.points if tail == i else ch.points[::-1]
            gamma += ch.mu_len
            edge_desc.append(("chord", i, j, kk))
        parts.append(_coarsen(pts, 200))

    if not _cycle_simple(parts, dom.diameter):
        return None
    pts = np.vstack([p[:-1] for p in parts])
    if _signed_area(pts) < 0:
        pts = pts[::-1]
    return InscribedPolygon(edges=edge_desc, alpha=alpha, beta=beta,
                            gamma=gamma, points=pts, is_full_boundary=False)


def _cycle_simple(edge_pts: List[np.ndarray], diam: float) -> bool:
    """The trace of an edge cycle is a simple closed curve: no transversal
    crossings, and non-consecutive edges (which share no vertex, since the
    cycle is vertex-simple) keep a positive distance. The distance test
    catches chords that touch at a common interior sample, where the
    strict crossing predicate is blind."""
    ne = len(edge_pts)
    tol = 1e-6 * (1.0 + diam)
    scale = max(diam, 1e-30)
    eps = 1e-12 * scale * scale
    for i in range(ne):
        for j in range(i + 1, ne):
            a, b = edge_pts[i], edge_pts[j]
            adjacent = (j == i + 1) or (i == 0 and j == ne - 1)
            cross = _segments_properly_cross(
                a[:-1, None, :], a[1:, None, :],
                b[None, :-1, :], b[None, 1:, :], eps)
            if np.any(cross):
                return False
            if not adjacent and ne > 2:
                if _dist_to_segments(a, b[:-1], b[1:]).min() < tol:
                    return False
    return True


def _coarsen(pts: np.ndarray, target: int = 400) -> np.ndarray:
    if len(pts) <= target:
        return pts
    stride = int(math.ceil(len(pts) / target))
    keep = np.arange(0, len(pts), stride)
    return pts[keep]


def _enumerate_annulus(dom: JSDomain, max_count: int):
    c = dom.chart
    for li in range(2):
        if len(dom.corners(li)) > 0:
            raise DomainBuildError(
                "inscribed polygons on periodic domains are supported "
                "only for smooth boundary loops")
    polys = [_full_boundary_polygon(dom)]
    top, bot = dom.loops[0][0], dom.loops[1][0]
    y_top = float(np.mean(top.points[:, 1]))
    y_bot = float(np.mean(bot.points[:, 1]))
    pad = 0.15 * (y_top - y_bot)
    ys = np.linspace(y_bot + pad, y_top - pad, 5)
    geos = mugeo.closed_geodesics(c, ys)
    seen = set()
    for g in geos:
        inside = dom.contains(g.points[:, 0], g.points[:, 1])
        if not np.all(inside):
            continue
        lg = g.mu_len
        for other, is_top in ((top, True), (bot, False)):
            alpha = other.mu_len if other.label == PLUS_INF else 0.0
            beta = other.mu_len if other.label == MINUS_INF else 0.0
            gamma = other.mu_len + lg
            key = (round(alpha, 10), round(beta, 10), round(gamma, 10), is_top)
            if key in seen:
                continue
            seen.add(key)
            ymean = float(np.mean(g.points[:, 1]))
            pts = np.vstack([other.points, g.points[::-1]])
            polys.append(InscribedPolygon(
                edges=[("arc", 0 if is_top else 1, 0), ("geodesic", ymean)],
                alpha=alpha, beta=beta, gamma=gamma, points=pts,
                is_full_boundary=False))
            if len(polys) > max_count:
                return polys, True
    return polys, False


# -- the solvability decision ---------------------------------------------------

@dataclass
class JSReport:
    decision: str                       # solvable | unsolvable | inconclusive-solvable
    polygons: List[InscribedPolygon]
    violations: List[InscribedPolygon]
    marginal: List[InscribedPolygon]
    overflow: bool
    boundary_equality_gap: Optional[float] = None

    @property
    def solvable(self) -> bool:
        return self.decision != "unsolvable"

    @property
    def conclusive(self) -> bool:
        return self.decision != "inconclusive-solvable"


def check_js_conditions(dom: JSDomain, max_count: int = 10000) -> JSReport:
    """Decide solvability by the inscribed-polygon length conditions.

    Every polygon must satisfy 2*alpha < gamma and 2*beta < gamma
    strictly; when the boundary carries no finite arc the full boundary
    is instead subject to alpha = beta within 1e-9 relative. Margins that
    cannot be certified strict (within 1e-9 relative of equality) count
    as violations and are flagged marginal. A violation is definitive
    even when the enumeration overflowed.
    """
    polys, overflow = enumerate_inscribed_polygons(dom, max_count)
    has_finite = dom.has_finite
    violations, marginal = [], []
    eq_gap = None
    for p in polys:
        if p.is_full_boundary and not has_finite:
            gap = abs(p.alpha - p.beta) / max(p.gamma, 1e-300)
            eq_gap = gap
            p.margin = -gap
            if gap <= MARGIN_REL:
                p.status = "ok"
            else:
                p.status = "violation"
                violations.append(p)
            continue
        mg = min(p.gamma - 2 * p.alpha, p.gamma - 2 * p.beta) / max(p.gamma, 1e-300)
        p.margin = mg
        if mg > MARGIN_REL:
            p.status = "ok"
        else:
            p.status = "violation"
            violations.append(p)
            if abs(mg) <= MARGIN_REL:
                marginal.append(p)
    if violations:
        decision = "unsolvable"
    elif overflow:
        decision = "inconclusive-solvable"
    else:
        decision = "solvable"
    return JSReport(decision=decision, polygons=polys, violations=violations,
                    marginal=marginal, overflow=overflow,
                    boundary_equality_gap=eq_gap)


# -- stock constructions ----------------------------------------------------------

def square_domain(chart: SubmersionChart, half_side: float, n_side: int = 65,
                  labels: Sequence[str] = (PLUS_INF, MINUS_INF, PLUS_INF, MINUS_INF),
                  values: Optional[Sequence[Optional[str]]] = None,
                  geo_tol: float = 1e-5) -> JSDomain:
    """Axis-aligned square with corners (+-s, +-s), sides ordered bottom,
    right, top, left (counterclockwise). Default data alternates +inf on
    the horizontal sides with -inf on the vertical ones."""
    return rectangle_domain(chart, half_side, half_side, n_side=n_side,
                            labels=labels, values=values, geo_tol=geo_tol)


def rectangle_domain(chart: SubmersionChart, hx: float, hy: float,
                     n_side: int = 65,
                     labels: Sequence[str] = (PLUS_INF, MINUS_INF, PLUS_INF, MINUS_INF),
                     values: Optional[Sequence[Optional[str]]] = None,
                     geo_tol: float = 1e-5) -> JSDomain:
    s = np.linspace(-1.0, 1.0, n_side)
    o = np.ones(n_side)
    sides = [
        np.column_stack([hx * s, -hy * o]),        # bottom, left to right
        np.column_stack([hx * o, hy * s]),         # right, upward
        np.column_stack([-hx * s, hy * o]),        # top, right to left
        np.column_stack([-hx * o, -hy * s]),       # left, downward
    ]
    if values is None:
        values = [None] * 4
    arcs = []
    for k, (pts, lab, val) in enumerate(zip(sides, labels, values)):
        expr = parse_expr(val) if isinstance(val, str) else val
        if lab == FINITE and expr is None:
            expr = parse_expr("0")
        arcs.append(BoundaryArc(CurveSample(pts), lab,
                                expr if lab == FINITE else None))
    return build_domain(chart, [arcs], geo_tol=geo_tol)


def strip_domain(chart: SubmersionChart, y_top: float, y_bot: float,
                 n_side: int = 129, geo_tol: float = 1e-5) -> JSDomain:
    """Band on a periodic chart between two horizontal closed loops, +inf
    on the top loop and -inf on the bottom one."""
    if not chart.periodic:
        raise DomainBuildError("strip_domain needs a periodic chart")
    x0 = chart.region.x0
    period = chart.region.period
    xs = x0 + period * np.arange(n_side - 1) / (n_side - 1.0)
    top = np.column_stack([xs[::-1], np.full(n_side - 1, y_top)])
    bot = np.column_stack([xs, np.full(n_side - 1, y_bot)])
    loops = [
        [BoundaryArc(CurveSample(top, closed=True), PLUS_INF)],
        [BoundaryArc(CurveSample(bot, closed=True), MINUS_INF)],
    ]
    return build_domain(chart, loops, geo_tol=geo_tol)
