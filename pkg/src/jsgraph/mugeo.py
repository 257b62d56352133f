"""Geometry of the conformal mu-metric rho^2 (dx^2 + dy^2), rho = lambda*mu.

mu-geodesics are the projections of minimal vertical cylinders; the mean
curvature of the cylinder over a curve gamma satisfies 2H = mu*ktilde
with ktilde the geodesic curvature of gamma in the mu-metric. Geodesics
are integrated in mu-arclength, where the system reads

    x'' = -(rho_x/rho)(x'^2 - y'^2) - 2 (rho_y/rho) x' y'
    y'' =  (rho_y/rho)(x'^2 - y'^2) - 2 (rho_x/rho) x' y'

Conformal geodesic curvature is evaluated from curve samples by the
stencil form of

    kappa = (x'y'' - x''y') / (F (x'^2+y'^2)^(3/2))
          + (F_x y' - F_y x') / (F^2 sqrt(x'^2+y'^2))

with F = lambda (base metric) or F = rho (mu-metric), signed so that a
positive value curves toward the curve's chosen normal side; the formula
as written corresponds to the left normal of the travel direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.optimize import root

from .chart import SubmersionChart
from .expr import compile_expr

__all__ = [
    "CurveSample", "GeodesicArc", "NoConnectionError", "RegionExitError",
    "mu_length", "resample_double",
    "mu_geodesic_shoot", "mu_geodesic_connect", "mu_geodesic_connect_all",
    "mu_geodesic_curvature", "mu_geodesic_curvature_all",
    "cylinder_mean_curvature", "cylinder_mean_curvature_all",
    "is_mu_convex", "closed_geodesics",
]


class NoConnectionError(RuntimeError):
    """No geodesic chord between the two points was found by shooting."""


class RegionExitError(ValueError):
    pass


# 4-point Gauss-Legendre on [-1, 1]
_GL_X = np.array([-0.8611363115940526, -0.33998104358485626,
                  0.33998104358485626, 0.8611363115940526])
_GL_W = np.array([0.34785484513745385, 0.6521451548625461,
                  0.6521451548625461, 0.34785484513745385])


@dataclass
class CurveSample:
    """Sampled curve. normal_side is +1 for the left of the travel
    direction, -1 for the right; curvature signs follow it."""

    points: np.ndarray
    closed: bool = False
    normal_side: int = 1

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("CurveSample needs an (n,2) array with n >= 2")
        # drop exactly repeated consecutive samples, they break the stencils
        keep = np.ones(len(pts), dtype=bool)
        d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        keep[1:] = d > 1e-15
        self.points = pts[keep]
        if self.normal_side not in (1, -1):
            raise ValueError("normal_side must be +1 or -1")

    def __len__(self):
        return len(self.points)

    def params(self) -> np.ndarray:
        """Cumulative Euclidean chord length, used as the FD parameter."""
        d = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(d)])

    def tangents(self) -> np.ndarray:
        """Euclidean-unit tangents (centered stencils, one-sided at open ends)."""
        xp, yp, _, _, idx = _fd_derivs(self)
        n = len(self.points)
        t = np.zeros((n, 2))
        t[idx, 0], t[idx, 1] = xp, yp
        if not self.closed:
            t[0] = self.points[1] - self.points[0]
            t[-1] = self.points[-1] - self.points[-2]
        nrm = np.linalg.norm(t, axis=1)
        return t / nrm[:, None]

    def lambda_tangents(self, c: SubmersionChart) -> np.ndarray:
        """Tangents normalized to unit length for ds^2_lambda."""
        t = self.tangents()
        lam = c.ev("lam", self.points[:, 0], self.points[:, 1])
        return t / lam[:, None]

    def reversed(self) -> "CurveSample":
        return CurveSample(self.points[::-1].copy(), self.closed, -self.normal_side)


def _segment_arrays(curve: CurveSample):
    p = curve.points
    if curve.closed:
        return p, np.vstack([p[1:], p[:1]])
    return p[:-1], p[1:]


def mu_length(c: SubmersionChart, curve: CurveSample) -> float:
    """Length of the polyline in the mu-metric: composite 4-point
    Gauss-Legendre of rho = lambda*mu per segment. On periodic charts the
    closing segment of a closed curve takes the wrapped displacement."""
    p0, p1 = _segment_arrays(curve)
    if curve.closed and c.periodic:
        per = c.region.period
        p1 = p1.copy()
        p1[-1, 0] += per * round((p0[-1, 0] - p1[-1, 0]) / per)
    seg = np.linalg.norm(p1 - p0, axis=1)
    total = 0.0
    for xi, w in zip(_GL_X, _GL_W):
        mid = p0 + (0.5 + 0.5 * xi) * (p1 - p0)
        inside = c.region.contains(mid[:, 0], mid[:, 1], pad=0.0)
        if not np.all(inside):
            k = int(np.argmin(inside))
            raise RegionExitError(f"curve exits the chart region near {tuple(mid[k])}")
        rho = c.ev("rho", mid[:, 0], mid[:, 1])
        total += 0.5 * w * float(np.sum(rho * seg))
    return total


def resample_double(curve: CurveSample) -> CurveSample:
    """Insert chord midpoints; the polyline is unchanged as a point set."""
    p0, p1 = _segment_arrays(curve)
    mids = 0.5 * (p0 + p1)
    out = np.empty((len(p0) + len(curve.points), 2))
    out[0::2] = curve.points
    out[1::2] = mids
    return CurveSample(out, curve.closed, curve.normal_side)


# -- geodesic integration -----------------------------------------------------

class _GeoFields:
    """Compiled scalar and vectorized rho, rho_x, rho_y with periodic wrap."""

    def __init__(self, c: SubmersionChart):
        raw = {k: compile_expr(c.expr_for(k)) for k in ("rho", "rho_x", "rho_y")}
        vec = {k: compile_expr(c.expr_for(k), vectorized=True)
               for k in ("rho", "rho_x", "rho_y")}
        if c.periodic:
            x0, p = c.region.x0, c.region.period

            def wrap_s(f):
                return lambda x, y: f(x0 + (x - x0) % p, y)

            def wrap_v(f):
                return lambda x, y: f(x0 + np.mod(x - x0, p), y)

            raw = {k: wrap_s(f) for k, f in raw.items()}
            vec = {k: wrap_v(f) for k, f in vec.items()}
        self.rho, self.rho_x, self.rho_y = raw["rho"], raw["rho_x"], raw["rho_y"]
        self.rho_v, self.rho_x_v, self.rho_y_v = vec["rho"], vec["rho_x"], vec["rho_y"]


def _geo_fields(c: SubmersionChart) -> _GeoFields:
    fs = c._cache.get("_geofields")
    if fs is None:
        fs = _GeoFields(c)
        c._cache["_geofields"] = fs
    return fs


def _rhs(fs: _GeoFields):
    rho, rho_x, rho_y = fs.rho, fs.rho_x, fs.rho_y

    def f(x, y, vx, vy):
        r = rho(x, y)
        px = rho_x(x, y) / r
        py = rho_y(x, y) / r
        d = vx * vx - vy * vy
        cr = 2.0 * vx * vy
        return vx, vy, -px * d - py * cr, py * d - px * cr

    return f


def _rk4(f, x, y, vx, vy, h):
    a1, b1, c1, d1 = f(x, y, vx, vy)
    a2, b2, c2, d2 = f(x + 0.5 * h * a1, y + 0.5 * h * b1,
                       vx + 0.5 * h * c1, vy + 0.5 * h * d1)
    a3, b3, c3, d3 = f(x + 0.5 * h * a2, y + 0.5 * h * b2,
                       vx + 0.5 * h * c2, vy + 0.5 * h * d2)
    a4, b4, c4, d4 = f(x + h * a3, y + h * b3, vx + h * c3, vy + h * d3)
    s = h / 6.0
    return (x + s * (a1 + 2 * a2 + 2 * a3 + a4),
            y + s * (b1 + 2 * b2 + 2 * b3 + b4),
            vx + s * (c1 + 2 * c2 + 2 * c3 + c4),
            vy + s * (d1 + 2 * d2 + 2 * d3 + d4))


class _Emitter:
    def __init__(self):
        self.xs: List[float] = []
        self.ys: List[float] = []
        self.vxs: List[float] = []
        self.vys: List[float] = []
        self.ss: List[float] = []

    def emit(self, x, y, vx, vy, s):
        self.xs.append(x)
        self.ys.append(y)
        self.vxs.append(vx)
        self.vys.append(vy)
        self.ss.append(s)

    def arc(self, closed=False, truncated=False) -> "GeodesicArc":
        pts = np.column_stack([self.xs, self.ys])
        tg = np.column_stack([self.vxs, self.vys])
        nrm = np.linalg.norm(tg, axis=1)
        nrm[nrm == 0] = 1.0
        return GeodesicArc(points=pts, tangents=tg / nrm[:, None],
                           s=np.asarray(self.ss), closed=closed,
                           truncated=truncated)


@dataclass
class GeodesicArc:
    """Geodesic integrated in mu-arclength: s is the affine parameter and
    equals the mu-length from the start. Closed geodesics drop the
    duplicated seam sample; closed_len keeps their full length."""

    points: np.ndarray
    tangents: np.ndarray
    s: np.ndarray
    closed: bool = False
    truncated: bool = False
    closed_len: Optional[float] = None

    @property
    def mu_len(self) -> float:
        if self.closed_len is not None:
            return self.closed_len
        return float(self.s[-1])

    @property
    def endpoint(self):
        return self.points[-1]

    def as_curve(self, normal_side: int = 1) -> CurveSample:
        return CurveSample(self.points.copy(), closed=self.closed,
                           normal_side=normal_side)


def mu_geodesic_shoot(c: SubmersionChart, p, theta: float, L: float,
                      h: Optional[float] = None, region_stop: bool = True,
                      rtol: float = 1e-10) -> GeodesicArc:
    """Shoot a mu-geodesic of mu-length L from p at chart angle theta.

    Step-doubling adaptive RK4 with local extrapolation; the step error
    target is rtol per unit state. Stops early (truncated flag) when the
    chart region boundary is hit.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    px, py = float(p[0]), float(p[1])
    if not bool(c.region.contains(px, py)):
        raise RegionExitError(f"start point {p} is outside the chart region")
    fs = _geo_fields(c)
    f = _rhs(fs)
    r0 = fs.rho(px, py)
    vx, vy = math.cos(theta) / r0, math.sin(theta) / r0

    hmax = min(h if h is not None else L / 64.0, L / 16.0)
    hstep = hmax
    s = 0.0
    em = _Emitter()
    em.emit(px, py, vx, vy, 0.0)
    x, y = px, py
    truncated = False
    try:
        while s < L - 1e-14:
            hstep = min(hstep, L - s, hmax)
            x1, y1, vx1, vy1 = _rk4(f, x, y, vx, vy, hstep)
            xh, yh, vxh, vyh = _rk4(f, x, y, vx, vy, 0.5 * hstep)
            x2, y2, vx2, vy2 = _rk4(f, xh, yh, vxh, vyh, 0.5 * hstep)
            err = max(abs(x2 - x1) / (1.0 + abs(x2)),
                      abs(y2 - y1) / (1.0 + abs(y2)),
                      abs(vx2 - vx1) / (1.0 + abs(vx2)),
                      abs(vy2 - vy1) / (1.0 + abs(vy2))) / 15.0
            if not math.isfinite(err) or err > rtol:
                shrink = 0.2 if not math.isfinite(err) \
                    else max(0.2, 0.9 * (rtol / err) ** 0.2)
                hstep *= shrink
                if hstep < 1e-13:
                    raise RegionExitError(
                        f"step size underflow near ({x:.6g},{y:.6g})")
                continue
            # 5th-order local extrapolation
            xn = x2 + (x2 - x1) / 15.0
            yn = y2 + (y2 - y1) / 15.0
            vxn = vx2 + (vx2 - vx1) / 15.0
            vyn = vy2 + (vy2 - vy1) / 15.0
            if region_stop and not bool(c.region.contains(xn, yn)):
                frac = _exit_fraction(c, f, x, y, vx, vy, hstep)
                if frac > 1e-12:
                    xb, yb, vxb, vyb = _rk4(f, x, y, vx, vy, frac * hstep)
                    s += frac * hstep
                    em.emit(xb, yb, vxb, vyb, s)
                truncated = True
                break
            x, y, vx, vy = xn, yn, vxn, vyn
            s += hstep
            em.emit(x, y, vx, vy, s)
            if err < 0.25 * rtol:
                hstep = min(2.0 * hstep, hmax)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise RegionExitError(f"field evaluation failed near ({x:.6g},{y:.6g})") from exc
    return em.arc(truncated=truncated)


def _exit_fraction(c, f, x, y, vx, vy, h):
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        xm, ym, _, _ = _rk4(f, x, y, vx, vy, mid * h)
        if bool(c.region.contains(xm, ym)):
            lo = mid
        else:
            hi = mid
    return lo


def _endpoint_fixed(c, p, theta, L, nst=192):
    """Endpoint by fixed-step RK4: a smooth function of (theta, L), used
    as the shooting residual. Returns (inf, inf) on field failure."""
    fs = _geo_fields(c)
    f = _rhs(fs)
    x, y = float(p[0]), float(p[1])
    try:
        r0 = fs.rho(x, y)
        vx, vy = math.cos(theta) / r0, math.sin(theta) / r0
        hstep = L / nst
        for _ in range(nst):
            x, y, vx, vy = _rk4(f, x, y, vx, vy, hstep)
            if fs.rho(x, y) <= 1e-12:
                return math.inf, math.inf
        if not (math.isfinite(x) and math.isfinite(y)):
            return math.inf, math.inf
        return x, y
    except (ValueError, ZeroDivisionError, OverflowError):
        return math.inf, math.inf


def _fan_batch(c, p, thetas, Lmax, nst=192):
    """Vectorized fixed-step RK4 over a fan of directions; returns the
    trajectory block (nst+1, k, 2). Dead members hold their last position."""
    fs = _geo_fields(c)
    k = len(thetas)
    x = np.full(k, float(p[0]))
    y = np.full(k, float(p[1]))
    with np.errstate(all="ignore"):
        r0 = fs.rho_v(x, y) * np.ones(k)
        vx = np.cos(thetas) / r0
        vy = np.sin(thetas) / r0
        traj = np.empty((nst + 1, k, 2))
        traj[0, :, 0], traj[0, :, 1] = x, y
        h = Lmax / nst
        xb0, xb1, yb0, yb1 = c.region.bbox()
        padx = 0.25 * (xb1 - xb0)
        pady = 0.25 * (yb1 - yb0)

        def rhs(x, y, vx, vy):
            r = fs.rho_v(x, y) * np.ones_like(x)
            px = fs.rho_x_v(x, y) / r
            py = fs.rho_y_v(x, y) / r
            d = vx * vx - vy * vy
            cr = 2.0 * vx * vy
            return vx, vy, -px * d - py * cr, py * d - px * cr

        alive = np.ones(k, dtype=bool)
        for i in range(nst):
            a1, b1, c1, d1 = rhs(x, y, vx, vy)
            a2, b2, c2, d2 = rhs(x + 0.5 * h * a1, y + 0.5 * h * b1,
                                 vx + 0.5 * h * c1, vy + 0.5 * h * d1)
            a3, b3, c3, d3 = rhs(x + 0.5 * h * a2, y + 0.5 * h * b2,
                                 vx + 0.5 * h * c2, vy + 0.5 * h * d2)
            a4, b4, c4, d4 = rhs(x + h * a3, y + h * b3, vx + h * c3, vy + h * d3)
            s6 = h / 6.0
            xn = x + s6 * (a1 + 2 * a2 + 2 * a3 + a4)
            yn = y + s6 * (b1 + 2 * b2 + 2 * b3 + b4)
            vxn = vx + s6 * (c1 + 2 * c2 + 2 * c3 + c4)
            vyn = vy + s6 * (d1 + 2 * d2 + 2 * d3 + d4)
            rr = fs.rho_v(xn, yn) * np.ones(k)
            ok = (np.isfinite(xn) & np.isfinite(yn)
                  & np.isfinite(vxn) & np.isfinite(vyn)
                  & np.isfinite(rr) & (rr > 1e-12)
                  & (yn > yb0 - pady) & (yn < yb1 + pady))
            if not c.periodic:
                ok &= (xn > xb0 - padx) & (xn < xb1 + padx)
            alive = alive & ok
            x = np.where(alive, xn, x)
            y = np.where(alive, yn, y)
            vx = np.where(alive, vxn, vx)
            vy = np.where(alive, vyn, vy)
            traj[i + 1, :, 0], traj[i + 1, :, 1] = x, y
    return traj


def mu_geodesic_connect_all(c: SubmersionChart, p, q, tol: float = 1e-8,
                            k_max: int = 4) -> List[GeodesicArc]:
    """All distinct geodesic chords from p to q found by multi-start
    shooting (16 initial angles), clustered by final angle at 1e-3
    separation, at most k_max, sorted by mu-length."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.allclose(p, q):
        raise ValueError("p and q must be distinct")
    chord = CurveSample(np.vstack([p, q]))
    L0 = mu_length(c, resample_double(resample_double(chord)))
    lmax = 2.5 * L0
    nst = 192
    thetas = 2.0 * math.pi * np.arange(16) / 16.0
    traj = _fan_batch(c, p, thetas, lmax, nst)
    d = np.linalg.norm(traj - q[None, None, :], axis=2)  # (nst+1, 16)
    kbest = np.argmin(d, axis=0)
    dbest = d[kbest, np.arange(16)]
    order = np.argsort(dbest)

    candidates = []
    for j in order:
        if dbest[j] > 1.2 * L0 or kbest[j] == 0:
            continue
        candidates.append((float(thetas[j]), float(kbest[j] * lmax / nst)))
        if len(candidates) >= 8:
            break

    sols = []
    for th0, l0 in candidates:
        res = root(lambda z: np.asarray(_endpoint_fixed(c, p, z[0], z[1], nst)) - q,
                   x0=np.array([th0, max(l0, 0.05 * L0)]), method="hybr",
                   options={"xtol": 1e-13, "maxfev": 200})
        th, ll = float(res.x[0]), float(res.x[1])
        if ll <= 1e-9 or not np.all(np.isfinite(res.fun)):
            continue
        if np.linalg.norm(res.fun) > max(tol, 1e-9 * (1 + np.linalg.norm(q))):
            continue
        th = th % (2.0 * math.pi)
        if any(min(abs(th - t2), 2 * math.pi - abs(th - t2)) < 1e-3 for t2, _ in sols):
            continue
        sols.append((th, ll))

    arcs = []
    for th, ll in sorted(sols, key=lambda z: z[1]):
        try:
            arc = mu_geodesic_shoot(c, p, th, ll)
        except RegionExitError:
            continue
        if arc.truncated:
            continue
        if np.linalg.norm(arc.endpoint - q) > max(1e-7, 10 * tol):
            continue
        arcs.append(arc)
        if len(arcs) >= k_max:
            break
    return arcs


def mu_geodesic_connect(c: SubmersionChart, p, q, tol: float = 1e-8) -> GeodesicArc:
    """Least-mu-length geodesic chord from p to q (see connect_all)."""
    arcs = mu_geodesic_connect_all(c, p, q, tol=tol, k_max=4)
    if not arcs:
        raise NoConnectionError(f"no mu-geodesic found from {tuple(p)} to {tuple(q)}")
    return arcs[0]


def closed_geodesics(c: SubmersionChart, y_values, tol: float = 1e-9) -> List[GeodesicArc]:
    """Closed mu-geodesics wrapping once around a periodic chart, found as
    fixed points of the period return map from horizontal starting shots."""
    if not c.periodic:
        raise ValueError("closed geodesic search requires a periodic chart")
    period = c.region.period
    x0 = c.region.x0
    out = []
    for y0 in y_values:
        def gap(z):
            yy, th = float(z[0]), float(z[1])
            st = _advance_period(c, x0, yy, th, period)
            if st is None:
                return np.array([1e3, 1e3])
            y_end, th_end = st[0], st[1]
            return np.array([y_end - yy, _angdiff(th_end, th)])

        res = root(gap, x0=np.array([float(y0), 0.0]), method="hybr",
                   options={"xtol": 1e-13, "maxfev": 100})
        if not np.all(np.isfinite(res.fun)) or np.linalg.norm(res.fun) > tol:
            continue
        ys, ths = float(res.x[0]), float(res.x[1])
        st = _advance_period(c, x0, ys, ths, period, want_arc=True)
        if st is None:
            continue
        arc = st[2]
        full_len = float(arc.s[-1])
        seam = arc.points[0] + np.array([period, 0.0])
        if np.linalg.norm(arc.points[-1] - seam) < 1e-7 * (1 + period):
            arc = GeodesicArc(points=arc.points[:-1], tangents=arc.tangents[:-1],
                              s=arc.s[:-1], closed=True, closed_len=full_len)
        else:
            arc.closed = True
            arc.closed_len = full_len
        ymean = float(np.mean(arc.points[:, 1]))
        if any(abs(ymean - float(np.mean(a.points[:, 1]))) < 1e-6 for a in out):
            continue
        out.append(arc)
    return out


def _angdiff(a, b):
    d = (a - b) % (2.0 * math.pi)
    return d - 2.0 * math.pi if d > math.pi else d


def _advance_period(c, x0, y0, theta, period, want_arc=False):
    """Integrate from (x0, y0) until the unwrapped x advances by one
    period; returns (y_end, theta_end[, arc]) or None."""
    if not bool(c.region.contains(x0, y0)):
        return None
    fs = _geo_fields(c)
    f = _rhs(fs)
    try:
        r0 = fs.rho(x0, y0)
    except (ValueError, ZeroDivisionError, OverflowError):
        return None
    vx, vy = math.cos(theta) / r0, math.sin(theta) / r0
    if vx <= 0:
        return None
    x, y = x0, y0
    em = _Emitter()
    em.emit(x, y, vx, vy, 0.0)
    s = 0.0
    # conservative fixed step; the return-map root polish does the precision
    hstep = period * fs.rho(x0, y0) / 512.0
    try:
        for _ in range(100000):
            xn, yn, vxn, vyn = _rk4(f, x, y, vx, vy, hstep)
            if not bool(c.region.contains(xn, yn)):
                return None
            if xn - x0 >= period:
                lo, hi = 0.0, 1.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    xm, ym, vxm, vym = _rk4(f, x, y, vx, vy, mid * hstep)
                    if xm - x0 < period:
                        lo = mid
                    else:
                        hi = mid
                xb, yb, vxb, vyb = _rk4(f, x, y, vx, vy, hi * hstep)
                s += hi * hstep
                em.emit(xb, yb, vxb, vyb, s)
                th_end = math.atan2(vyb, vxb)
                if want_arc:
                    return yb, th_end, em.arc(closed=False)
                return yb, th_end
            x, y, vx, vy = xn, yn, vxn, vyn
            s += hstep
            em.emit(x, y, vx, vy, s)
    except (ValueError, ZeroDivisionError, OverflowError):
        return None
    return None


# -- curvature from samples ---------------------------------------------------

def _fd_derivs(curve: CurveSample):
    """First and second parameter derivatives by nonuniform 3-point
    stencils; returns (xp, yp, xpp, ypp, interior_indices)."""
    pts = curve.points
    n = len(pts)
    if curve.closed:
        prev = np.roll(pts, 1, axis=0)
        nxt = np.roll(pts, -1, axis=0)
        h1 = np.linalg.norm(pts - prev, axis=1)
        h2 = np.linalg.norm(nxt - pts, axis=1)
        idx = np.arange(n)
        p0, p1, p2 = prev, pts, nxt
    else:
        if n < 3:
            raise ValueError("need at least 3 samples for curvature")
        p0, p1, p2 = pts[:-2], pts[1:-1], pts[2:]
        h1 = np.linalg.norm(p1 - p0, axis=1)
        h2 = np.linalg.norm(p2 - p1, axis=1)
        idx = np.arange(1, n - 1)
    if np.any(h1 < 1e-12) or np.any(h2 < 1e-12):
        raise ValueError("degenerate tangent: repeated samples")
    c0 = -h2 / (h1 * (h1 + h2))
    c1 = (h2 - h1) / (h1 * h2)
    c2 = h1 / (h2 * (h1 + h2))
    d0 = 2.0 / (h1 * (h1 + h2))
    d1 = -2.0 / (h1 * h2)
    d2 = 2.0 / (h2 * (h1 + h2))
    xp = c0 * p0[:, 0] + c1 * p1[:, 0] + c2 * p2[:, 0]
    yp = c0 * p0[:, 1] + c1 * p1[:, 1] + c2 * p2[:, 1]
    xpp = d0 * p0[:, 0] + d1 * p1[:, 0] + d2 * p2[:, 0]
    ypp = d0 * p0[:, 1] + d1 * p1[:, 1] + d2 * p2[:, 1]
    return xp, yp, xpp, ypp, idx


def _kappa_conformal(c: SubmersionChart, curve: CurveSample, key: str):
    """Geodesic curvature array for the conformal metric F^2*(dx^2+dy^2)
    with F named by key ('lam' or 'rho'), toward the chosen normal side."""
    xp, yp, xpp, ypp, idx = _fd_derivs(curve)
    x, y = curve.points[idx, 0], curve.points[idx, 1]
    F = c.ev(key, x, y)
    Fx = c.ev(key + "_x", x, y)
    Fy = c.ev(key + "_y", x, y)
    sp2 = xp * xp + yp * yp
    if np.any(sp2 < 1e-24):
        raise ValueError("degenerate tangent (|gamma'| < 1e-12)")
    kappa = (xp * ypp - xpp * yp) / (F * sp2 ** 1.5) \
        + (Fx * yp - Fy * xp) / (F * F * np.sqrt(sp2))
    return curve.normal_side * kappa, idx


def mu_geodesic_curvature_all(c: SubmersionChart, curve: CurveSample):
    """ktilde_g at every interior sample; returns (indices, values)."""
    kappa, idx = _kappa_conformal(c, curve, "rho")
    return idx, kappa


def mu_geodesic_curvature(c: SubmersionChart, curve: CurveSample, i: int) -> float:
    idx, kappa = mu_geodesic_curvature_all(c, curve)
    pos = np.nonzero(idx == i)[0]
    if len(pos) == 0:
        raise IndexError(f"sample {i} is not interior")
    return float(kappa[pos[0]])


def cylinder_mean_curvature_all(c: SubmersionChart, curve: CurveSample):
    """H of the vertical cylinder over the curve, from the base-metric
    formula 2H = kappa_g - <eta, grad(mu)/mu>; returns (indices, values)."""
    kappa_lam, idx = _kappa_conformal(c, curve, "lam")
    xp, yp, _, _, _ = _fd_derivs(curve)
    x, y = curve.points[idx, 0], curve.points[idx, 1]
    lam = c.ev("lam", x, y)
    mu = c.ev("mu", x, y)
    mux = c.ev("mu_x", x, y)
    muy = c.ev("mu_y", x, y)
    sp = np.sqrt(xp * xp + yp * yp)
    grad_term = curve.normal_side * (muy * xp - mux * yp) / (mu * lam * sp)
    return idx, 0.5 * (kappa_lam - grad_term)


def cylinder_mean_curvature(c: SubmersionChart, curve: CurveSample, i: int) -> float:
    idx, H = cylinder_mean_curvature_all(c, curve)
    pos = np.nonzero(idx == i)[0]
    if len(pos) == 0:
        raise IndexError(f"sample {i} is not interior")
    return float(H[pos[0]])


def is_mu_convex(c: SubmersionChart, curve: CurveSample, tol: float = 1e-6) -> bool:
    """True iff ktilde_g >= -tol at every interior sample, the normal side
    being the inner conormal of the prospective domain."""
    _, kappa = mu_geodesic_curvature_all(c, curve)
    return bool(np.all(kappa >= -tol))
