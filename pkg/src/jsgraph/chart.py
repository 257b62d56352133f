"""Killing submersion charts in the local model.

A chart stores the five fields of the coordinate metric

    ds^2 = lambda^2 (dx^2 + dy^2) + mu^2 (dt - lambda*(a dx + b dy))^2

over a planar region (rectangle, disk, or x-periodic strip). The only
compatibility condition tying the fields together is

    (lambda*b)_x - (lambda*a)_y = 2*tau*lambda^2/mu,

and validate_chart measures its defect on a sample grid using exact
symbolic derivatives. The zero section is the coordinate section t = 0;
all graph heights are measured against it.

Builtin scenes cover the worked examples: the flat Scherk square,
rotational coordinates for R^3 (mu = x, catenary mu-geodesics), Nil_3
in the rotationally symmetric gauge, H^2 x R and the S^2 x R cap as
conformal disks, and the flat cylinder whose Jenkins-Serrin problem is
the canonical unsolvable one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .expr import DomainError, Expr, BinOp, diff_expr, eval_expr_many, parse_expr

__all__ = [
    "Rectangle", "Disk", "Region",
    "SubmersionChart", "CompatibilityReport", "ChartError",
    "validate_chart", "builtin_scene", "scene_names", "scene_info",
]


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class Rectangle:
    """Open axis-aligned rectangle, optionally periodic in x with period x1-x0."""

    x0: float
    x1: float
    y0: float
    y1: float
    periodic_x: bool = False

    @property
    def period(self) -> float:
        return self.x1 - self.x0

    def contains(self, x, y, pad: float = 0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok_y = (y > self.y0 + pad) & (y < self.y1 - pad)
        if self.periodic_x:
            return ok_y
        return ok_y & (x > self.x0 + pad) & (x < self.x1 - pad)

    def bbox(self):
        return (self.x0, self.x1, self.y0, self.y1)

    def diameter(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def sample_grid(self, n: int):
        inset_x = (self.x1 - self.x0) * 1e-6
        inset_y = (self.y1 - self.y0) * 1e-6
        if self.periodic_x:
            # sample one full period, endpoint excluded
            gx = self.x0 + (self.x1 - self.x0) * np.arange(n) / n
        else:
            gx = np.linspace(self.x0 + inset_x, self.x1 - inset_x, n)
        gy = np.linspace(self.y0 + inset_y, self.y1 - inset_y, n)
        X, Y = np.meshgrid(gx, gy)
        return X.ravel(), Y.ravel()


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    r: float

    periodic_x = False

    def contains(self, x, y, pad: float = 0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 < (self.r - pad) ** 2

    def bbox(self):
        return (self.cx - self.r, self.cx + self.r, self.cy - self.r, self.cy + self.r)

    def diameter(self) -> float:
        return 2.0 * self.r

    def sample_grid(self, n: int):
        # grid on the bounding box, masked to a slightly shrunk disk so
        # boundary-singular factors (H^2 x R) stay finite
        lim = self.r * (1.0 - 1e-6)
        gx = np.linspace(self.cx - lim, self.cx + lim, n)
        gy = np.linspace(self.cy - lim, self.cy + lim, n)
        X, Y = np.meshgrid(gx, gy)
        X, Y = X.ravel(), Y.ravel()
        keep = (X - self.cx) ** 2 + (Y - self.cy) ** 2 <= lim * lim
        return X[keep], Y[keep]


Region = Union[Rectangle, Disk]

_BASE_FIELDS = ("lam", "mu", "tau", "a", "b")


@dataclass
class SubmersionChart:
    region: Region
    lam: Expr
    mu: Expr
    tau: Expr
    a: Expr
    b: Expr
    name: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # Derived expression keys: base field names, "rho" (= lam*mu), and
    # "<key>_x" / "<key>_y" for symbolic partials, nested as needed.
    def expr_for(self, key: str) -> Expr:
        if key in self._cache:
            return self._cache[key]
        if key in _BASE_FIELDS:
            e = getattr(self, key)
        elif key == "rho":
            e = BinOp("*", self.lam, self.mu)
        elif key.endswith("_x") or key.endswith("_y"):
            e = diff_expr(self.expr_for(key[:-2]), key[-1])
        else:
            raise KeyError(key)
        self._cache[key] = e
        return e

    def _wrap_x(self, x):
        if getattr(self.region, "periodic_x", False):
            p = self.region.period
            return self.region.x0 + np.mod(np.asarray(x, dtype=float) - self.region.x0, p)
        return x

    def ev(self, key: str, x, y) -> np.ndarray:
        """Evaluate a field or derived expression, wrapping x if periodic."""
        return eval_expr_many(self.expr_for(key), self._wrap_x(x), y)

    @property
    def periodic(self) -> bool:
        return bool(getattr(self.region, "periodic_x", False))


@dataclass
class CompatibilityReport:
    max_defect: float
    worst_point: tuple
    min_lam: float
    min_mu: float


def validate_chart(c: SubmersionChart, grid_n: int = 64) -> CompatibilityReport:
    """Max over a grid of |(lambda*b)_x - (lambda*a)_y - 2*tau*lambda^2/mu|.

    Also records field positivity minima; for periodic charts the fields
    are additionally sampled one period apart and compared.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    X, Y = c.region.sample_grid(grid_n)
    lb = BinOp("*", c.lam, c.b)
    la = BinOp("*", c.lam, c.a)
    try:
        t1 = eval_expr_many(diff_expr(lb, "x"), X, Y)
        t2 = eval_expr_many(diff_expr(la, "y"), X, Y)
        lam = eval_expr_many(c.lam, X, Y)
        mu = eval_expr_many(c.mu, X, Y)
        tau = eval_expr_many(c.tau, X, Y)
    except DomainError as exc:
        pt = _locate_failure(c, X, Y)
        raise ChartError(f"field evaluation failed at {pt}: {exc}") from exc
    defect = np.abs(t1 - t2 - 2.0 * tau * lam * lam / mu)
    k = int(np.argmax(defect))
    if c.periodic:
        p = c.region.period
        for key in _BASE_FIELDS:
            v0 = eval_expr_many(c.expr_for(key), X, Y)
            v1 = eval_expr_many(c.expr_for(key), X + p, Y)
            if np.max(np.abs(v1 - v0)) > 1e-10 * (1.0 + np.max(np.abs(v0))):
                raise ChartError(f"field {key!r} is not periodic with period {p}")
    return CompatibilityReport(
        max_defect=float(defect[k]),
        worst_point=(float(X[k]), float(Y[k])),
        min_lam=float(np.min(lam)),
        min_mu=float(np.min(mu)),
    )


def _locate_failure(c: SubmersionChart, X, Y):
    from .expr import eval_expr
    for x, y in zip(X, Y):
        try:
            for key in _BASE_FIELDS:
                eval_expr(c.expr_for(key), x, y)
        except DomainError:
            return (float(x), float(y))
    return (float(X[0]), float(Y[0]))


# -- builtin scenes -----------------------------------------------------------

NIL3_TAU = 0.5

_SCENES = {
    "flat-scherk": "flat R^3 chart; Scherk square with alternating +inf/-inf sides",
    "rotational-r3": "rotational coordinates for R^3: mu = x on x > 0; catenary geodesics",
    "nil3": "Nil_3, tau = 1/2, symmetric gauge a = -tau*y, b = tau*x; Scherk-like square",
    "h2xr": "H^2 x R on the unit Poincare disk, lambda = 2/(1 - x^2 - y^2)",
    "s2xr-cap": "S^2 x R chart on a spherical cap, lambda = 2/(1 + x^2 + y^2)",
    "flat-cylinder": "flat cylinder S^1 x (-1,1); the unsolvable Jenkins-Serrin strip",
}


def scene_names():
    return list(_SCENES)


def scene_info(name: str) -> str:
    return _SCENES[name]


def _chart(region, lam, mu, tau="0", a="0", b="0", name="custom"):
    return SubmersionChart(
        region=region,
        lam=parse_expr(lam),
        mu=parse_expr(mu),
        tau=parse_expr(tau),
        a=parse_expr(a),
        b=parse_expr(b),
        name=name,
    )


def builtin_scene(name: str):
    """Return (SubmersionChart, JSDomain or None) for a named scene.

    The chart regions are padded beyond the canonical domains so the
    domains sit relatively compact inside them (geodesic shooting near
    corners needs the slack).
    """
    if name not in _SCENES:
        raise ChartError(f"unknown scene {name!r}; available: {', '.join(_SCENES)}")
    from . import domain as dom

    if name == "flat-scherk":
        c = _chart(Rectangle(-2.4, 2.4, -2.4, 2.4), "1", "1", name=name)
        s = math.pi / 2
        d = dom.square_domain(c, s, n_side=65)
        return c, d

    if name == "rotational-r3":
        c = _chart(Rectangle(0.0, 6.0, -4.0, 4.0), "1", "x", name=name)
        d = _catenary_quad(c)
        return c, d

    if name == "nil3":
        t = NIL3_TAU
        c = _chart(Rectangle(-2.0, 2.0, -2.0, 2.0), "1", "1", tau=repr(t),
                   a=f"-{t!r}*y", b=f"{t!r}*x", name=name)
        d = dom.square_domain(c, 0.5, n_side=65)
        return c, d

    if name == "h2xr":
        c = _chart(Disk(0.0, 0.0, 1.0), "2/(1-x^2-y^2)", "1", name=name)
        return c, None

    if name == "s2xr-cap":
        c = _chart(Disk(0.0, 0.0, 1.0), "2/(1+x^2+y^2)", "1", name=name)
        return c, None

    if name == "flat-cylinder":
        c = _chart(Rectangle(0.0, 2.0 * math.pi, -1.25, 1.25, periodic_x=True),
                   "1", "1", name=name)
        d = dom.strip_domain(c, y_top=1.0, y_bot=-1.0, n_side=129)
        return c, d

    raise AssertionError(name)


def _catenary_quad(c: SubmersionChart):
    """Canonical rotational-r3 tile: two catenaries (labeled +inf / -inf)
    joined by two horizontal geodesic segments carrying finite data 0."""
    from . import domain as dom
    from .mugeo import CurveSample

    # Both catenaries sit on the shallow branch of a*cosh(y0/a) (a above
    # the branch point ~0.8335*y0), so each arc is the shortest geodesic
    # between its endpoints and no 2-gon cut by an alternate chord can
    # violate the length conditions.
    a_out, a_in, y0 = 1.0, 0.55, 0.5
    # the stencil curvature defect of the sampled catenaries decays like
    # h^2; 1025 samples keep it near 3e-6, well under the 1e-5 gate
    n = 1025
    ns = 129
    ys = np.linspace(-y0, y0, n)

    def catenary(aa, ys_):
        return np.column_stack([aa * np.cosh(ys_ / aa), ys_])

    right = catenary(a_out, ys)           # x = cosh(y), traversed upward
    left = catenary(a_in, ys[::-1])       # traversed downward
    xs_bot = np.linspace(left[-1, 0], right[0, 0], ns)
    bottom = np.column_stack([xs_bot, np.full(ns, -y0)])
    xs_top = np.linspace(right[-1, 0], left[0, 0], ns)
    top = np.column_stack([xs_top, np.full(ns, y0)])

    arcs = [
        dom.BoundaryArc(CurveSample(bottom), dom.FINITE, parse_expr("0")),
        dom.BoundaryArc(CurveSample(right), dom.MINUS_INF),
        dom.BoundaryArc(CurveSample(top), dom.FINITE, parse_expr("0")),
        dom.BoundaryArc(CurveSample(left), dom.PLUS_INF),
    ]
    return dom.build_domain(c, [arcs], geo_tol=1e-5)
