import numpy as np
import pytest

from jsgraph.chart import builtin_scene
from jsgraph.domain import (BoundaryArc, DomainBuildError, FINITE, MINUS_INF,
                            PLUS_INF, build_domain, check_admissibility,
                            check_js_conditions, points_in_polygon,
                            polyline_hausdorff, rectangle_domain,
                            square_domain, strip_domain)
from jsgraph.mugeo import CurveSample


def _seg(p, q, n=65):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return np.asarray(p) + t * (np.asarray(q) - np.asarray(p))


def _flat():
    return builtin_scene("flat-scherk")[0]


# ---------------------------------------------------------- building

def test_square_domain_structure():
    d = square_domain(_flat(), 0.5)
    assert d.kind == "disk"
    assert len(d.loops) == 1
    assert len(d.arcs()) == 4
    assert len(d.corners(0)) == 4
    assert d.diameter == pytest.approx(np.sqrt(2.0))
    x0, x1, y0, y1 = d.bbox()
    assert (x0, x1, y0, y1) == pytest.approx((-0.5, 0.5, -0.5, 0.5))
    px, py = d.interior_point()
    assert d.contains(px, py)
    assert d.contains(0.0, 0.0) and not d.contains(0.7, 0.0)


def test_corner_table_links_arcs():
    d = square_domain(_flat(), 0.5)
    table = d.corner_table()
    assert len(table) == 4
    for j, row in enumerate(table):
        assert row["arc_out"] == j
        assert row["arc_in"] == (j - 1) % 4
    pts = {tuple(np.round(r["point"], 12)) for r in table}
    assert (0.5, 0.5) in pts and (-0.5, -0.5) in pts


def test_open_chain_must_close():
    c = _flat()
    arcs = [
        BoundaryArc(CurveSample(_seg((0, 0), (1, 0))), PLUS_INF),
        BoundaryArc(CurveSample(_seg((1, 0), (1, 1))), FINITE, value="0"),
        # gap: next arc starts away from (1, 1)
        BoundaryArc(CurveSample(_seg((0, 1), (0, 0))), FINITE, value="0"),
    ]
    with pytest.raises(DomainBuildError):
        build_domain(c, [arcs])


def test_infinite_arc_must_be_geodesic():
    c = _flat()
    th = np.linspace(0.0, np.pi / 2, 65)
    bow = np.column_stack([np.cos(th), np.sin(th)])
    arcs = [
        BoundaryArc(CurveSample(_seg((0, 0), (1, 0))), FINITE, value="0"),
        BoundaryArc(CurveSample(bow), PLUS_INF),
        BoundaryArc(CurveSample(_seg((0, 1), (0, 0))), FINITE, value="0"),
    ]
    with pytest.raises(DomainBuildError):
        build_domain(c, [arcs])


def test_finite_arc_needs_value():
    c = _flat()
    with pytest.raises(DomainBuildError):
        build_domain(c, [[
            BoundaryArc(CurveSample(_seg((0, 0), (1, 0))), FINITE),
            BoundaryArc(CurveSample(_seg((1, 0), (0, 1))), FINITE, value="0"),
            BoundaryArc(CurveSample(_seg((0, 1), (0, 0))), FINITE, value="0"),
        ]])


# ------------------------------------------------------ admissibility

def test_scherk_square_admissible():
    _, d = builtin_scene("flat-scherk")
    rep = check_admissibility(d)
    assert rep.admissible
    assert rep.failures == []
    assert rep.corner_angles == pytest.approx([np.pi / 2] * 4)


def test_adjacent_infinite_arcs_rejected():
    c = _flat()
    d = square_domain(c, 0.5, labels=(PLUS_INF, PLUS_INF, MINUS_INF, FINITE),
                      values=(None, None, None, "0"))
    rep = check_admissibility(d)
    assert not rep.admissible
    assert any("plus_inf" in f and "corner" in f for f in rep.failures)
    assert rep.witness == pytest.approx((0.5, -0.5))


def test_concave_finite_arc_rejected():
    # finite boundary bulging into the domain is not mu-convex
    c = _flat()
    th = np.linspace(np.pi, 0.0, 129)
    dent = np.column_stack([0.5 * np.cos(th), -1.0 + 0.35 * np.sin(th)])
    arcs = [
        BoundaryArc(CurveSample(_seg((-1.0, -1.0), (-0.5, -1.0))), FINITE,
                    value="0"),
        BoundaryArc(CurveSample(dent), FINITE, value="0"),
        BoundaryArc(CurveSample(_seg((0.5, -1.0), (1.0, -1.0))), FINITE,
                    value="0"),
        BoundaryArc(CurveSample(_seg((1.0, -1.0), (1.0, 1.0))), PLUS_INF),
        BoundaryArc(CurveSample(_seg((1.0, 1.0), (-1.0, 1.0))), FINITE,
                    value="1"),
        BoundaryArc(CurveSample(_seg((-1.0, 1.0), (-1.0, -1.0))), MINUS_INF),
    ]
    with pytest.raises(DomainBuildError, match="not mu-convex"):
        build_domain(c, [arcs])


# -------------------------------------------------------- JS decision

def test_scherk_square_solvable_with_five_polygons():
    _, d = builtin_scene("flat-scherk")
    js = check_js_conditions(d)
    assert js.solvable and js.conclusive
    assert js.decision == "solvable"
    assert len(js.polygons) == 5
    full = [p for p in js.polygons if p.is_full_boundary]
    assert len(full) == 1
    side = np.pi
    assert full[0].alpha == pytest.approx(2 * side, rel=1e-9)
    assert full[0].beta == pytest.approx(2 * side, rel=1e-9)
    assert full[0].gamma == pytest.approx(4 * side, rel=1e-9)
    tris = [p for p in js.polygons if not p.is_full_boundary]
    assert len(tris) == 4
    for p in tris:
        assert p.alpha == pytest.approx(side, rel=1e-6)
        assert p.beta == pytest.approx(side, rel=1e-6)
        assert p.gamma == pytest.approx(2 * side + side * np.sqrt(2), rel=1e-4)
        assert p.status == "ok"


def test_rectangle_solvable_iff_thinner_than_tall():
    c = _flat()
    lab = (PLUS_INF, FINITE, PLUS_INF, FINITE)
    val = (None, "0", None, "0")
    for a, b, want in ((1.0, 2.0, True), (1.2, 1.3, True),
                       (2.0, 1.0, False), (1.0, 1.0, False)):
        d = rectangle_domain(c, a / 2, b / 2, labels=lab, values=val)
        js = check_js_conditions(d)
        assert js.solvable is want, (a, b)
    # the square case fails through an exact marginal equality
    d = rectangle_domain(c, 0.5, 0.5, labels=lab, values=val)
    js = check_js_conditions(d)
    assert len(js.marginal) >= 1


def test_cylinder_unsolvable_with_closed_geodesic_witness():
    _, d = builtin_scene("flat-cylinder")
    assert d.kind == "annulus"
    js = check_js_conditions(d)
    assert not js.solvable
    assert js.decision == "unsolvable"
    assert len(js.polygons) == 3
    assert len(js.violations) == 2
    for p in js.violations:
        kinds = {e[0] for e in p.edges}
        assert "geodesic" in kinds
        assert not p.is_full_boundary


def test_catenary_quadrilateral_scene():
    _, d = builtin_scene("rotational-r3")
    adm = check_admissibility(d)
    assert adm.admissible, adm.failures
    js = check_js_conditions(d)
    assert js.solvable
    assert len(js.polygons) == 5
    full = [p for p in js.polygons if p.is_full_boundary][0]
    assert full.alpha == pytest.approx(0.7286, abs=2e-4)
    assert full.beta == pytest.approx(1.0876, abs=2e-4)
    assert full.gamma == pytest.approx(2.4583, abs=2e-4)


def test_pure_infinite_boundary_uses_equality_rule():
    # alternating square: alpha(dOmega) = beta(dOmega), strict test inside
    _, d = builtin_scene("nil3")
    js = check_js_conditions(d)
    assert js.solvable
    assert js.boundary_equality_gap <= 1e-9


def test_strip_domain_matches_builtin_cylinder():
    c, d0 = builtin_scene("flat-cylinder")
    d = strip_domain(c, 0.7, -0.7)
    js = check_js_conditions(d)
    assert js.decision == check_js_conditions(d0).decision == "unsolvable"


# ----------------------------------------------------------- helpers

def test_points_in_polygon():
    poly = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]])
    px = np.array([1.0, 3.0, 1.0])
    py = np.array([0.5, 0.5, -0.2])
    inside = points_in_polygon(px, py, poly)
    assert inside.tolist() == [True, False, False]


def test_polyline_hausdorff_basic():
    a = _seg((0, 0), (1, 0), n=33)
    b = _seg((0, 0.01), (1, 0.01), n=7)
    assert polyline_hausdorff(a, b) == pytest.approx(0.01, abs=1e-12)
    assert polyline_hausdorff(a, a) == 0.0
