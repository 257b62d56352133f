import numpy as np
import pytest

from jsgraph.chart import (ChartError, Disk, Rectangle, SubmersionChart,
                           builtin_scene, scene_info, scene_names,
                           validate_chart)
from jsgraph.expr import parse_expr

ALL_SCENES = ("flat-scherk", "rotational-r3", "nil3", "h2xr", "s2xr-cap",
              "flat-cylinder")


def test_scene_registry():
    assert tuple(scene_names()) == ALL_SCENES
    for name in ALL_SCENES:
        assert isinstance(scene_info(name), str) and scene_info(name)
    with pytest.raises(ChartError):
        builtin_scene("no-such-scene")


def test_all_scenes_compatible():
    for name in ALL_SCENES:
        c, _ = builtin_scene(name)
        rep = validate_chart(c)
        assert rep.max_defect < 1e-8, (name, rep.max_defect)
        assert rep.min_lam > 0.0
        assert rep.min_mu > 0.0


def test_field_evaluation_vectorized():
    c, _ = builtin_scene("h2xr")
    x = np.array([0.0, 0.3, -0.5])
    y = np.array([0.0, 0.1, 0.2])
    lam = c.ev("lam", x, y)
    want = 2.0 / (1.0 - x * x - y * y)
    assert np.allclose(lam, want, rtol=1e-14)
    assert c.ev("mu", x, y) == pytest.approx([1.0, 1.0, 1.0])


def test_derived_field_keys():
    c, _ = builtin_scene("s2xr-cap")
    x, y = 0.2, -0.4
    lam = c.ev("lam", x, y)
    r2 = x * x + y * y
    assert lam == pytest.approx(2.0 / (1.0 + r2), rel=1e-14)
    h = 1e-6
    fd = (c.ev("lam", x + h, y) - c.ev("lam", x - h, y)) / (2 * h)
    assert c.ev("lam_x", x, y) == pytest.approx(fd, abs=1e-8)
    assert c.ev("rho", x, y) == pytest.approx(lam * c.ev("mu", x, y))


def test_nil3_gauge_compatibility():
    c, _ = builtin_scene("nil3")
    assert c.ev("a", 0.3, 0.5) == pytest.approx(-0.25)
    assert c.ev("b", 0.3, 0.5) == pytest.approx(0.15)
    assert validate_chart(c).max_defect < 1e-12


def test_periodic_chart_wraps():
    c, _ = builtin_scene("flat-cylinder")
    assert c.periodic
    p = c.region.period
    x = np.array([0.1, 1.7])
    y = np.array([-0.2, 0.4])
    for key in ("lam", "mu", "a", "b"):
        assert np.allclose(c.ev(key, x, y), c.ev(key, x + p, y), atol=1e-14)


def test_rotational_chart_mu_is_x():
    c, _ = builtin_scene("rotational-r3")
    assert c.ev("mu", 0.7, 0.0) == pytest.approx(0.7)
    assert c.region.x0 >= 0.0 and c.region.x1 > 0.0


def test_custom_chart_and_incompatible_gauge():
    reg = Rectangle(-1.0, 1.0, -1.0, 1.0)
    ok = SubmersionChart(region=reg, lam=parse_expr("1"), mu=parse_expr("1"),
                         tau=parse_expr("0"), a=parse_expr("0"),
                         b=parse_expr("0"), name="flat")
    assert validate_chart(ok).max_defect == 0.0
    # tau = 1/2 with a zero connection violates the compatibility equation
    bad = SubmersionChart(region=reg, lam=parse_expr("1"), mu=parse_expr("1"),
                          tau=parse_expr("0.5"), a=parse_expr("0"),
                          b=parse_expr("0"), name="bad")
    assert validate_chart(bad).max_defect == pytest.approx(1.0)


def test_validate_rejects_broken_periodicity():
    reg = Rectangle(0.0, 2.0 * np.pi, -1.0, 1.0, periodic_x=True)
    c = SubmersionChart(region=reg, lam=parse_expr("1"),
                        mu=parse_expr("2 + sin(x/2)"), tau=parse_expr("0"),
                        a=parse_expr("0"), b=parse_expr("0"), name="halfsin")
    with pytest.raises(ChartError):
        validate_chart(c)


def test_region_membership():
    r = Rectangle(0.0, 2.0, -1.0, 1.0)
    assert r.contains(1.0, 0.0)
    assert not r.contains(3.0, 0.0)
    d = Disk(0.0, 0.0, 1.0)
    assert d.contains(0.5, 0.5)
    assert not d.contains(0.9, 0.9)
