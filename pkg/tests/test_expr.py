import numpy as np
import pytest

from jsgraph.expr import (DomainError, ParseError, diff_expr, eval_expr,
                          eval_expr_many, parse_expr, to_source)


def test_numbers_and_precedence():
    assert eval_expr(parse_expr("2 + 3*4"), 0.0, 0.0) == 14.0
    assert eval_expr(parse_expr("(2 + 3)*4"), 0.0, 0.0) == 20.0
    assert eval_expr(parse_expr("2^3^2"), 0.0, 0.0) == 512.0
    assert eval_expr(parse_expr("-x^2"), 3.0, 0.0) == -9.0
    assert eval_expr(parse_expr("6/3/2"), 0.0, 0.0) == 1.0


def test_variables_and_functions():
    e = parse_expr("sin(x)*cosh(y) + exp(-x*y)")
    x, y = 0.7, -0.3
    want = np.sin(x) * np.cosh(y) + np.exp(-x * y)
    assert eval_expr(e, x, y) == pytest.approx(want, rel=1e-15)


def test_eval_many_matches_scalar():
    e = parse_expr("atan(x - y) + sqrt(1 + x^2)")
    rng = np.random.default_rng(3)
    X = rng.uniform(-2, 2, 40)
    Y = rng.uniform(-2, 2, 40)
    V = eval_expr_many(e, X, Y)
    for k in range(len(X)):
        assert V[k] == pytest.approx(eval_expr(e, X[k], Y[k]), abs=1e-15)


def test_parse_errors_carry_position():
    with pytest.raises(ParseError):
        parse_expr("2 +")
    with pytest.raises(ParseError):
        parse_expr("sin(x")
    with pytest.raises(ParseError):
        parse_expr("bogus(x)")
    with pytest.raises(ParseError):
        parse_expr("x $ y")


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_expr(parse_expr("log(x)"), -1.0, 0.0)
    with pytest.raises(DomainError):
        eval_expr(parse_expr("sqrt(x)"), -4.0, 0.0)
    with pytest.raises(DomainError):
        eval_expr(parse_expr("1/x"), 0.0, 0.0)


def test_roundtrip_through_source():
    for src in ("sin(x)*2 - y/(1 + x^2)", "exp(x) + log(2 + cosh(y))"):
        e = parse_expr(src)
        e2 = parse_expr(to_source(e))
        for x, y in ((0.3, 0.4), (-1.1, 0.9)):
            assert eval_expr(e, x, y) == pytest.approx(eval_expr(e2, x, y),
                                                       rel=1e-15)


def _fd(e, x, y, var, h=1e-6):
    if var == "x":
        return (eval_expr(e, x + h, y) - eval_expr(e, x - h, y)) / (2 * h)
    return (eval_expr(e, x, y + h) - eval_expr(e, x, y - h)) / (2 * h)


def test_derivatives_match_finite_differences():
    cases = [
        "x^2*y + sin(x*y)",
        "exp(x - 2*y)",
        "log(2 + x^2 + y^2)",
        "sqrt(1 + sinh(x)^2) * tanh(y)",
        "atan(x/(2 + y^2))",
        "x^3 - 3*x*y^2",
    ]
    rng = np.random.default_rng(11)
    for src in cases:
        e = parse_expr(src)
        for var in ("x", "y"):
            de = diff_expr(e, var)
            for _ in range(5):
                x, y = rng.uniform(-1.2, 1.2, 2)
                got = eval_expr(de, x, y)
                want = _fd(e, x, y, var)
                assert got == pytest.approx(want, abs=2e-8 * (1 + abs(want)))


def test_second_derivatives_compose():
    e = parse_expr("sin(2*x)*cosh(y)")
    exy = diff_expr(diff_expr(e, "x"), "y")
    x, y = 0.4, -0.7
    want = 2 * np.cos(2 * x) * np.sinh(y)
    assert eval_expr(exy, x, y) == pytest.approx(want, rel=1e-12)
