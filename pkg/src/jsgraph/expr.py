"""Tiny expression language for chart fields and boundary data.

The metric fields lambda, mu, tau, a, b and finite boundary data are
authored as strings in a small grammar. This module parses them into
immutable ASTs, evaluates them (scalar or numpy-vectorized) and takes
exact symbolic derivatives. Downstream code leans on diff_expr for the
compatibility defect (lambda*b)_x - (lambda*a)_y - 2*tau*lambda^2/mu and
for the conformal-factor derivatives in the geodesic ODE.

Grammar (EBNF, exact):

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := ["-"] power
    power  := atom ["^" factor]
    atom   := number | ident | ident "(" expr ")" | "(" expr ")"

"^" binds tightest and is right-associative, then unary minus, then
"*" "/", then "+" "-". Numbers are decimal with an optional exponent.
Known identifiers: the variables x, y and the functions listed in
FUNCTIONS. Anything else is rejected at parse time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Num", "Var", "Call", "BinOp", "Expr",
    "ParseError", "DomainError",
    "parse_expr", "eval_expr", "eval_expr_many", "diff_expr", "to_source",
    "compile_expr", "FUNCTIONS",
]


class ParseError(ValueError):
    """Syntax or name error; .offset is the byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class DomainError(ArithmeticError):
    """Evaluation left the function's natural domain; .where names the subexpression."""

    def __init__(self, message: str, where: str):
        super().__init__(f"{message} in '{where}'")
        self.where = where


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "x" or "y"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Call, BinOp]

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "atan": np.arctan,
    "neg": np.negative,
}

VARIABLES = ("x", "y")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN.match(source, pos)
        if m is None:
            j = pos
            while j < n and source[j].isspace():
                j += 1
            if j >= n:
                break
            raise ParseError(f"unexpected character {source[j]!r}", j)
        kind = m.lastgroup
        text = m.group(kind)
        tokens.append((kind, text, m.end() - len(text)))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, off = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", off)
        return self.next()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {text!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.next()
                e = BinOp(text, e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.next()
                e = BinOp(text, e, self.factor())
            else:
                return e

    def factor(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.next()
            return Call("neg", self.power())
        return self.power()

    def power(self) -> Expr:
        e = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.next()
            return BinOp("^", e, self.factor())  # right-associative
        return e

    def atom(self) -> Expr:
        kind, text, off = self.next()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", off)
                self.next()
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            if text in VARIABLES:
                return Var(text)
            raise ParseError(f"unknown identifier {text!r}", off)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", off)


def parse_expr(source: str) -> Expr:
    """Parse a field expression; raises ParseError with a byte offset."""
    if not source or source.strip() == "":
        raise ParseError("empty expression", 0)
    return _Parser(source).parse()


def _eval(e: Expr, x, y):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else y
    if isinstance(e, BinOp):
        l = _eval(e.left, x, y)
        r = _eval(e.right, x, y)
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if e.op == "/":
            if np.any(r == 0):
                raise DomainError("division by zero", to_source(e))
            return l / r
        # power: reject the cases where IEEE pow would give nan
        li = np.asarray(l)
        ri = np.asarray(r)
        frac = ri != np.floor(ri)
        if np.any((li < 0) & frac):
            raise DomainError("negative base with non-integer exponent", to_source(e))
        if np.any((li == 0) & (ri < 0)):
            raise DomainError("zero base with negative exponent", to_source(e))
        return np.power(l, r)
    fn = e.func
    u = _eval(e.arg, x, y)
    if fn == "log" and np.any(u <= 0):
        raise DomainError("log of non-positive value", to_source(e))
    if fn == "sqrt" and np.any(u < 0):
        raise DomainError("sqrt of negative value", to_source(e))
    return FUNCTIONS[fn](u)


def eval_expr(e: Expr, x: float, y: float) -> float:
    """Evaluate at a single point. Raises DomainError off the natural domain."""
    with np.errstate(all="ignore"):
        v = _eval(e, float(x), float(y))
    v = float(v)
    if not np.isfinite(v):
        raise DomainError("non-finite value (overflow?)", to_source(e))
    return v


def eval_expr_many(e: Expr, x, y) -> np.ndarray:
    """Vectorized evaluation on numpy arrays (broadcast like x + y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(all="ignore"):
        v = np.broadcast_to(np.asarray(_eval(e, x, y), dtype=float),
                            np.broadcast(x, y).shape).copy()
    if not np.all(np.isfinite(v)):
        raise DomainError("non-finite value (overflow?)", to_source(e))
    return v


# -- symbolic differentiation ------------------------------------------------
# Smart constructors fold the zeros and ones that the chain rule churns out,
# so derivative trees stay small. Literal folding is plain IEEE arithmetic.

def _is_num(e: Expr, v=None) -> bool:
    return isinstance(e, Num) and (v is None or e.value == v)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is_num(a, 0.0):
        return Call("neg", b)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _pow(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    return BinOp("^", a, b)


def diff_expr(e: Expr, var: str) -> Expr:
    """Exact symbolic derivative with respect to 'x' or 'y'."""
    if var not in VARIABLES:
        raise ValueError(f"var must be one of {VARIABLES}, got {var!r}")
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0 if e.name == var else 0.0)
    if isinstance(e, BinOp):
        dl = diff_expr(e.left, var)
        dr = diff_expr(e.right, var)
        if e.op == "+":
            return _add(dl, dr)
        if e.op == "-":
            return _sub(dl, dr)
        if e.op == "*":
            return _add(_mul(dl, e.right), _mul(e.left, dr))
        if e.op == "/":
            num = _sub(_mul(dl, e.right), _mul(e.left, dr))
            return _div(num, _mul(e.right, e.right))
        # power
        if isinstance(e.right, Num):
            n = e.right.value
            return _mul(_mul(Num(n), _pow(e.left, Num(n - 1.0))), dl)
        # general u^v = exp(v log u); valid where u > 0
        term = _add(_mul(dr, Call("log", e.left)),
                    _mul(e.right, _div(dl, e.left)))
        return _mul(e, term)
    du = diff_expr(e.arg, var)
    u = e.arg
    fn = e.func
    if fn == "sin":
        return _mul(Call("cos", u), du)
    if fn == "cos":
        return _mul(Call("neg", Call("sin", u)), du)
    if fn == "sinh":
        return _mul(Call("cosh", u), du)
    if fn == "cosh":
        return _mul(Call("sinh", u), du)
    if fn == "tanh":
        return _mul(_sub(Num(1.0), _pow(Call("tanh", u), Num(2.0))), du)
    if fn == "exp":
        return _mul(Call("exp", u), du)
    if fn == "log":
        return _div(du, u)
    if fn == "sqrt":
        return _div(du, _mul(Num(2.0), Call("sqrt", u)))
    if fn == "atan":
        return _div(du, _add(Num(1.0), _pow(u, Num(2.0))))
    if fn == "neg":
        return Call("neg", du) if not _is_num(du, 0.0) else Num(0.0)
    raise ValueError(f"unknown function {fn!r}")  # unreachable on parsed trees


# -- compilation -------------------------------------------------------------
# Geodesic integration evaluates rho and its partials thousands of times at
# scalar points; a tree walk per call is too slow. We emit plain Python from
# the AST (fully parenthesized, whitelisted names only) and eval it once.

def _py_src(e: Expr, ns: str) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        if e.func == "neg":
            return f"(-{_py_src(e.arg, ns)})"
        fname = "arctan" if (ns == "np" and e.func == "atan") else e.func
        return f"{ns}.{fname}({_py_src(e.arg, ns)})"
    op = "**" if e.op == "^" else e.op
    return f"({_py_src(e.left, ns)}{op}{_py_src(e.right, ns)})"


def compile_expr(e: Expr, vectorized: bool = False):
    """Compile to a callable f(x, y). Domain faults surface as the usual
    math/ValueError exceptions (scalar) or non-finite values (vectorized)."""
    ns = "np" if vectorized else "math"
    src = f"lambda x, y: {_py_src(e, ns)}"
    env = {"__builtins__": {}, "math": math, "np": np}
    return eval(compile(src, "<expr>", "eval"), env)


# -- printing ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_PREC = 3  # between */ and ^


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Call) and e.func == "neg":
        return _UNARY_PREC
    return 5


def to_source(e: Expr) -> str:
    """Print with minimal parentheses; parse(to_source(e)) rebuilds the tree."""
    if isinstance(e, Num):
        if e.value < 0 or (e.value == 0 and np.signbit(e.value)):
            return "-" + repr(-e.value)
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        if e.func == "neg":
            inner = to_source(e.arg)
            if _prec(e.arg) <= _UNARY_PREC:
                inner = "(" + inner + ")"
            return "-" + inner
        return f"{e.func}({to_source(e.arg)})"
    p = _PREC[e.op]
    ls = to_source(e.left)
    rs = to_source(e.right)
    if e.op == "^":
        # right-associative: parenthesize a left child of equal or lower precedence
        if _prec(e.left) <= p:
            ls = "(" + ls + ")"
        if _prec(e.right) < _UNARY_PREC:
            rs = "(" + rs + ")"
    else:
        if _prec(e.left) < p:
            ls = "(" + ls + ")"
        if _prec(e.right) <= p:
            rs = "(" + rs + ")"
    return f"{ls} {e.op} {rs}" if e.op in "+-" else f"{ls}{e.op}{rs}"
