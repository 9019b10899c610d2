"""Expression language over named chart coordinates.

Grammar (infix, ``^`` binds tightest, then unary minus, then ``* /``,
then ``+ -``; ``^`` is right associative)::

    expr    = term { ("+" | "-") term }
    term    = factor { ("*" | "/") factor }
    factor  = "-" factor | power
    power   = atom [ "^" factor ]
    atom    = NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

Built-in functions: ``sin cos exp log sqrt tanh``.  Identifiers that are
not function names are coordinate references, resolved against a
:class:`Chart` at evaluation time.

Evaluation produces second-order jets (:class:`~hfreemaps.jet.Jet2`)
with exact propagation rules; there is no numerical differencing
anywhere in this module.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownCoordinate, UnknownFunction
from .jet import Jet2, jcos, jexp, jlog, jpow, jsin, jsqrt, jtanh

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")


class Expr:
    """Base class of expression nodes.

    Nodes are immutable; the operators build new trees, coercing plain
    numbers to literals, which makes symbolic assembly of products,
    sums and compositions convenient.
    """

    __slots__ = ()

    def __add__(self, other):
        return Bin("+", self, as_expr(other))

    def __radd__(self, other):
        return Bin("+", as_expr(other), self)

    def __sub__(self, other):
        return Bin("-", self, as_expr(other))

    def __rsub__(self, other):
        return Bin("-", as_expr(other), self)

    def __mul__(self, other):
        return Bin("*", self, as_expr(other))

    def __rmul__(self, other):
        return Bin("*", as_expr(other), self)

    def __truediv__(self, other):
        return Bin("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return Bin("/", as_expr(other), self)

    def __pow__(self, other):
        return Bin("^", self, as_expr(other))

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Coord(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)):
        return Num(float(x))
    raise TypeError(f"cannot interpret {x!r} as an expression")


@dataclass(frozen=True)
class Chart:
    """Local coordinate system: an ordered tuple of distinct names."""

    coords: tuple[str, ...]

    def __post_init__(self):
        if isinstance(self.coords, list):
            object.__setattr__(self, "coords", tuple(self.coords))
        if len(self.coords) < 1:
            raise ValueError("chart needs at least one coordinate")
        if len(set(self.coords)) != len(self.coords):
            raise ValueError("chart coordinate names must be distinct")
        for name in self.coords:
            if not _IDENT_RE.match(name):
                raise ValueError(f"invalid coordinate name {name!r}")
            if name in FUNCTIONS:
                raise ValueError(f"{name!r} is a reserved function name")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, name: str) -> int:
        try:
            return self.coords.index(name)
        except ValueError:
            raise UnknownCoordinate(name) from None


# ---------------------------------------------------------------------------
# parsing


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            offset = len(text) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {text[offset]!r}", offset)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected: tuple[str, ...]):
        kind, value, offset = self.peek()
        what = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {what}", offset, expected)

    def expect_op(self, op: str):
        kind, value, _ = self.peek()
        if kind == "op" and value == op:
            return self.advance()
        self.fail((f'"{op}"',))

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(("operator", "end of input"))
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                e = Bin(value, e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                e = Bin(value, e, self.factor())
            else:
                return e

    def factor(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            return Bin("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, value, offset = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(value))
        if kind == "ident":
            self.advance()
            nkind, nvalue, _ = self.peek()
            if nkind == "op" and nvalue == "(":
                if value not in FUNCTIONS:
                    raise UnknownFunction(value, offset)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            if value in FUNCTIONS:
                raise ExprSyntaxError(
                    f"function {value!r} used without arguments", offset, ('"("',))
            return Coord(value)
        if kind == "op" and value == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        self.fail(("number", "identifier", '"("'))


def parse(text: str) -> Expr:
    """Parse expression text into an :class:`Expr` tree."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# rendering

# Context precedences: 1 additive, 2 multiplicative, 3 unary minus, 4 power.
# Right operands of -, / and left operands of ^ are parenthesized at equal
# precedence so the reparsed tree evaluates bit-identically.


def render(e: Expr) -> str:
    """Render with minimal parentheses; ``parse(render(e))`` evaluates like ``e``."""
    return _render(e, 0)


def _render(e: Expr, ctx: int) -> str:
    if isinstance(e, Num):
        v = e.value
        text = repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        # a negative literal binds like unary minus once re-parsed
        return f"({text})" if v < 0 and ctx > 3 else text
    if isinstance(e, Coord):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({_render(e.arg, 0)})"
    if isinstance(e, Neg):
        inner = "-" + _render(e.arg, 3)
        return f"({inner})" if ctx > 3 else inner
    if isinstance(e, Bin):
        if e.op in "+-":
            prec = 1
            text = _render(e.left, prec) + e.op + _render(e.right, prec + 1)
        elif e.op in "*/":
            prec = 2
            text = _render(e.left, prec) + e.op + _render(e.right, prec + 1)
        else:  # ^ is right associative and its base must be an atom
            prec = 4
            text = _render(e.left, prec + 1) + e.op + _render(e.right, 3)
        return f"({text})" if ctx > prec else text
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation


def coordinates(e: Expr) -> set[str]:
    """Names of all coordinates referenced by ``e``."""
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Coord):
            out.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, Call):
            stack.append(node.arg)
        elif isinstance(node, Bin):
            stack.append(node.left)
            stack.append(node.right)
    return out


_UNARY = {"sin": jsin, "cos": jcos, "exp": jexp, "log": jlog,
          "sqrt": jsqrt, "tanh": jtanh}


def _constant_exponent(e: Expr) -> float | None:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg) and isinstance(e.arg, Num):
        return -e.arg.value
    return None


def _eval(e: Expr, chart: Chart, pts: np.ndarray) -> Jet2:
    m = chart.dim
    batch = pts.shape[:-1]
    if isinstance(e, Num):
        return Jet2.constant(e.value, m, batch)
    if isinstance(e, Coord):
        return Jet2.coordinate(pts[..., chart.index(e.name)], chart.index(e.name), m)
    if isinstance(e, Neg):
        return -_eval(e.arg, chart, pts)
    if isinstance(e, Call):
        return _UNARY[e.func](_eval(e.arg, chart, pts))
    if isinstance(e, Bin):
        if e.op == "^":
            c = _constant_exponent(e.right)
            base = _eval(e.left, chart, pts)
            if c is not None:
                if float(c).is_integer():
                    return base.powi(int(c))
                return base.powf(c)
            return jpow(base, _eval(e.right, chart, pts))
        left = _eval(e.left, chart, pts)
        right = _eval(e.right, chart, pts)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        return left / right
    raise TypeError(f"not an expression node: {e!r}")


def eval_jet2(e: Expr, chart: Chart, p) -> Jet2:
    """Exact second-order jet of ``e`` at a single point ``p``."""
    pts = np.asarray(p, dtype=float)
    if pts.shape != (chart.dim,):
        raise ValueError(f"point must have {chart.dim} entries, got shape {pts.shape}")
    return _eval(e, chart, pts)


def eval_jet2_many(e: Expr, chart: Chart, points) -> Jet2:
    """Batched jets: ``points (B, m)`` gives value ``(B,)``, gradient
    ``(B, m)``, Hessian ``(B, m, m)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != chart.dim:
        raise ValueError(f"points must have shape (B, {chart.dim})")
    return _eval(e, chart, pts)


def eval_value(e: Expr, chart: Chart, p) -> float:
    return float(eval_jet2(e, chart, p).value)


def _eval_values(e: Expr, chart: Chart, pts: np.ndarray) -> np.ndarray:
    if isinstance(e, Num):
        return np.full(pts.shape[:-1], e.value)
    if isinstance(e, Coord):
        return pts[..., chart.index(e.name)]
    if isinstance(e, Neg):
        return -_eval_values(e.arg, chart, pts)
    if isinstance(e, Call):
        v = _eval_values(e.arg, chart, pts)
        if e.func == "log":
            if np.any(v <= 0.0):
                raise DomainError("log of a non-positive argument")
            return np.log(v)
        if e.func == "sqrt":
            if np.any(v < 0.0):
                raise DomainError("sqrt of a negative argument")
            return np.sqrt(v)
        return getattr(np, e.func)(v)
    if isinstance(e, Bin):
        if e.op == "^":
            c = _constant_exponent(e.right)
            base = _eval_values(e.left, chart, pts)
            if c is not None and float(c).is_integer():
                if c < 0 and np.any(base == 0.0):
                    raise DomainError("zero raised to a negative power")
                with np.errstate(divide="ignore"):
                    return base ** int(c)
            if np.any(base <= 0.0):
                raise DomainError("non-integer power of a non-positive base")
            if c is not None:
                return base ** c
            return base ** _eval_values(e.right, chart, pts)
        left = _eval_values(e.left, chart, pts)
        right = _eval_values(e.right, chart, pts)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if np.any(right == 0.0):
            raise DomainError("division by zero")
        return left / right
    raise TypeError(f"not an expression node: {e!r}")


def eval_value_many(e: Expr, chart: Chart, points) -> np.ndarray:
    """Values only, skipping jet propagation; ``points (B, m) -> (B,)``."""
    pts = np.asarray(points, dtype=float)
    return _eval_values(e, chart, pts)


# ---------------------------------------------------------------------------
# structural transforms


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace coordinate references by expressions (simultaneous)."""
    if isinstance(e, Num):
        return e
    if isinstance(e, Coord):
        return mapping.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    if isinstance(e, Bin):
        return Bin(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    raise TypeError(f"not an expression node: {e!r}")


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 1.0


def fold_add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Bin("+", a, b)


def fold_sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is_zero(a):
        return Neg(b)
    return Bin("-", a, b)


def fold_mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Num(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def derivative(e: Expr, name: str) -> Expr:
    """Exact partial derivative as a new tree.

    Support routine for assembling symbolic Lie derivatives, predicted
    determinants and Hamiltonian frames; it is not part of the surface
    expression grammar.
    """
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Coord):
        return Num(1.0 if e.name == name else 0.0)
    if isinstance(e, Neg):
        d = derivative(e.arg, name)
        return Num(0.0) if _is_zero(d) else Neg(d)
    if isinstance(e, Call):
        inner = derivative(e.arg, name)
        if _is_zero(inner):
            return Num(0.0)
        a = e.arg
        if e.func == "sin":
            outer: Expr = Call("cos", a)
        elif e.func == "cos":
            outer = Neg(Call("sin", a))
        elif e.func == "exp":
            outer = Call("exp", a)
        elif e.func == "log":
            return Bin("/", inner, a)
        elif e.func == "sqrt":
            return Bin("/", inner, fold_mul(Num(2.0), Call("sqrt", a)))
        else:  # tanh
            outer = fold_sub(Num(1.0), Bin("^", Call("tanh", a), Num(2.0)))
        return fold_mul(outer, inner)
    if isinstance(e, Bin):
        da = derivative(e.left, name)
        db = derivative(e.right, name)
        if e.op == "+":
            return fold_add(da, db)
        if e.op == "-":
            return fold_sub(da, db)
        if e.op == "*":
            return fold_add(fold_mul(da, e.right), fold_mul(e.left, db))
        if e.op == "/":
            num = fold_sub(fold_mul(da, e.right), fold_mul(e.left, db))
            if _is_zero(num):
                return Num(0.0)
            return Bin("/", num, fold_mul(e.right, e.right))
        # power: constant exponent uses the monomial rule, otherwise
        # differentiate exp(b log a)
        c = _constant_exponent(e.right)
        if c is not None and _is_zero(db):
            if c == 0.0:
                return Num(0.0)
            rest = fold_mul(Num(c), Bin("^", e.left, Num(c - 1.0)))
            return fold_mul(rest, da)
        log_term = fold_mul(db, Call("log", e.left))
        ratio = Bin("/", fold_mul(e.right, da), e.left) if not _is_zero(da) else Num(0.0)
        return fold_mul(e, fold_add(log_term, ratio))
    raise TypeError(f"not an expression node: {e!r}")
