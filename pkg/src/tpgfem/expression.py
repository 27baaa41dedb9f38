"""A small expression language for coefficients.

Grammar (loosest to tightest binding)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?          # right associative
    atom  := number | name | func "(" expr ")" | "(" expr ")"

Names are ``x``, ``eps`` and the constants ``pi`` and ``e``; functions are
``sin``, ``cos``, ``exp``, ``log`` and ``sqrt``.  Expressions are immutable
trees that evaluate on numpy arrays, differentiate symbolically and print
back to text that parses to the same tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Binary",
    "Call",
    "Expression",
    "ExpressionSyntaxError",
    "Name",
    "Neg",
    "Num",
    "derivative",
    "parse_expression",
    "simplify",
]

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
VARIABLES = ("x", "eps")
CONSTANTS = {"pi": math.pi, "e": math.e}

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


class ExpressionSyntaxError(ValueError):
    """Malformed expression text; ``position`` is a 0-based column."""

    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at column {position + 1}\n  {text}\n  {' ' * position}^")
        self.text = text
        self.position = position


# ---------------------------------------------------------------------------
# tree


class Expression:
    """Base class of expression nodes."""

    prec = _ATOM_PREC

    def __call__(self, x, eps: float = 0.0):
        return self.evaluate(x, eps)

    def evaluate(self, x, eps: float = 0.0):
        """Evaluate at ``x`` (scalar or array); result is broadcast to ``x``."""
        arr = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(self._eval(arr, float(eps)), dtype=float)
        return np.broadcast_to(out, arr.shape).copy() if out.shape != arr.shape else out

    def bind(self, eps: float) -> Callable:
        """Function of ``x`` alone with ``eps`` fixed."""
        return lambda x: self.evaluate(x, eps)

    def depends_on(self, name: str) -> bool:
        return name in self.names()

    def names(self) -> set:
        out: set = set()
        for child in self._children():
            out |= child.names()
        return out

    def _children(self):
        return ()

    def __str__(self) -> str:
        return to_text(self)

    # builder sugar, mostly for defining examples in code
    def __add__(self, other):
        return Binary("+", self, _wrap(other))

    def __radd__(self, other):
        return Binary("+", _wrap(other), self)

    def __sub__(self, other):
        return Binary("-", self, _wrap(other))

    def __rsub__(self, other):
        return Binary("-", _wrap(other), self)

    def __mul__(self, other):
        return Binary("*", self, _wrap(other))

    def __rmul__(self, other):
        return Binary("*", _wrap(other), self)

    def __truediv__(self, other):
        return Binary("/", self, _wrap(other))

    def __rtruediv__(self, other):
        return Binary("/", _wrap(other), self)

    def __pow__(self, other):
        return Binary("^", self, _wrap(other))

    def __neg__(self):
        return Neg(self)


def _wrap(v) -> Expression:
    if isinstance(v, Expression):
        return v
    v = float(v)
    return Neg(Num(-v)) if v < 0 else Num(v)


@dataclass(frozen=True, eq=True)
class Num(Expression):
    """Non-negative literal; negative values are ``Neg(Num(.))``."""

    value: float

    def __post_init__(self):
        if not (self.value >= 0.0 and math.isfinite(self.value)):
            raise ValueError(f"Num holds finite non-negative values, got {self.value!r}")

    def _eval(self, x, eps):
        return np.float64(self.value)


@dataclass(frozen=True, eq=True)
class Name(Expression):
    """Variable (``x``, ``eps``) or named constant (``pi``, ``e``)."""

    name: str

    def __post_init__(self):
        if self.name not in VARIABLES and self.name not in CONSTANTS:
            raise ValueError(f"unknown name {self.name!r}")

    def _eval(self, x, eps):
        if self.name == "x":
            return x
        if self.name == "eps":
            return np.float64(eps)
        return np.float64(CONSTANTS[self.name])

    def names(self) -> set:
        return {self.name}


@dataclass(frozen=True, eq=True)
class Neg(Expression):
    arg: Expression
    prec = _NEG_PREC

    def _eval(self, x, eps):
        return -self.arg._eval(x, eps)

    def _children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=True)
class Binary(Expression):
    op: str
    left: Expression
    right: Expression

    def __post_init__(self):
        if self.op not in _PREC:
            raise ValueError(f"unknown operator {self.op!r}")

    @property
    def prec(self):  # type: ignore[override]
        return _PREC[self.op]

    def _eval(self, x, eps):
        a = self.left._eval(x, eps)
        b = self.right._eval(x, eps)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return np.power(a, b)

    def _children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=True)
class Call(Expression):
    func: str
    arg: Expression

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f"unknown function {self.func!r}")

    def _eval(self, x, eps):
        return FUNCTIONS[self.func](self.arg._eval(x, eps))

    def _children(self):
        return (self.arg,)


X = Name("x")
EPS = Name("eps")


# ---------------------------------------------------------------------------
# printing


def _num_text(v: float) -> str:
    if v.is_integer() and v < 1e16:
        return str(int(v))
    return repr(v)


def to_text(node: Expression) -> str:
    """Text with the fewest parentheses that still parses back to ``node``."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        return "-" + (f"({inner})" if node.arg.prec < _NEG_PREC else inner)
    if isinstance(node, Binary):
        p = node.prec
        left = to_text(node.left)
        right = to_text(node.right)
        if node.op == "^":
            # base binds tighter than ^ and unary minus; exponent may be unary
            if node.left.prec <= p:
                left = f"({left})"
            if node.right.prec < _NEG_PREC:
                right = f"({right})"
            return f"{left}^{right}"
        if node.left.prec < p:
            left = f"({left})"
        if node.right.prec <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExpressionSyntaxError(message, self.text, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            self.fail(f"expected {value!r}" + (f", found {tok[1]!r}" if tok[1] else ""))
        return self.take()

    def parse(self) -> Expression:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.take()
            return Num(float(value))
        if kind == "name":
            self.take()
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value in VARIABLES or value in CONSTANTS:
                return Name(value)
            self.fail(f"unknown name {value!r}", tok)
        if (kind, value) == ("op", "("):
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of input")
        self.fail(f"unexpected {value!r}")


def parse_expression(text: str) -> Expression:
    """Parse ``text``; raises :class:`ExpressionSyntaxError` with a column."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression", str(text), 0)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# simplification and derivatives


def _is_num(node, value=None):
    return isinstance(node, Num) and (value is None or node.value == value)


def _signed(node):
    """(sign, magnitude) with Neg stripped."""
    if isinstance(node, Neg):
        s, m = _signed(node.arg)
        return -s, m
    return 1, node


def _const_value(node):
    s, m = _signed(node)
    return s * m.value if isinstance(m, Num) else None


def simplify(node: Expression) -> Expression:
    """Constant folding and the usual 0/1 identities, bottom up."""
    if isinstance(node, (Num, Name)):
        return node
    if isinstance(node, Neg):
        arg = simplify(node.arg)
        if isinstance(arg, Neg):
            return arg.arg
        if _is_num(arg, 0.0):
            return arg
        return Neg(arg)
    if isinstance(node, Call):
        return Call(node.func, simplify(node.arg))
    a = simplify(node.left)
    b = simplify(node.right)
    ca, cb = _const_value(a), _const_value(b)
    op = node.op
    if ca is not None and cb is not None and op != "^" and not (op == "/" and cb == 0.0):
        v = {"+": ca + cb, "-": ca - cb, "*": ca * cb, "/": ca / cb if cb else 0.0}[op]
        if math.isfinite(v) and (op != "/" or float(v).is_integer()):
            return _wrap(v)
    if op == "+":
        if ca == 0.0:
            return b
        if cb == 0.0:
            return a
        if isinstance(b, Neg):
            return simplify(Binary("-", a, b.arg))
    elif op == "-":
        if cb == 0.0:
            return a
        if ca == 0.0:
            return simplify(Neg(b))
        if isinstance(b, Neg):
            return simplify(Binary("+", a, b.arg))
    elif op == "*":
        if ca == 0.0 or cb == 0.0:
            return Num(0.0)
        if ca == 1.0:
            return b
        if cb == 1.0:
            return a
        sa, ma = _signed(a)
        sb, mb = _signed(b)
        if sa * sb < 0:
            return Neg(simplify(Binary("*", ma, mb)))
        if sa < 0:
            return simplify(Binary("*", ma, mb))
    elif op == "/":
        if ca == 0.0 and cb != 0.0:
            return Num(0.0)
        if cb == 1.0:
            return a
        sa, ma = _signed(a)
        sb, mb = _signed(b)
        if sa * sb < 0:
            return Neg(simplify(Binary("/", ma, mb)))
        if sa < 0:
            return simplify(Binary("/", ma, mb))
    elif op == "^":
        if cb == 0.0:
            return Num(1.0)
        if cb == 1.0:
            return a
    return Binary(op, a, b)


def _diff(node: Expression, var: str) -> Expression:
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Name):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return Neg(_diff(node.arg, var))
    if isinstance(node, Call):
        u = node.arg
        du = _diff(u, var)
        outer = {
            "sin": lambda: Call("cos", u),
            "cos": lambda: Neg(Call("sin", u)),
            "exp": lambda: node,
            "log": lambda: Binary("/", Num(1.0), u),
            "sqrt": lambda: Binary("/", Num(1.0), Binary("*", Num(2.0), node)),
        }[node.func]()
        return Binary("*", outer, du)
    a, b = node.left, node.right
    da, db = _diff(a, var), _diff(b, var)
    if node.op in "+-":
        return Binary(node.op, da, db)
    if node.op == "*":
        return Binary("+", Binary("*", da, b), Binary("*", a, db))
    if node.op == "/":
        if not b.depends_on(var):
            return Binary("/", da, b)
        return Binary("/", Binary("-", Binary("*", da, b), Binary("*", a, db)),
                      Binary("^", b, Num(2.0)))
    # power
    if not b.depends_on(var):
        expo = simplify(Binary("-", b, Num(1.0)))
        return Binary("*", Binary("*", b, Binary("^", a, expo)), da)
    # general case: d(a^b) = a^b (b' log a + b a'/a)
    return Binary("*", node, Binary("+", Binary("*", db, Call("log", a)),
                                    Binary("/", Binary("*", b, da), a)))


def derivative(node: Expression, var: str = "x") -> Expression:
    """Symbolic derivative, simplified."""
    if var not in VARIABLES:
        raise ValueError(f"can only differentiate with respect to {VARIABLES}")
    return simplify(_diff(node, var))

