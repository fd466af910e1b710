"""Expression language for scalar functions and vector field components.

Grammar::

    expr    := expr ('+' | '-') expr
             | expr ('*' | '/') expr
             | expr '^' expr                  (right associative)
             | '-' expr                       (applies to the following product)
             | NAME '(' expr ')'              NAME in exp, ln, abs, sqrt, sin, cos
             | 'x' INDEX | NUMBER | '(' expr ')'

Variables are 1-based: ``x1``, ``x2``, ... up to the declared arity.
Prefix minus takes the whole multiplicative term to its right, so
``-1/x1^2`` is ``-(1/(x1^2))`` and ``-x1^2`` is ``-(x1^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

from .errors import ArityError, DomainError, ExprSyntaxError

FUNCTIONS = ("exp", "ln", "abs", "sqrt", "sin", "cos")
ORIGIN_RADIUS = 1e-12


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


Node = Union[Const, Var, Binary, Neg, Call]

ZERO = Const(0.0)
ONE = Const(1.0)


def Add(a, b):
    return Binary("+", a, b)


def Sub(a, b):
    return Binary("-", a, b)


def Mul(a, b):
    return Binary("*", a, b)


def Div(a, b):
    return Binary("/", a, b)


def Pow(a, b):
    return Binary("^", a, b)


def variables(node: Node) -> set:
    """Indices of every variable occurring in ``node``."""
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    return variables(node.arg)


def is_constant(node: Node) -> bool:
    return not variables(node)


# ---------------------------------------------------------------------------
# Tokenizer and Pratt parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)

_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_ADD_BP = 10


@dataclass(frozen=True)
class _Token:
    kind: str  # number, var, func, op, end
    text: str
    offset: int  # byte offset into the source


def _tokenize(text: str, arity: int):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        offset = len(text[:pos].encode("utf-8"))
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", offset,
                                  "number, variable, function or operator", text)
        kind = m.lastgroup
        lexeme = m.group()
        pos = m.end()
        if kind == "ws":
            continue
        if kind == "name":
            if lexeme in FUNCTIONS:
                kind = "func"
            elif re.fullmatch(r"x\d+", lexeme):
                index = int(lexeme[1:])
                if not 1 <= index <= arity:
                    raise ArityError(
                        f"variable {lexeme} at offset {offset} outside x1..x{arity}")
                kind = "var"
            else:
                raise ExprSyntaxError(f"unknown name {lexeme!r}", offset,
                                      "x1..xn or one of " + ", ".join(FUNCTIONS), text)
        tokens.append(_Token(kind, lexeme, offset))
    tokens.append(_Token("end", "", len(text.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, text: str, arity: int):
        self.text = text
        self.tokens = _tokenize(text, arity)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, tok: _Token, message: str, expected: str):
        raise ExprSyntaxError(message, tok.offset, expected, self.text)

    def expect(self, lexeme: str):
        tok = self.advance()
        if tok.text != lexeme or tok.kind != "op":
            found = tok.text or "end of input"
            self.fail(tok, f"unexpected {found!r}", repr(lexeme))

    def lbp(self, tok: _Token) -> int:
        if tok.kind == "op":
            return _LBP.get(tok.text, 0)
        return 0

    def expression(self, rbp: int = 0) -> Node:
        left = self.nud(self.advance(), rbp)
        while rbp < self.lbp(self.peek()):
            tok = self.advance()
            left = self.led(tok, left)
        return left

    def nud(self, tok: _Token, rbp: int) -> Node:
        if tok.kind == "number":
            return Const(float(tok.text))
        if tok.kind == "var":
            return Var(int(tok.text[1:]))
        if tok.kind == "func":
            self.expect("(")
            arg = self.expression()
            self.expect(")")
            return Call(tok.text, arg)
        if tok.kind == "op":
            if tok.text == "(":
                inner = self.expression()
                self.expect(")")
                return inner
            if tok.text == "-":
                return Neg(self.expression(max(rbp, _ADD_BP)))
            if tok.text == "+":
                return self.expression(max(rbp, _ADD_BP))
        found = tok.text or "end of input"
        self.fail(tok, f"unexpected {found!r}", "operand")

    def led(self, tok: _Token, left: Node) -> Node:
        bp = _LBP[tok.text]
        if tok.text == "^":
            return Binary("^", left, self.expression(bp - 1))
        return Binary(tok.text, left, self.expression(bp))

    def parse(self) -> Node:
        node = self.expression()
        tok = self.peek()
        if tok.kind != "end":
            self.fail(tok, f"unexpected {tok.text!r}", "operator or end of input")
        return node


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _checked(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise DomainError(f"non-finite result in {what}")
    return value


def _power(base: float, exponent: float) -> float:
    try:
        if float(exponent).is_integer():
            if base == 0.0 and exponent < 0:
                raise DomainError("zero raised to a negative power")
            return _checked(base ** int(exponent), "^")
        if base <= 0.0:
            raise DomainError(f"non-integer power {exponent!r} of non-positive base {base!r}")
        return _checked(math.pow(base, exponent), "^")
    except OverflowError:
        raise DomainError("overflow in ^") from None


def _ln(u: float) -> float:
    if u <= 0.0:
        raise DomainError(f"ln of non-positive value {u!r}")
    return math.log(u)


def _sqrt(u: float) -> float:
    if u < 0.0:
        raise DomainError(f"sqrt of negative value {u!r}")
    return math.sqrt(u)


def _exp(u: float) -> float:
    try:
        return math.exp(u)
    except OverflowError:
        raise DomainError("overflow in exp") from None


_UNARY = {
    "exp": _exp,
    "ln": _ln,
    "abs": abs,
    "sqrt": _sqrt,
    "sin": math.sin,
    "cos": math.cos,
}


def _compile(node: Node) -> Callable[[Sequence[float]], float]:
    if isinstance(node, Const):
        v = node.value
        return lambda p: v
    if isinstance(node, Var):
        i = node.index - 1
        return lambda p: p[i]
    if isinstance(node, Neg):
        a = _compile(node.arg)
        return lambda p: -a(p)
    if isinstance(node, Call):
        a = _compile(node.arg)
        fn = _UNARY[node.name]
        name = node.name
        return lambda p: _checked(fn(a(p)), name)
    a = _compile(node.left)
    b = _compile(node.right)
    op = node.op
    if op == "+":
        return lambda p: _checked(a(p) + b(p), "+")
    if op == "-":
        return lambda p: _checked(a(p) - b(p), "-")
    if op == "*":
        return lambda p: _checked(a(p) * b(p), "*")
    if op == "/":
        def div(p):
            num, den = a(p), b(p)
            if den == 0.0:
                raise DomainError("division by zero")
            return _checked(num / den, "/")
        return div
    return lambda p: _power(a(p), b(p))


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_ATOM = 5
_PREFIX = 0  # negations are parenthesized whenever they are an operand


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _show(node: Node):
    if isinstance(node, Const):
        if node.value < 0 or (node.value == 0 and math.copysign(1.0, node.value) < 0):
            return "-" + _format_number(-node.value), _PREFIX
        return _format_number(node.value), _ATOM
    if isinstance(node, Var):
        return f"x{node.index}", _ATOM
    if isinstance(node, Call):
        return f"{node.name}({_show(node.arg)[0]})", _ATOM
    if isinstance(node, Neg):
        text, prec = _show(node.arg)
        if prec < _PREC["*"]:
            text = f"({text})"
        return "-" + text, _PREFIX
    prec = _PREC[node.op]
    left, lp = _show(node.left)
    right, rp = _show(node.right)
    if node.op == "^":
        if lp <= prec:
            left = f"({left})"
        if rp < prec:
            right = f"({right})"
    else:
        if lp < prec:
            left = f"({left})"
        if rp <= prec:
            right = f"({right})"
    return f"{left}{node.op}{right}", prec


def to_text(node: Node) -> str:
    """Render ``node`` as text that parses back to an equal-valued tree."""
    return _show(node)[0]


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------


def _fold(node: Node) -> Optional[Const]:
    try:
        value = _compile(node)(())
    except DomainError:
        return None
    return Const(value)


def _simplify(node: Node) -> Node:
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, Neg):
        arg = _simplify(node.arg)
        if isinstance(arg, Const):
            return Const(-arg.value)
        if isinstance(arg, Neg):
            return arg.arg
        return Neg(arg)
    if isinstance(node, Call):
        arg = _simplify(node.arg)
        folded = _fold(Call(node.name, arg)) if isinstance(arg, Const) else None
        return folded or Call(node.name, arg)

    left = _simplify(node.left)
    right = _simplify(node.right)
    if isinstance(left, Const) and isinstance(right, Const):
        folded = _fold(Binary(node.op, left, right))
        if folded is not None:
            return folded

    def const(n, v):
        return isinstance(n, Const) and n.value == v

    op = node.op
    if op == "+":
        if const(left, 0):
            return right
        if const(right, 0):
            return left
    elif op == "-":
        if const(right, 0):
            return left
        if const(left, 0):
            return _simplify(Neg(right))
    elif op == "*":
        if const(left, 0) or const(right, 0):
            return ZERO
        if const(left, 1):
            return right
        if const(right, 1):
            return left
    elif op == "/":
        if const(left, 0):
            return ZERO
        if const(right, 1):
            return left
    elif op == "^":
        if const(right, 1):
            return left
        if const(right, 0):
            return ONE
    return Binary(op, left, right)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


def _d(node: Node, i: int) -> Node:
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.index == i else ZERO
    if isinstance(node, Neg):
        return Neg(_d(node.arg, i))
    if isinstance(node, Call):
        u = node.arg
        du = _d(u, i)
        name = node.name
        if name == "exp":
            outer = node
        elif name == "ln":
            return Div(du, u)
        elif name == "abs":
            # sign(u) as u/|u|: evaluating at u == 0 raises DomainError
            outer = Div(u, node)
        elif name == "sqrt":
            return Div(du, Mul(Const(2.0), node))
        elif name == "sin":
            outer = Call("cos", u)
        else:
            outer = Neg(Call("sin", u))
        return Mul(outer, du)

    a, b = node.left, node.right
    da, db = _d(a, i), _d(b, i)
    if node.op == "+":
        return Add(da, db)
    if node.op == "-":
        return Sub(da, db)
    if node.op == "*":
        return Add(Mul(da, b), Mul(a, db))
    if node.op == "/":
        return Div(Sub(Mul(da, b), Mul(a, db)), Pow(b, Const(2.0)))
    if is_constant(b):
        # power rule; an integer exponent keeps negative bases differentiable
        exponent = _simplify(b)
        if isinstance(exponent, Const):
            lowered = Const(exponent.value - 1.0)
        else:
            lowered = Sub(exponent, ONE)
        return Mul(Mul(exponent, Pow(a, lowered)), da)
    # d(a^b) = a^b * (b' ln a + b a'/a)
    return Mul(node, Add(Mul(db, Call("ln", a)), Div(Mul(b, da), a)))


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParsedFunction:
    """A real-valued function of ``arity`` variables.

    ``origin_value`` declares a removable singularity at the origin: points
    with norm below ``ORIGIN_RADIUS`` evaluate to that value instead of the
    body. It is meant for flat extensions such as ``exp(-1/x1^2)`` at 0,
    so partial derivatives inherit an origin value of 0.
    """

    arity: int
    body: Node
    source_text: str
    origin_value: Optional[float] = None

    def __post_init__(self):
        if self.arity < 1:
            raise ArityError(f"arity must be positive, got {self.arity}")
        bad = [i for i in variables(self.body) if not 1 <= i <= self.arity]
        if bad:
            raise ArityError(f"variable x{max(bad)} exceeds arity {self.arity}")

    @cached_property
    def _fn(self):
        return _compile(self.body)

    def __call__(self, point) -> float:
        return evaluate(self, point)

    def __str__(self) -> str:
        return to_text(self.body)

    def derivative(self, var: int) -> "ParsedFunction":
        if not 1 <= var <= self.arity:
            raise ArityError(f"variable index {var} outside 1..{self.arity}")
        return self.gradient[var - 1]

    @cached_property
    def gradient(self) -> tuple:
        return tuple(differentiate(self, i) for i in range(1, self.arity + 1))

    def with_body(self, body: Node, origin_value=None) -> "ParsedFunction":
        return ParsedFunction(self.arity, body, to_text(body), origin_value)


def parse(text: str, arity: int, origin_value: Optional[float] = None) -> ParsedFunction:
    """Parse ``text`` as a function of ``x1..x{arity}``.

    >>> parse("x1^2 + x2^2", 2)((3, 4))
    25.0
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0, "expression", text)
    if arity < 1:
        raise ArityError(f"arity must be positive, got {arity}")
    body = _Parser(text, arity).parse()
    return ParsedFunction(arity, body, text, origin_value)


def evaluate(f: ParsedFunction, point) -> float:
    p = tuple(float(v) for v in point)
    if len(p) != f.arity:
        raise ArityError(f"expected a point of length {f.arity}, got {len(p)}")
    if f.origin_value is not None and math.sqrt(math.fsum(v * v for v in p)) < ORIGIN_RADIUS:
        return f.origin_value
    return float(f._fn(p))


def differentiate(f: ParsedFunction, var: int) -> ParsedFunction:
    """Exact partial derivative of ``f`` with respect to ``x{var}``."""
    if not 1 <= var <= f.arity:
        raise ArityError(f"variable index {var} outside 1..{f.arity}")
    body = _simplify(_d(f.body, var))
    origin = None if f.origin_value is None else 0.0
    return f.with_body(body, origin)


def simplify(f: ParsedFunction) -> ParsedFunction:
    return f.with_body(_simplify(f.body), f.origin_value)
