"""Arithmetic expression language for coefficient and initial-data fields.

Grammar (whitespace is insignificant)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"
    NUMBER  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
             | "." digits [exponent]

``^`` binds tighter than unary minus (``-x^2 == -(x^2)``) and is
right-associative; every other binary operator is left-associative.

Names: ``x1`` .. ``xd`` (with ``x``, ``y``, ``z`` as aliases of ``x1``,
``x2``, ``x3`` when ``d <= 3``), the constants ``pi`` and ``e``, and the
functions ``sin cos exp tanh sqrt abs`` (one argument) and ``min max``
(two or more arguments).

Evaluation is vectorised over an ``(m, d)`` array of points.  Division by
zero, the square root of a negative number, a negative base raised to a
non-integer power and overflow raise :class:`ExprDomainError`; a NaN is
never returned silently.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "VariableRangeError",
    "ExprDomainError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "parse",
    "evaluate",
    "evaluate_many",
    "to_string",
]


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    pass


class VariableRangeError(ExprError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero-based axis


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple["Node", ...]


Node = Union[Num, Var, Neg, BinOp, Call]

UNARY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
VARIADIC_FUNCS = {"min": np.minimum, "max": np.maximum}
CONSTANTS = {"pi": math.pi, "e": math.e}
ALIASES = {"x": 0, "y": 1, "z": 2}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Expr:
    """A parsed expression bound to a spatial dimension."""

    root: Node
    d: int
    source: str = ""

    def __call__(self, points) -> np.ndarray:
        return evaluate_many(self, points)

    def __str__(self) -> str:
        return to_string(self.root)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, d: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.d = d

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", off)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(text, off)
            return self.name(text, off)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", off)

    def call(self, func: str, off: int) -> Node:
        if func not in UNARY_FUNCS and func not in VARIADIC_FUNCS:
            raise UnknownIdentifierError(f"unknown function {func!r} at offset {off}")
        self.take()  # "("
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if func in UNARY_FUNCS and len(args) != 1:
            raise ExprSyntaxError(f"{func} takes exactly one argument", off)
        if func in VARIADIC_FUNCS and len(args) < 2:
            raise ExprSyntaxError(f"{func} takes at least two arguments", off)
        return Call(func, tuple(args))

    def name(self, name: str, off: int) -> Node:
        if name in CONSTANTS:
            return Num(CONSTANTS[name])
        m = re.fullmatch(r"x([1-9][0-9]*)", name)
        if m:
            index = int(m.group(1)) - 1
        elif name in ALIASES and self.d <= 3:
            index = ALIASES[name]
        else:
            raise UnknownIdentifierError(f"unknown identifier {name!r} at offset {off}")
        if index >= self.d:
            raise VariableRangeError(
                f"variable index out of range: {name!r} in dimension {self.d} (offset {off})"
            )
        return Var(index)


def parse(text: str, d: int) -> Expr:
    """Parse ``text`` into an expression over ``d`` variables."""
    if d < 1:
        raise ValueError("dimension must be positive")
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return Expr(_Parser(text, d).parse(), d, text)


def _check(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise ExprDomainError(f"{what} produced a non-finite value")
    return values


def _eval(node: Node, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(X.shape[0], node.value)
    if isinstance(node, Var):
        return X[:, node.index].copy()
    if isinstance(node, Neg):
        return -_eval(node.operand, X)
    if isinstance(node, Call):
        args = [_eval(a, X) for a in node.args]
        if node.func in VARIADIC_FUNCS:
            out = args[0]
            for a in args[1:]:
                out = VARIADIC_FUNCS[node.func](out, a)
            return out
        (x,) = args
        if node.func == "sqrt" and np.any(x < 0):
            raise ExprDomainError("sqrt of a negative number")
        return _check(UNARY_FUNCS[node.func](x), node.func)
    left = _eval(node.left, X)
    right = _eval(node.right, X)
    op = node.op
    if op == "+":
        return _check(left + right, "addition")
    if op == "-":
        return _check(left - right, "subtraction")
    if op == "*":
        return _check(left * right, "multiplication")
    if op == "/":
        if np.any(right == 0):
            raise ExprDomainError("division by zero")
        return _check(left / right, "division")
    # "^"
    if np.any((left < 0) & (right != np.round(right))):
        raise ExprDomainError("negative base raised to a non-integer power")
    if np.any((left == 0) & (right < 0)):
        raise ExprDomainError("division by zero (zero raised to a negative power)")
    return _check(np.power(left, right), "power")


def evaluate_many(expr: Expr, points) -> np.ndarray:
    """Evaluate ``expr`` at each row of an ``(m, d)`` array."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if expr.d > 1 or X.size == 1 else X.reshape(-1, 1)
    if X.shape[1] != expr.d:
        raise ValueError(f"point dimension {X.shape[1]} does not match expression dimension {expr.d}")
    with np.errstate(all="ignore"):
        return _eval(expr.root, X)


def evaluate(expr: Expr, point) -> float:
    """Evaluate ``expr`` at a single point of length ``d``."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if p.shape != (expr.d,):
        raise ValueError(f"point dimension {p.size} does not match expression dimension {expr.d}")
    return float(evaluate_many(expr, p.reshape(1, -1))[0])


def to_string(node: Node) -> str:
    """Fully parenthesised rendering that reparses to an identical tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"(-{to_string(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_string(a) for a in node.args)})"
    return f"({to_string(node.left)} {node.op} {to_string(node.right)})"
