"""Coefficient expressions a_i(t).

A tiny recursive-descent parser for real expressions in the single
variable ``t``::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | 't' | NAME '(' expr ')' | '(' expr ')'

so ``-2^2 == -4`` and ``2^3^2 == 512``.  Trees are immutable; positions are
kept on every node for error reporting but ignored by equality.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Union

from .errors import DisconjError

__all__ = [
    "SourcePos",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprDomainError",
    "parse",
    "evaluate",
    "to_source",
    "is_constant",
    "FUNCTIONS",
]


@dataclass(frozen=True)
class SourcePos:
    offset: int  # byte offset into the UTF-8 source
    column: int  # one-based character column

    def __str__(self) -> str:
        return f"column {self.column}"


_NOPOS = SourcePos(0, 1)


class ExprError(DisconjError):
    def __init__(self, message: str, pos: SourcePos):
        super().__init__(f"{message} at {pos}")
        self.pos = pos


class ExprSyntaxError(ExprError, ValueError):
    pass


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    pass


@dataclass(frozen=True)
class Const:
    value: float
    pos: SourcePos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    pos: SourcePos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: SourcePos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"
    pos: SourcePos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expr"
    pos: SourcePos = field(default=_NOPOS, compare=False, repr=False)


Expr = Union[Const, Var, Neg, BinOp, Call]


def _ln(x: float) -> float:
    if x <= 0.0:
        raise ValueError("ln of non-positive argument")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise ValueError("sqrt of negative argument")
    return math.sqrt(x)


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "abs": abs,
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, name, op, end
    text: str
    pos: SourcePos


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i = 0
    offset = 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        pos = SourcePos(offset, i + 1)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", pos)
        text = m.group()
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, text, pos))
        offset += len(text.encode("utf-8"))
        i = m.end()
    tokens.append(_Token("end", "", SourcePos(offset, len(src) + 1)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind != "op":
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", self.tok.pos)
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance()
            node = BinOp(op.text, node, self.term(), op.pos)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance()
            node = BinOp(op.text, node, self.unary(), op.pos)
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            op = self.advance()
            return Neg(self.unary(), op.pos)
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            op = self.advance()
            return BinOp("^", base, self.unary(), op.pos)
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"numeric literal {tok.text!r} out of range", tok.pos)
            return Const(value, tok.pos)
        if tok.kind == "name":
            self.advance()
            if tok.text == "t":
                return Var(tok.pos)
            if tok.text not in FUNCTIONS:
                raise UnknownIdentifierError(f"unknown identifier {tok.text!r}", tok.pos)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(tok.text, arg, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"expected an operand, found {found}", tok.pos)


def parse(src: str) -> Expr:
    """Parse ``src`` into an expression tree.

    Raises:
        ExprSyntaxError: malformed input, with the offending position.
        UnknownIdentifierError: a name other than ``t`` or a known function.
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", SourcePos(0, 1))
    return _Parser(src).parse()


def _binop(op: str, x: float, y: float) -> float:
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    if op == "/":
        if y == 0.0:
            raise ZeroDivisionError("division by zero")
        return x / y
    return math.pow(x, y)


def evaluate(e: Expr, t: float) -> float:
    """Evaluate ``e`` at ``t`` in double precision.

    Raises:
        ExprDomainError: division by zero, ln/sqrt outside their domain, or
            any non-finite intermediate; carries the offending node's position.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(t)
    try:
        if isinstance(e, Neg):
            return -evaluate(e.operand, t)
        if isinstance(e, BinOp):
            value = _binop(e.op, evaluate(e.left, t), evaluate(e.right, t))
        else:
            value = FUNCTIONS[e.name](evaluate(e.arg, t))
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ExprDomainError(str(exc), e.pos) from None
    if not math.isfinite(value):
        raise ExprDomainError("non-finite value", e.pos)
    return value


def to_source(e: Expr) -> str:
    """Print ``e`` so that ``parse(to_source(e)) == e`` for parsed trees."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return "t"
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    return f"{e.name}({to_source(e.arg)})"


def is_constant(e: Expr) -> bool:
    """True when ``e`` does not reference ``t``."""
    if isinstance(e, Const):
        return True
    if isinstance(e, Var):
        return False
    if isinstance(e, Neg):
        return is_constant(e.operand)
    if isinstance(e, BinOp):
        return is_constant(e.left) and is_constant(e.right)
    return is_constant(e.arg)
