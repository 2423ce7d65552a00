"""Scalar expression language for metric coefficients and product functions.

Grammar (whitespace is insignificant)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-2^2`` is
``-(2^2)`` and ``2^-1`` is allowed. Expressions evaluate over floats or jets.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from . import jet as _jet
from .errors import DomainError, FinslerError


class ParseError(FinslerError, ValueError):
    def __init__(self, byte_offset: int, expected: str, found: str):
        self.byte_offset = byte_offset
        self.expected = expected
        self.found = found
        super().__init__(f"at byte {byte_offset}: expected {expected}, found {found}")


class EvalError(FinslerError, ValueError):
    pass


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Ast"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Ast"
    right: "Ast"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Ast = Union[Number, Variable, Unary, Binary, Call]

FUNCTIONS = {
    "sqrt": (1, _jet.sqrt),
    "sin": (1, _jet.sin),
    "cos": (1, _jet.cos),
    "tan": (1, _jet.tan),
    "exp": (1, _jet.exp),
    "ln": (1, _jet.log),
    "log": (1, _jet.log),
    "pow": (2, _jet.power),
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int  # byte offset into the UTF-8 encoding


def _describe(tok: _Token) -> str:
    if tok.kind == "end":
        return "end of input"
    return repr(tok.text)


def tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    byte = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(byte, "a number, name, operator or parenthesis", repr(text[pos]))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), byte))
        byte += len(m.group().encode("utf-8"))
        pos = m.end()
    tokens.append(_Token("end", "", byte))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind == "end":
            raise ParseError(self.tok.offset, repr(text), _describe(self.tok))
        return self.advance()

    def parse(self) -> Ast:
        node = self.expr()
        if self.tok.kind != "end":
            raise ParseError(self.tok.offset, "an operator or end of input", _describe(self.tok))
        return node

    def expr(self) -> Ast:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Ast:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Ast:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Unary("-", self.unary())
        return self.power()

    def power(self) -> Ast:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return Binary("^", base, self.unary())
        return base

    def primary(self) -> Ast:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Number(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok)
            return Variable(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(tok.offset, "a number, name or '('", _describe(tok))

    def call(self, name: _Token) -> Ast:
        if name.text not in FUNCTIONS:
            raise ParseError(name.offset, f"a known function ({', '.join(sorted(FUNCTIONS))})", repr(name.text))
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        close = self.tok
        self.expect(")")
        arity = FUNCTIONS[name.text][0]
        if len(args) != arity:
            raise ParseError(
                close.offset, f"{arity} argument(s) for {name.text}", f"{len(args)} argument(s)"
            )
        return Call(name.text, tuple(args))


def parse(text: str) -> Ast:
    """Parse ``text`` into an AST, raising :class:`ParseError` on the first violation."""
    return _Parser(text).parse()


def evaluate(ast: Ast, env: Mapping[str, object]):
    """Value of ``ast`` with variables bound by ``env`` (floats or jets)."""
    if isinstance(ast, Number):
        return ast.value
    if isinstance(ast, Variable):
        try:
            return env[ast.name]
        except KeyError:
            raise EvalError(f"unbound variable {ast.name!r}") from None
    if isinstance(ast, Unary):
        return -evaluate(ast.child, env)
    if isinstance(ast, Binary):
        left = evaluate(ast.left, env)
        right = evaluate(ast.right, env)
        if ast.op == "+":
            return left + right
        if ast.op == "-":
            return left - right
        if ast.op == "*":
            return left * right
        if ast.op == "/":
            return _jet.divide(left, right)
        if ast.op == "^":
            return _jet.power(left, right)
        raise EvalError(f"unknown operator {ast.op!r}")
    if isinstance(ast, Call):
        arity, fn = FUNCTIONS[ast.name]
        return fn(*(evaluate(a, env) for a in ast.args))
    raise TypeError(f"not an AST node: {ast!r}")


def free_variables(ast: Ast) -> set[str]:
    if isinstance(ast, Variable):
        return {ast.name}
    if isinstance(ast, Unary):
        return free_variables(ast.child)
    if isinstance(ast, Binary):
        return free_variables(ast.left) | free_variables(ast.right)
    if isinstance(ast, Call):
        return set().union(*(free_variables(a) for a in ast.args))
    return set()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(ast: Ast) -> int:
    if isinstance(ast, Binary):
        return _PREC[ast.op]
    if isinstance(ast, Unary):
        return _PREC["neg"]
    if isinstance(ast, Number) and math.copysign(1.0, ast.value) < 0:
        # prints with a leading '-', so it binds like unary minus
        return _PREC["neg"]
    return _PREC["atom"]


def _wrap(ast: Ast, need_parens: bool) -> str:
    s = to_string(ast)
    return f"({s})" if need_parens else s


def to_string(ast: Ast) -> str:
    """Render ``ast`` with the minimal parentheses that reparse to the same tree."""
    if isinstance(ast, Number):
        return repr(ast.value)
    if isinstance(ast, Variable):
        return ast.name
    if isinstance(ast, Unary):
        return "-" + _wrap(ast.child, _prec(ast.child) < _PREC["neg"])
    if isinstance(ast, Binary):
        p = _PREC[ast.op]
        if ast.op == "^":
            left = _wrap(ast.left, _prec(ast.left) <= p)
            right = _wrap(ast.right, _prec(ast.right) < _PREC["neg"])
            return f"{left}^{right}"
        left = _wrap(ast.left, _prec(ast.left) < p)
        right = _wrap(ast.right, _prec(ast.right) <= p)
        return f"{left} {ast.op} {right}"
    if isinstance(ast, Call):
        return f"{ast.name}({', '.join(to_string(a) for a in ast.args)})"
    raise TypeError(f"not an AST node: {ast!r}")


def compile_expr(text_or_ast, variables: tuple[str, ...]) -> _jet.ScalarField:
    """Wrap an expression as a :class:`ScalarField` over the named ``variables``."""
    ast = parse(text_or_ast) if isinstance(text_or_ast, str) else text_or_ast
    unknown = free_variables(ast) - set(variables)
    if unknown:
        raise EvalError(f"expression uses unbound variable(s) {sorted(unknown)}")

    def evaluator(*args):
        return evaluate(ast, dict(zip(variables, args)))

    return _jet.ScalarField(len(variables), evaluator, name=to_string(ast))


__all__ = [
    "Ast",
    "Binary",
    "Call",
    "DomainError",
    "EvalError",
    "Number",
    "ParseError",
    "Unary",
    "Variable",
    "compile_expr",
    "evaluate",
    "free_variables",
    "parse",
    "to_string",
]
