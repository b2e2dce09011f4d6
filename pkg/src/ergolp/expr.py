"""Arithmetic expressions over the planar state and control variables.

Integrands (cost numerator/denominator, averaged constraints) and implicit
domain inequalities are user-supplied strings over the variables
``x1, x2, u1, u2``.  This module parses them into immutable syntax trees and
evaluates those trees on scalars or numpy arrays (broadcasting), so a single
expression can be sampled over a whole grid in one call.

Grammar: ``+ -`` < ``* /`` < unary minus < ``^`` (right associative), with
parentheses and two-argument function calls.  The exponent of ``^`` must fold
to a constant.  Supported functions: abs, sqrt, sin, cos, exp, min, max; the
identifier ``pi`` is a constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

DEFAULT_VARIABLES = ("x1", "x2", "u1", "u2")

_FUNCTIONS = {
    "abs": (1, np.abs),
    "sqrt": (1, np.sqrt),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}

_ADD_PREC = 10
_MUL_PREC = 20
_NEG_PREC = 30
_POW_PREC = 40


class ParseError(ValueError):
    """Syntax or name error; ``offset`` is the position in the input string."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class EvalError(ValueError):
    """Raised when evaluation produces a non-finite value (e.g. 1/0, sqrt(-1))."""

    def __init__(self, message, node):
        super().__init__(f"{message} in '{node}'")
        self.node = node


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    child: object

    def __str__(self):
        return f"-{_wrap(self.child, _NEG_PREC)}"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def __str__(self):
        prec = _BIN_PREC[self.op]
        # left-associative chains keep the left side unwrapped at equal precedence
        lhs = _wrap(self.left, prec + (1 if self.op == "^" else 0))
        rhs = _wrap(self.right, prec + (0 if self.op == "^" else 1))
        return f"{lhs} {self.op} {rhs}"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def __str__(self):
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


_BIN_PREC = {"+": _ADD_PREC, "-": _ADD_PREC, "*": _MUL_PREC, "/": _MUL_PREC, "^": _POW_PREC}


def _prec_of(node):
    if isinstance(node, BinOp):
        return _BIN_PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return 100


def _wrap(node, min_prec):
    s = str(node)
    return f"({s})" if _prec_of(node) < min_prec else s


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", len(text) - len(stripped))
        start = m.end() - len((m.group("num") or m.group("ident") or m.group("op")))
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), start))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), start))
        else:
            tokens.append(("op", m.group("op"), start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens, variables):
        self.tokens = tokens
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol):
        kind, value, offset = self.advance()
        if kind != "op" or value != symbol:
            raise ParseError(f"expected {symbol!r}", offset)

    def parse_expression(self, min_prec=0):
        node = self.parse_prefix()
        while True:
            kind, value, offset = self.peek()
            if kind != "op" or value not in _BIN_PREC:
                break
            prec = _BIN_PREC[value]
            if prec < min_prec:
                break
            self.advance()
            if value == "^":
                right = self.parse_expression(prec)  # right-associative
                node = BinOp("^", node, _fold_exponent(right, offset))
            else:
                right = self.parse_expression(prec + 1)
                node = BinOp(value, node, right)
        return node

    def parse_prefix(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Const(value)
        if kind == "ident":
            if value == "pi":
                return Const(math.pi)
            if value in _FUNCTIONS:
                return self.parse_call(value, offset)
            if value in self.variables:
                return Var(value)
            raise ParseError(f"unknown identifier {value!r}", offset)
        if kind == "op" and value == "-":
            return Neg(self.parse_expression(_NEG_PREC))
        if kind == "op" and value == "(":
            node = self.parse_expression()
            self.expect_op(")")
            return node
        raise ParseError("expected a value", offset)

    def parse_call(self, name, offset):
        arity, _ = _FUNCTIONS[name]
        self.expect_op("(")
        args = [self.parse_expression()]
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == ",":
                self.advance()
                args.append(self.parse_expression())
            else:
                break
        self.expect_op(")")
        if len(args) != arity:
            raise ParseError(f"{name} takes {arity} argument(s), got {len(args)}", offset)
        return Call(name, tuple(args))


def _fold_exponent(node, offset):
    """Exponents must be constants; fold the parsed subtree down to one."""
    try:
        value = evaluate_env(node, {})
    except (EvalError, KeyError):
        raise ParseError("exponent of ^ must be a constant", offset) from None
    return Const(float(value))


def parse(text, variables=DEFAULT_VARIABLES):
    """Parse ``text`` into an expression tree over the given variable names."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(_tokenize(text), tuple(variables))
    node = parser.parse_expression()
    kind, _, offset = parser.peek()
    if kind != "end":
        raise ParseError("trailing input", offset)
    return node


def _check(value, node):
    if not np.all(np.isfinite(value)):
        raise EvalError("non-finite result", node)
    return value


def evaluate_env(node, env):
    """Evaluate against a name -> scalar/array environment."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate_env(node.child, env)
    if isinstance(node, BinOp):
        left = evaluate_env(node.left, env)
        right = evaluate_env(node.right, env)
        with np.errstate(all="ignore"):
            if node.op == "+":
                out = np.add(left, right)
            elif node.op == "-":
                out = np.subtract(left, right)
            elif node.op == "*":
                out = np.multiply(left, right)
            elif node.op == "/":
                out = np.divide(left, right)
            else:
                out = np.power(left, right)
        return _check(out, node)
    if isinstance(node, Call):
        _, fn = _FUNCTIONS[node.name]
        args = [evaluate_env(a, env) for a in node.args]
        with np.errstate(all="ignore"):
            out = fn(*args)
        return _check(out, node)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node, x, u=(0.0, 0.0)):
    """Evaluate at state ``x = (x1, x2)`` and control ``u = (u1, u2)``.

    Components may be scalars or broadcastable numpy arrays.
    """
    env = {"x1": x[0], "x2": x[1], "u1": u[0], "u2": u[1]}
    return evaluate_env(node, env)


def pretty(node):
    """Render a tree back to source text; reparsing yields an identical tree."""
    return str(node)


def uses_control(node):
    """True if the expression references u1 or u2."""
    if isinstance(node, Var):
        return node.name in ("u1", "u2")
    if isinstance(node, Neg):
        return uses_control(node.child)
    if isinstance(node, BinOp):
        return uses_control(node.left) or uses_control(node.right)
    if isinstance(node, Call):
        return any(uses_control(a) for a in node.args)
    return False
