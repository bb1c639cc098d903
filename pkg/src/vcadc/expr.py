"""Scalar math expression compiler.

Expressions are parsed once into an immutable AST and then evaluated many
times (typically millions) against variable bindings. Bindings may be
scalars or numpy arrays of equal length; evaluation broadcasts, so a single
compiled program services a whole batch of sample points at once.

Grammar
    expr    := cmp
    cmp     := add (("<" | "<=" | ">" | ">=" | "==" | "!=") add)*
    add     := mul (("+" | "-") mul)*
    mul     := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?          (right associative)
    atom    := number | name | name "(" expr ("," expr)* ")" | "(" expr ")"

Comparinson operators yield 0.0 / 1.0. Known functions: sin cos tan asin
acos atan atan2 exp log sqrt abs min max pow floor ceil mod clamp if.
``if(cond, a, b)`` selects a where cond is nonzero (no short-circuit
guarantee). Constants ``pi`` and ``e`` are folded at parse time. Domain
errors (e.g. sqrt of a negative) yield NaN; policy is the caller's.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import EvalError, ExprSyntaxError

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|!=|[<>+\-*/^(),])"
    r")"
)

_CONSTANTS = {"pi": math.pi, "e": math.e}

_UNARY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "asin": np.arcsin,
    "acos": np.arccos,
    "atan": np.arctan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "floor": np.floor,
    "ceil": np.ceil,
}

_BINARY_FUNCS = {
    "atan2": np.arctan2,
    "pow": np.power,
    "mod": np.mod,
}

_FUNCTION_ARITY = dict.fromkeys(_UNARY_FUNCS, (1, 1))
_FUNCTION_ARITY.update(dict.fromkeys(_BINARY_FUNCS, (2, 2)))
_FUNCTION_ARITY.update({"min": (2, None), "max": (2, None), "clamp": (3, 3), "if": (3, 3)})

_CMP_OPS = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
}


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(src)
    while pos < n:
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == m.start():
            # Skip whitespace manually before declaring an error.
            if src[pos].isspace():
                pos += 1
                continue
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables: set[str] = set()

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}, found {text or 'end of input'!r}", pos)
        self.advance()

    def parse(self):
        ast = self.cmp()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return ast

    def cmp(self):
        node = self.add()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in _CMP_OPS:
                self.advance()
                node = ("bin", text, node, self.add())
            else:
                return node

    def add(self):
        node = self.mul()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in ("+", "-"):
                self.advance()
                node = ("bin", text, node, self.mul())
            else:
                return node

    def mul(self):
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in ("*", "/"):
                self.advance()
                node = ("bin", text, node, self.unary())
            else:
                return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return ("bin", "^", node, self.unary())
        return node

    def atom(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return ("num", float(text))
        if kind == "name":
            nk, ntext, _ = self.peek()
            if nk == "op" and ntext == "(":
                return self.call(text, pos)
            if text in _CONSTANTS:
                return ("num", _CONSTANTS[text])
            self.variables.add(text)
            return ("var", text)
        if kind == "op" and text == "(":
            node = self.cmp()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos)

    def call(self, name: str, pos: int):
        if name not in _FUNCTION_ARITY:
            raise ExprSyntaxError(f"unknown function {name!r}", pos)
        self.expect_op("(")
        args = [self.cmp()]
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == ",":
                self.advance()
                args.append(self.cmp())
            else:
                break
        self.expect_op(")")
        lo, hi = _FUNCTION_ARITY[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if hi == lo else (f">= {lo}" if hi is None else f"{lo}..{hi}")
            raise ExprSyntaxError(f"function {name!r} takes {want} arguments, got {len(args)}", pos)
        return ("call", name, tuple(args))


def _eval(node, b):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        try:
            return b[node[1]]
        except KeyError:
            raise EvalError(f"unbound variable {node[1]!r}") from None
    if kind == "neg":
        return np.negative(_eval(node[1], b))
    if kind == "bin":
        op = node[1]
        x = _eval(node[2], b)
        y = _eval(node[3], b)
        if op == "+":
            return np.add(x, y)
        if op == "-":
            return np.subtract(x, y)
        if op == "*":
            return np.multiply(x, y)
        if op == "/":
            return np.divide(x, y)
        if op == "^":
            return np.power(x, y)
        return _CMP_OPS[op](x, y).astype(np.float64)
    # call
    name, args = node[1], node[2]
    if name in _UNARY_FUNCS:
        return _UNARY_FUNCS[name](_eval(args[0], b))
    if name in _BINARY_FUNCS:
        return _BINARY_FUNCS[name](_eval(args[0], b), _eval(args[1], b))
    vals = [_eval(a, b) for a in args]
    if name == "min":
        out = vals[0]
        for v in vals[1:]:
            out = np.minimum(out, v)
        return out
    if name == "max":
        out = vals[0]
        for v in vals[1:]:
            out = np.maximum(out, v)
        return out
    if name == "clamp":
        return np.minimum(np.maximum(vals[0], vals[1]), vals[2])
    # if(cond, a, b)
    return np.where(np.asarray(vals[0]) != 0, vals[1], vals[2])


_PREC = {"<": 1, "<=": 1, ">": 1, ">=": 1, "==": 1, "!=": 1, "+": 2, "-": 2, "*": 3, "/": 3, "^": 5}


def _print(node, parent_prec: int = 0, right_of_same: bool = False) -> str:
    kind = node[0]
    if kind == "num":
        return repr(node[1])
    if kind == "var":
        return node[1]
    if kind == "neg":
        inner = _print(node[1], 4)
        s = f"-{inner}"
        return f"({s})" if parent_prec > 4 or (parent_prec == 4 and right_of_same) else s
    if kind == "call":
        args = ", ".join(_print(a) for a in node[2])
        return f"{node[1]}({args})"
    op = node[1]
    prec = _PREC[op]
    if op == "^":
        left = _print(node[2], prec + 1)  # left operand of ^ must bind tighter
        right = _print(node[3], prec)
    else:
        left = _print(node[2], prec)
        right = _print(node[3], prec, right_of_same=True)
    s = f"{left} {op} {right}" if prec == 1 else f"{left}{op}{right}"
    needs = parent_prec > prec or (parent_prec == prec and right_of_same)
    return f"({s})" if needs else s


class ExprProgram:
    """A compiled expression. Immutable; safe for concurrent evaluation.

    ``nan_events`` counts NaN results observed by fraction-clamping callers;
    it is advisory bookkeeping, not part of evaluation semantics.
    """

    __slots__ = ("source", "ast", "variables", "nan_events")

    def __init__(self, source: str, ast, variables: frozenset[str]):
        self.source = source
        self.ast = ast
        self.variables = variables
        self.nan_events = 0

    def __repr__(self) -> str:
        return f"ExprProgram({self.source!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, ExprProgram) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)

    def eval(self, bindings) -> float | np.ndarray:
        """Evaluate against a mapping name -> scalar or (N,) array."""
        missing = self.variables.difference(bindings)
        if missing:
            raise EvalError(f"unbound variable {sorted(missing)[0]!r}")
        with np.errstate(all="ignore"):
            out = _eval(self.ast, bindings)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def pretty(self) -> str:
        """Render the AST back to source; reparsing yields an equal AST."""
        return _print(self.ast)


def parse(src: str) -> ExprProgram:
    """Compile ``src`` to an ExprProgram, or raise ExprSyntaxError."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    p = _Parser(src)
    ast = p.parse()
    return ExprProgram(src, ast, frozenset(p.variables))
