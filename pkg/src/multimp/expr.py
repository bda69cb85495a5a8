"""Arithmetic expressions over (t, x, z) for user-defined Lagrangians.

Grammar (see docs/grammar.md)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" power)?
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "det2" ["(" ")"] | "(" expr ")"

Variables are ``t1..tn``, ``x1..xnu`` and ``z_a_i`` (slope entry
dx^a/dt^i, 1-based). ``^`` needs a constant non-negative integer exponent.
Evaluation never returns inf/nan: out-of-domain arguments raise
:class:`ExprDomainError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

from .errors import ArityError, ConfigError, NumericalError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")
NAMED_CONSTANTS = {"pi": math.pi}


class ExprSyntaxError(ConfigError):
    def __init__(self, message, position, expected=()):
        self.position = position
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if expected else ""
        super().__init__(f"{message} at byte {position}{detail}")


class UnknownIdentifier(ExprSyntaxError):
    pass


class ExprDomainError(NumericalError):
    def __init__(self, function, value):
        self.function = function
        self.value = value
        super().__init__(f"domain error in {function} for argument {value!r}")


# ----------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "t", "x" or "z"
    index: tuple  # 0-based


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    arg: object


@dataclass(frozen=True)
class Det2:
    pass


def _children(node):
    if isinstance(node, Neg):
        return (node.arg,)
    if isinstance(node, Bin):
        return (node.left, node.right)
    if isinstance(node, Call):
        return (node.arg,)
    return ()


def _is_constant(node):
    if isinstance(node, (Var, Det2)):
        return False
    return all(_is_constant(c) for c in _children(node))


# ----------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source):
    tokens = []
    i = 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[i]!r}", _byte_offset(source, i))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), _byte_offset(source, i)))
        i = m.end()
    tokens.append(_Token("eof", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source, index):
    return len(source[:index].encode("utf-8"))


# ----------------------------------------------------------------------------
# parser

_OPERAND_START = {"number", "identifier", "(", "-"}
_AFTER_OPERAND = {"+", "-", "*", "/", "^", ")", "end of input"}
_VAR_RE = re.compile(r"^(?:([tx])([1-9]\d*)|z_([1-9]\d*)_([1-9]\d*))$")


class _Parser:
    def __init__(self, source, n, nu, constants):
        self.tokens = _tokenize(source)
        self.k = 0
        self.n = n
        self.nu = nu
        self.constants = constants

    @property
    def tok(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, text):
        if self.tok.text != text or self.tok.kind == "eof":
            raise ExprSyntaxError(f"unexpected {self._describe(self.tok)}", self.tok.pos, {text})
        return self.advance()

    @staticmethod
    def _describe(tok):
        return "end of input" if tok.kind == "eof" else f"token {tok.text!r}"

    def parse(self):
        node = self.expr()
        if self.tok.kind != "eof":
            raise ExprSyntaxError(f"unexpected {self._describe(self.tok)}", self.tok.pos, _AFTER_OPERAND)
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            caret = self.advance()
            exponent = self.power()
            if not _is_constant(exponent):
                raise ExprSyntaxError("exponent of '^' must be constant", caret.pos)
            value = _compile(exponent)((), (), ())
            if not (float(value).is_integer() and value >= 0):
                raise ExprSyntaxError(
                    f"exponent of '^' must be a non-negative integer, got {value!r}", caret.pos
                )
            return Bin("^", base, Num(float(value)))
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "name":
            self.advance()
            return self.identifier(tok)
        raise ExprSyntaxError(f"unexpected {self._describe(tok)}", tok.pos, _OPERAND_START)

    def identifier(self, tok):
        name = tok.text
        if name in FUNCTIONS:
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(name, arg)
        if name == "det2":
            if (self.n, self.nu) != (2, 2):
                raise ArityError(f"det2 requires n = nu = 2, got n={self.n}, nu={self.nu} (byte {tok.pos})")
            if self.tok.kind == "op" and self.tok.text == "(" and self.tokens[self.k + 1].text == ")":
                self.k += 2
            return Det2()
        if name in self.constants:
            return Num(float(self.constants[name]))
        if name in NAMED_CONSTANTS:
            return Num(NAMED_CONSTANTS[name])
        m = _VAR_RE.match(name)
        if m is None:
            raise UnknownIdentifier(f"unknown identifier {name!r}", tok.pos)
        if m.group(1):
            kind, idx = m.group(1), int(m.group(2))
            bound = self.n if kind == "t" else self.nu
            if idx > bound:
                raise ArityError(f"{name} out of range: {kind} has {bound} components (byte {tok.pos})")
            return Var(kind, (idx - 1,))
        a, i = int(m.group(3)), int(m.group(4))
        if a > self.nu or i > self.n:
            raise ArityError(f"{name} out of range for slope matrix {self.nu}x{self.n} (byte {tok.pos})")
        return Var("z", (a - 1, i - 1))


# ----------------------------------------------------------------------------
# compilation to closures


def _checked(name, fn, ok):
    def apply(v):
        if not ok(v):
            raise ExprDomainError(name, v)
        try:
            return fn(v)
        except (OverflowError, ValueError):
            raise ExprDomainError(name, v) from None

    return apply


_FUNC_IMPL = {
    "sin": _checked("sin", math.sin, math.isfinite),
    "cos": _checked("cos", math.cos, math.isfinite),
    "exp": _checked("exp", math.exp, lambda v: True),
    "log": _checked("log", math.log, lambda v: v > 0),
    "sqrt": _checked("sqrt", math.sqrt, lambda v: v >= 0),
    "abs": abs,
}


def _compile(node) -> Callable:
    if isinstance(node, Num):
        value = node.value
        return lambda t, x, z: value
    if isinstance(node, Var):
        if node.kind == "t":
            (i,) = node.index
            return lambda t, x, z: float(t[i])
        if node.kind == "x":
            (i,) = node.index
            return lambda t, x, z: float(x[i])
        a, i = node.index
        return lambda t, x, z: float(z[a][i])
    if isinstance(node, Det2):
        return lambda t, x, z: float(z[0][0] * z[1][1] - z[0][1] * z[1][0])
    if isinstance(node, Neg):
        arg = _compile(node.arg)
        return lambda t, x, z: -arg(t, x, z)
    if isinstance(node, Call):
        arg = _compile(node.arg)
        fn = _FUNC_IMPL[node.name]
        return lambda t, x, z: fn(arg(t, x, z))
    if isinstance(node, Bin):
        lhs, rhs = _compile(node.left), _compile(node.right)
        op = node.op
        if op == "+":
            return lambda t, x, z: lhs(t, x, z) + rhs(t, x, z)
        if op == "-":
            return lambda t, x, z: lhs(t, x, z) - rhs(t, x, z)
        if op == "*":
            return lambda t, x, z: lhs(t, x, z) * rhs(t, x, z)
        if op == "/":
            def div(t, x, z):
                d = rhs(t, x, z)
                if d == 0.0:
                    raise ExprDomainError("/", d)
                return lhs(t, x, z) / d
            return div
        if op == "^":
            k = int(node.right.value)

            def power(t, x, z):
                try:
                    return lhs(t, x, z) ** k
                except OverflowError:
                    raise ExprDomainError("^", lhs(t, x, z)) from None
            return power
    raise TypeError(f"not an expression node: {node!r}")


@dataclass(frozen=True)
class Expr:
    """A parsed, immutable expression bound to an arity ``(n, nu)``."""

    root: object
    n: int
    nu: int
    source: str = ""
    _fn: Callable = field(default=None, repr=False, compare=False)

    def __call__(self, t, x, z):
        return eval_expr(self, t, x, z)

    def variables(self):
        found = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                found.add((node.kind, node.index))
            elif isinstance(node, Det2):
                found.add(("z", (0, 0)))
                found.add(("z", (1, 1)))
            stack.extend(_children(node))
        return found

    def depends_only_on_t(self):
        return all(kind == "t" for kind, _ in self.variables())


def parse(source: str, arity, constants=None) -> Expr:
    """Parse ``source`` for a problem with ``arity = (n, nu)``."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, _OPERAND_START)
    n, nu = arity
    root = _Parser(source, int(n), int(nu), dict(constants or {})).parse()
    return Expr(root, int(n), int(nu), source, _compile(root))


def eval_expr(e: Expr, t, x, z) -> float:
    if len(t) != e.n or len(x) != e.nu or len(z) != e.nu or any(len(row) != e.n for row in z):
        raise ArityError(f"expression expects n={e.n}, nu={e.nu}")
    value = e._fn(t, x, z)
    if not math.isfinite(value):
        raise ExprDomainError("overflow", value)
    return float(value)


def to_source(e) -> str:
    """Fully parenthesised source text; ``parse(to_source(e))`` evaluates identically."""
    node = e.root if isinstance(e, Expr) else e
    return _print(node)


def _print(node):
    if isinstance(node, Num):
        text = repr(node.value)
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Var):
        if node.kind == "z":
            return f"z_{node.index[0] + 1}_{node.index[1] + 1}"
        return f"{node.kind}{node.index[0] + 1}"
    if isinstance(node, Det2):
        return "det2"
    if isinstance(node, Neg):
        return f"(-{_print(node.arg)})"
    if isinstance(node, Call):
        return f"{node.name}({_print(node.arg)})"
    if isinstance(node, Bin):
        if node.op == "^":
            return f"({_print(node.left)}^{int(node.right.value)})"
        return f"({_print(node.left)} {node.op} {_print(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")
