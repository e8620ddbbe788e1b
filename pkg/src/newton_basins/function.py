"""Entire functions as expression trees with second-order jet evaluation.

A function is parsed from a small text language::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') INT)?
    atom   := NUMBER | 'z' | 'i' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := 'exp' | 'sin' | 'cos'

Exponents are nonnegative integer literals. Numbers accept an ``i`` or ``j``
suffix for imaginary literals (``2.5i``).

Jets are propagated with an optional complex log-scale so that factors such
as ``exp(-z**5/5)`` do not overflow or underflow at moderate ``|z|``: a
scaled jet ``(s, v, d1, d2)`` stands for ``exp(s) * (v, d1, d2)``. The
Newton map and its derivative only use ratios, so the scale cancels.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

ArrayLike = Union[complex, np.ndarray]

__all__ = [
    "DivisionByZeroAt",
    "DerivativeZero",
    "NearPole",
    "PoleOfMap",
    "ParseError",
    "EntireFunction",
    "Jet2",
    "FamilyExpZn",
    "parse_function",
    "eval_jet",
    "newton_step",
    "newton_derivative",
    "newton_step_and_derivative",
    "newton_map_array",
    "family_newton_closed_form",
    "POLE_GUARD",
]

POLE_GUARD = 1e-12


class DivisionByZeroAt(ArithmeticError):
    def __init__(self, z, subexpression: str):
        super().__init__(f"denominator {subexpression!r} vanishes at z={z}")
        self.z = z
        self.subexpression = subexpression


class DerivativeZero(ArithmeticError):
    """f'(z) == 0: z is a pole of the Newton map."""

    def __init__(self, z):
        super().__init__(f"f'(z) = 0 at z={z}")
        self.z = z


class NearPole(ArithmeticError):
    def __init__(self, z):
        super().__init__(f"|f'(z)| below pole guard while |f(z)| is not, z={z}")
        self.z = z


class PoleOfMap(ArithmeticError):
    def __init__(self, z):
        super().__init__(f"z={z} is a pole of the closed-form Newton map")
        self.z = z


class ParseError(ValueError):
    def __init__(self, message: str, text: str, column: int, line: int = 1):
        super().__init__(f"line {line}, column {column}: {message}\n  {text}\n  {' ' * (column - 1)}^")
        self.message = message
        self.line = line
        self.column = column


# ---------------------------------------------------------------- expression tree


@dataclass(frozen=True)
class Node:
    pass


@dataclass(frozen=True)
class Const(Node):
    value: complex

    def __str__(self) -> str:
        v = self.value
        if v.imag == 0:
            return _fmt_real(v.real)
        if v.real == 0:
            return f"{_fmt_real(v.imag)}i"
        return f"({_fmt_real(v.real)}{'+' if v.imag >= 0 else '-'}{_fmt_real(abs(v.imag))}i)"


@dataclass(frozen=True)
class Var(Node):
    def __str__(self) -> str:
        return "z"


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def __str__(self) -> str:
        return f"-({self.arg})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # one of + - * /
    left: Node
    right: Node

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int

    def __str__(self) -> str:
        return f"{self.base}^{self.exponent}"


@dataclass(frozen=True)
class Call(Node):
    name: str  # exp, sin, cos
    arg: Node

    def __str__(self) -> str:
        return f"{self.name}({self.arg})"


def _fmt_real(x: float) -> str:
    return str(int(x)) if float(x).is_integer() and abs(x) < 1e15 else repr(float(x))


def substitute(node: Node, inner: Node) -> Node:
    """Replace every occurrence of ``z`` in ``node`` by ``inner``."""
    if isinstance(node, Var):
        return inner
    if isinstance(node, Const):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, inner))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, inner), substitute(node.right, inner))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, inner), node.exponent)
    if isinstance(node, Call):
        return Call(node.name, substitute(node.arg, inner))
    raise TypeError(f"unknown node {node!r}")


def _has_division(node: Node) -> bool:
    if isinstance(node, BinOp):
        return node.op == "/" or _has_division(node.left) or _has_division(node.right)
    if isinstance(node, (Neg, Call)):
        return _has_division(node.arg)
    if isinstance(node, Pow):
        return _has_division(node.base)
    return False


# ---------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[ij]?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()]))"
)
_FUNCS = ("exp", "sin", "cos")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        stripped_end = len(text.rstrip())
        while pos < stripped_end:
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
                raise ParseError(f"unexpected character {text[col - 1]!r}", text, col)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start + 1))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text) + 1)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, col = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", self.text, col)

    def parse(self) -> Node:
        if not self.tokens:
            raise ParseError("empty expression", self.text, 1)
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", self.text, col)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            kind, val, col = self.take()
            if kind == "op" and val == "-":
                raise ParseError("exponents must be nonnegative integers", self.text, col)
            if kind != "num" or not val.isdigit():
                raise ParseError("exponent must be a nonnegative integer literal", self.text, col)
            return Pow(base, int(val))
        return base

    def atom(self) -> Node:
        kind, val, col = self.take()
        if kind == "num":
            if val[-1] in "ij":
                return Const(complex(0.0, float(val[:-1])))
            return Const(complex(float(val)))
        if kind == "name":
            if val == "z":
                return Var()
            if val == "i":
                return Const(1j)
            if val == "pi":
                return Const(complex(math.pi))
            if val in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ParseError(f"unknown name {val!r}", self.text, col)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", self.text, col)


# ---------------------------------------------------------------- jets


@dataclass(frozen=True)
class Jet2:
    value: complex
    d1: complex
    d2: complex


class _Jet:
    """Scaled second-order jet; ``scale`` is None for an unscaled jet."""

    __slots__ = ("scale", "v", "d1", "d2")

    def __init__(self, scale, v, d1, d2):
        self.scale = scale
        self.v = v
        self.d1 = d1
        self.d2 = d2

    def materialize(self):
        if self.scale is None:
            return self.v, self.d1, self.d2
        with np.errstate(over="ignore", invalid="ignore"):
            k = np.exp(self.scale)
            return k * self.v, k * self.d1, k * self.d2

    def log_abs_factor(self):
        """log of the modulus of exp(scale)."""
        return 0.0 if self.scale is None else np.real(self.scale)


def _align(a: _Jet, b: _Jet):
    if a.scale is None and b.scale is None:
        return None, 1.0, 1.0
    sa = 0.0 if a.scale is None else a.scale
    sb = 0.0 if b.scale is None else b.scale
    m = np.where(np.real(sa) >= np.real(sb), sa, sb)
    if np.ndim(m) == 0:
        m = complex(m)
    return m, np.exp(sa - m), np.exp(sb - m)


def _eval(node: Node, z, array: bool, bad) -> _Jet:
    if isinstance(node, Var):
        one = np.ones_like(z) if array else 1.0
        return _Jet(None, z, one, 0.0 * one)
    if isinstance(node, Const):
        return _Jet(None, node.value, 0.0, 0.0)
    if isinstance(node, Neg):
        a = _eval(node.arg, z, array, bad)
        return _Jet(a.scale, -a.v, -a.d1, -a.d2)
    if isinstance(node, Pow):
        a = _eval(node.base, z, array, bad)
        k = node.exponent
        if k == 0:
            return _Jet(None, 1.0 + 0.0 * a.v, 0.0 * a.v, 0.0 * a.v)
        if k == 1:
            return a
        vk2 = a.v ** (k - 2)
        vk1 = vk2 * a.v
        scale = None if a.scale is None else k * a.scale
        return _Jet(scale, vk1 * a.v, k * vk1 * a.d1, k * vk1 * a.d2 + k * (k - 1) * vk2 * a.d1 * a.d1)
    if isinstance(node, Call):
        a = _eval(node.arg, z, array, bad)
        g, g1, g2 = a.materialize()
        if node.name == "exp":
            # exp(g) = exp(g) * 1, derivatives relative to the scale
            return _Jet(g, 1.0 + 0.0 * g, g1, g2 + g1 * g1)
        if node.name == "sin":
            s, c = np.sin(g), np.cos(g)
            return _Jet(None, s, c * g1, c * g2 - s * g1 * g1)
        if node.name == "cos":
            s, c = np.sin(g), np.cos(g)
            return _Jet(None, c, -s * g1, -s * g2 - c * g1 * g1)
        raise ValueError(f"unknown function {node.name}")
    if isinstance(node, BinOp):
        a = _eval(node.left, z, array, bad)
        b = _eval(node.right, z, array, bad)
        if node.op in ("+", "-"):
            m, ka, kb = _align(a, b)
            sign = 1.0 if node.op == "+" else -1.0
            return _Jet(m, ka * a.v + sign * kb * b.v, ka * a.d1 + sign * kb * b.d1, ka * a.d2 + sign * kb * b.d2)
        if a.scale is None and b.scale is None:
            scale = None
        else:
            sa = 0.0 if a.scale is None else a.scale
            sb = 0.0 if b.scale is None else b.scale
            scale = sa + sb if node.op == "*" else sa - sb
        if node.op == "*":
            return _Jet(scale, a.v * b.v, a.v * b.d1 + a.d1 * b.v, a.v * b.d2 + 2.0 * a.d1 * b.d1 + a.d2 * b.v)
        # quotient
        zero = b.v == 0
        if array:
            if np.any(zero):
                bad |= np.broadcast_to(zero, bad.shape)
                bv = np.where(zero, 1.0, b.v)
            else:
                bv = b.v
        else:
            if zero:
                raise DivisionByZeroAt(z, str(node.right))
            bv = b.v
        q = a.v / bv
        q1 = (a.d1 - q * b.d1) / bv
        q2 = (a.d2 - 2.0 * q1 * b.d1 - q * b.d2) / bv
        return _Jet(scale, q, q1, q2)
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------- functions


@dataclass(frozen=True)
class EntireFunction:
    expression: Node
    display_name: str = ""

    def __post_init__(self):
        if not self.display_name:
            object.__setattr__(self, "display_name", str(self.expression))

    @property
    def has_division(self) -> bool:
        return _has_division(self.expression)

    def compose(self, inner: "EntireFunction") -> "EntireFunction":
        """``self`` after ``inner``: z -> self(inner(z))."""
        return EntireFunction(
            substitute(self.expression, inner.expression),
            f"({self.display_name})∘({inner.display_name})",
        )

    def jets(self, z: np.ndarray) -> tuple[_Jet, np.ndarray]:
        """Vectorized scaled jets; second item flags vanishing denominators."""
        z = np.asarray(z, dtype=np.complex128)
        bad = np.zeros(z.shape, dtype=bool)
        with np.errstate(all="ignore"):
            jet = _eval(self.expression, z, True, bad)
        return _broadcast(jet, z.shape), bad

    def __str__(self) -> str:
        return self.display_name


def _broadcast(jet: _Jet, shape) -> _Jet:
    def b(x):
        return np.broadcast_to(np.asarray(x, dtype=np.complex128), shape)

    return _Jet(None if jet.scale is None else b(jet.scale), b(jet.v), b(jet.d1), b(jet.d2))


def parse_function(text: str) -> EntireFunction:
    return EntireFunction(_Parser(text).parse(), text.strip())


@dataclass(frozen=True)
class FamilyExpZn:
    """f(z) = z * exp(-z**n / n)."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError("n must be a positive integer")

    def expand(self) -> EntireFunction:
        n = self.n
        expr = BinOp("*", Var(), Call("exp", Neg(BinOp("/", Pow(Var(), n), Const(complex(n))))))
        return EntireFunction(expr, f"z*exp(-z^{n}/{n})")


def _as_function(fun) -> EntireFunction:
    if isinstance(fun, FamilyExpZn):
        return fun.expand()
    if isinstance(fun, str):
        return parse_function(fun)
    return fun


def _scalar_jet(fun, z: complex) -> _Jet:
    fun = _as_function(fun)
    with np.errstate(all="ignore"):
        return _eval(fun.expression, complex(z), False, None)


def eval_jet(fun, z: complex) -> Jet2:
    """Return (f(z), f'(z), f''(z))."""
    v, d1, d2 = _scalar_jet(fun, z).materialize()
    return Jet2(complex(v), complex(d1), complex(d2))


def _guarded_ratio(jet: _Jet, z, pole_guard: float):
    if jet.d1 == 0:
        raise DerivativeZero(z)
    log_k = float(jet.log_abs_factor())
    log_guard = math.log(pole_guard)
    log_d1 = log_k + math.log(abs(jet.d1))
    if log_d1 < log_guard and jet.v != 0 and log_k + math.log(abs(jet.v)) > log_guard:
        raise NearPole(z)
    return jet.v / jet.d1


def newton_step(fun, z: complex, pole_guard: float = POLE_GUARD) -> complex:
    """N_f(z) = z - f(z)/f'(z)."""
    jet = _scalar_jet(fun, z)
    return complex(z - _guarded_ratio(jet, z, pole_guard))


def newton_derivative(fun, z: complex, pole_guard: float = POLE_GUARD) -> complex:
    """N_f'(z) = f(z) f''(z) / f'(z)**2."""
    jet = _scalar_jet(fun, z)
    r = _guarded_ratio(jet, z, pole_guard)
    return complex(r * jet.d2 / jet.d1)


def newton_step_and_derivative(fun, z: complex, pole_guard: float = POLE_GUARD) -> tuple[complex, complex]:
    jet = _scalar_jet(fun, z)
    r = _guarded_ratio(jet, z, pole_guard)
    return complex(z - r), complex(r * jet.d2 / jet.d1)


def newton_map_array(fun: EntireFunction, z: np.ndarray, pole_guard: float = POLE_GUARD):
    """Vectorized Newton map.

    Returns ``(image, derivative, pole)`` where ``pole`` marks points where the
    map is undefined (zero or guarded derivative, vanishing denominator,
    non-finite arithmetic). ``image`` is NaN there.
    """
    jet, bad = fun.jets(z)
    with np.errstate(all="ignore"):
        log_k = 0.0 if jet.scale is None else np.real(jet.scale)
        abs_d1 = np.abs(jet.d1)
        abs_v = np.abs(jet.v)
        log_guard = math.log(pole_guard)
        log_d1 = log_k + np.log(abs_d1)
        log_v = log_k + np.log(abs_v)
        pole = bad | (abs_d1 == 0) | ((log_d1 < log_guard) & (abs_v != 0) & (log_v > log_guard))
        d1 = np.where(pole, 1.0, jet.d1)
        r = jet.v / d1
        image = np.asarray(z) - r
        deriv = r * jet.d2 / d1
        pole |= ~np.isfinite(image)
        image = np.where(pole, np.nan, image)
        deriv = np.where(pole, np.nan, deriv)
    return image, deriv, pole


def family_newton_closed_form(n: int, z: complex) -> complex:
    """Newton map of z*exp(-z**n/n): -z**(n+1) / (1 - z**n)."""
    zn = z**n
    den = 1 - zn
    if den == 0:
        raise PoleOfMap(z)
    return -(zn * z) / den
