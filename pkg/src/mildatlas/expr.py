"""Small expression trees over constants, coordinates and parameters.

The same tree is evaluated by three backends (floats, intervals, jets); each
backend supplies the partial primitives through an ``ops`` object, while
``+``/``*``/unary ``-`` go through the operator protocol of the values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Mapping, Union

Number = Union[Fraction, float, int]


class ExprSyntaxError(ValueError):
    pass


class DomainError(ArithmeticError):
    """A partial primitive was evaluated outside its definedness region."""


def as_number(v: Any) -> Number:
    """Normalize ints, floats, decimal strings and "p/q" strings, exactly."""
    if isinstance(v, bool):
        raise TypeError("booleans are not numbers")
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite number {v!r}")
        return v
    if isinstance(v, str):
        s = v.strip()
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed number {v!r}") from exc
    raise TypeError(f"not a number: {v!r}")


def number_to_json(v: Number) -> Union[str, float, int]:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return int(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    return float(v)


def _num_str(v: Number) -> str:
    if isinstance(v, Fraction):
        s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    else:
        s = repr(float(v))
    return f"({s})" if (s.startswith("-") or "/" in s or "e" in s) else s


def is_natural(v: Number) -> bool:
    if isinstance(v, Fraction):
        return v.denominator == 1 and v >= 0
    return float(v).is_integer() and v >= 0


class Expr:
    __slots__ = ()

    # construction sugar
    def __add__(self, o): return Add(self, lift(o))
    def __radd__(self, o): return Add(lift(o), self)
    def __sub__(self, o): return Add(self, Neg(lift(o)))
    def __rsub__(self, o): return Add(lift(o), Neg(self))
    def __mul__(self, o): return Mul(self, lift(o))
    def __rmul__(self, o): return Mul(lift(o), self)
    def __truediv__(self, o): return Mul(self, Recip(lift(o)))
    def __rtruediv__(self, o): return Mul(lift(o), Recip(self))
    def __neg__(self): return Neg(self)
    def __pow__(self, mu): return Pow(self, as_number(mu))

    def children(self) -> tuple["Expr", ...]:
        return ()

    def rebuild(self, kids: tuple["Expr", ...]) -> "Expr":
        return self

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        stack = [self]
        while stack:
            e = stack.pop()
            if isinstance(e, Var):
                out.add(e.name)
            stack.extend(e.children())
        return frozenset(out)

    def subs(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        """Substitute variables by expressions (composition)."""
        if isinstance(self, Var):
            return mapping.get(self.name, self)
        kids = self.children()
        if not kids:
            return self
        return simplify(self.rebuild(tuple(k.subs(mapping) for k in kids)))

    def evaluate(self, env: Mapping[str, Any], ops: "Ops | None" = None) -> Any:
        return _evaluate(self, env, ops or FLOAT_OPS)

    def is_const(self) -> bool:
        return isinstance(self, Const)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Number

    def __str__(self) -> str:
        return _num_str(self.value)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, eq=True)
class Add(Expr):
    a: Expr
    b: Expr

    def children(self): return (self.a, self.b)
    def rebuild(self, k): return Add(*k)
    def __str__(self): return f"({self.a} + {self.b})"


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    a: Expr
    b: Expr

    def children(self): return (self.a, self.b)
    def rebuild(self, k): return Mul(*k)
    def __str__(self): return f"({self.a} * {self.b})"


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    a: Expr

    def children(self): return (self.a,)
    def rebuild(self, k): return Neg(*k)
    def __str__(self): return f"(-{self.a})"


@dataclass(frozen=True, eq=True)
class Recip(Expr):
    a: Expr

    def children(self): return (self.a,)
    def rebuild(self, k): return Recip(*k)
    def __str__(self): return f"(1 / {self.a})"


@dataclass(frozen=True, eq=True)
class Exp(Expr):
    a: Expr

    def children(self): return (self.a,)
    def rebuild(self, k): return Exp(*k)
    def __str__(self): return f"exp({self.a})"


@dataclass(frozen=True, eq=True)
class Log1p(Expr):
    a: Expr

    def children(self): return (self.a,)
    def rebuild(self, k): return Log1p(*k)
    def __str__(self): return f"log1p({self.a})"


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    """u ** mu for a numeric exponent.  Natural mu is a polynomial power;
    anything else needs u > 0 (or u != 0 for negative integers)."""

    a: Expr
    mu: Number

    def children(self): return (self.a,)
    def rebuild(self, k): return Pow(k[0], self.mu)
    def __str__(self): return f"pow({self.a}, {_num_str(self.mu)})"


def lift(v: Any) -> Expr:
    if isinstance(v, Expr):
        return v
    return Const(as_number(v))


ONE = Const(Fraction(1))
ZERO = Const(Fraction(0))


def _fold_num(fn: Callable[..., Number], *vals: Number) -> Number:
    if all(isinstance(v, Fraction) for v in vals):
        return fn(*vals)
    return fn(*(float(v) for v in vals))


def simplify(e: Expr) -> Expr:
    """Constant folding only; no algebraic rewriting."""
    if isinstance(e, Add) and isinstance(e.a, Const) and isinstance(e.b, Const):
        return Const(_fold_num(lambda x, y: x + y, e.a.value, e.b.value))
    if isinstance(e, Mul):
        if isinstance(e.a, Const) and isinstance(e.b, Const):
            return Const(_fold_num(lambda x, y: x * y, e.a.value, e.b.value))
        if e.a == ONE:
            return e.b
        if e.b == ONE:
            return e.a
    if isinstance(e, Neg) and isinstance(e.a, Const):
        return Const(-e.a.value)
    if isinstance(e, Recip) and isinstance(e.a, Const) and e.a.value != 0:
        return Const(_fold_num(lambda x: 1 / x, e.a.value))
    if isinstance(e, Pow):
        if isinstance(e.a, Const) and isinstance(e.mu, Fraction) and e.mu.denominator == 1:
            if e.mu >= 0 or e.a.value != 0:
                return Const(_fold_num(lambda x: x ** int(e.mu), e.a.value))
        if e.mu == 1:
            return e.a
    return e


def monomial(coeff: Expr, exps: Mapping[str, Number]) -> Expr:
    out: Expr = coeff
    for name, mu in exps.items():
        if mu == 0:
            continue
        out = simplify(Mul(out, simplify(Pow(Var(name), mu))))
    return out


# ---------------------------------------------------------------- backends


class Ops:
    """Float backend; interval and jet backends override the primitives."""

    def const(self, c: Number) -> Any:
        return float(c)

    def recip(self, u):
        if u == 0:
            raise DomainError("division by zero")
        return 1.0 / u

    def exp(self, u):
        return math.exp(u)

    def log1p(self, u):
        if u <= -1:
            raise DomainError(f"log1p undefined at {u}")
        return math.log1p(u)

    def ipow(self, u, n: int):
        return u ** n

    def rpow(self, u, mu: float):
        if u < 0 or (u == 0 and mu <= 0):
            raise DomainError(f"real power {mu} of base {u}")
        return u ** mu


FLOAT_OPS = Ops()


def _evaluate(e: Expr, env: Mapping[str, Any], ops: Ops) -> Any:
    if isinstance(e, Const):
        return ops.const(e.value)
    if isinstance(e, Var):
        try:
            v = env[e.name]
        except KeyError:
            raise KeyError(f"unbound variable {e.name}") from None
        return ops.const(v) if isinstance(v, (int, Fraction)) else v
    if isinstance(e, Add):
        return _evaluate(e.a, env, ops) + _evaluate(e.b, env, ops)
    if isinstance(e, Mul):
        return _evaluate(e.a, env, ops) * _evaluate(e.b, env, ops)
    if isinstance(e, Neg):
        return -_evaluate(e.a, env, ops)
    if isinstance(e, Recip):
        return ops.recip(_evaluate(e.a, env, ops))
    if isinstance(e, Exp):
        return ops.exp(_evaluate(e.a, env, ops))
    if isinstance(e, Log1p):
        return ops.log1p(_evaluate(e.a, env, ops))
    if isinstance(e, Pow):
        u = _evaluate(e.a, env, ops)
        mu = e.mu
        if isinstance(mu, Fraction) and mu.denominator == 1 or float(mu).is_integer():
            n = int(mu)
            if n >= 0:
                return ops.ipow(u, n)
            return ops.recip(ops.ipow(u, -n))
        return ops.rpow(u, mu)
    raise TypeError(f"unknown node {type(e).__name__}")


# ------------------------------------------------------------------ parser

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")
_FUNCS = {"exp": Exp, "log1p": Log1p}


def _tokenize(s: str) -> list[tuple[str, str]]:
    toks = []
    pos = 0
    s = s.rstrip()
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            raise ExprSyntaxError(f"bad character at {pos} in {s!r}")
        num, ident, op = m.groups()
        if num is not None:
            toks.append(("num", num))
        elif ident is not None:
            toks.append(("id", ident))
        else:
            if op not in "+-*/^(),":
                raise ExprSyntaxError(f"unexpected {op!r} in {s!r}")
            toks.append(("op", op))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str, allowed: Callable[[str], bool] | None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, val=None):
        tok = self.peek()
        if tok[0] is None or (val is not None and tok[1] != val):
            raise ExprSyntaxError(f"expected {val or 'token'} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        if self.i != len(self.toks):
            raise ExprSyntaxError(f"trailing input in {self.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            e = simplify(Add(e, rhs) if op == "+" else Add(e, simplify(Neg(rhs))))
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            e = simplify(Mul(e, rhs) if op == "*" else Mul(e, simplify(Recip(rhs))))
        return e

    def unary(self) -> Expr:
        if self.peek() == ("op", "-"):
            self.take()
            return simplify(Neg(self.unary()))
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def _const_exponent(self, e: Expr) -> Number:
        if not isinstance(e, Const):
            raise ExprSyntaxError(f"exponent must be a numeric constant in {self.text!r}")
        return e.value

    def power(self) -> Expr:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            mu = self._const_exponent(self.unary())
            return simplify(Pow(base, mu))
        return base

    def atom(self) -> Expr:
        kind, val = self.take()
        if kind == "num":
            return Const(Fraction(val))
        if kind == "id":
            if val == "pow":
                self.take("(")
                u = self.expr()
                self.take(",")
                mu = self._const_exponent(self.expr())
                self.take(")")
                return simplify(Pow(u, mu))
            if val in _FUNCS:
                self.take("(")
                u = self.expr()
                self.take(")")
                return simplify(_FUNCS[val](u))
            if self.allowed is not None and not self.allowed(val):
                raise ExprSyntaxError(f"identifier {val!r} not allowed here")
            return Var(val)
        if val == "(":
            e = self.expr()
            self.take(")")
            return e
        raise ExprSyntaxError(f"unexpected {val!r} in {self.text!r}")


def parse_expr(text: str, allowed: Callable[[str], bool] | None = None) -> Expr:
    """Parse the expression grammar: + - * / ^, exp, log1p, pow(u, mu)."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression")
    return _Parser(text, allowed).parse()
