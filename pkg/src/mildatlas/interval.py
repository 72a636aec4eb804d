"""Outward-rounded interval enclosures of expressions over boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

from .expr import DomainError, Expr, Ops, _evaluate

_INF = math.inf


def _down(x: float) -> float:
    return math.nextafter(x, -_INF) if math.isfinite(x) else x


def _up(x: float) -> float:
    return math.nextafter(x, _INF) if math.isfinite(x) else x


class UnitCertificationError(DomainError):
    """The enclosure of a unit straddles zero."""


def _from_number(c) -> "Interval":
    if isinstance(c, Fraction):
        f = float(c)
        if Fraction(f) == c:
            return Interval(f, f)
        return Interval(_down(f), _up(f))
    f = float(c)
    return Interval(f, f)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(float(x), float(x))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        if self.lo <= 0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def split(self) -> tuple["Interval", "Interval"]:
        m = self.mid
        return Interval(self.lo, m), Interval(m, self.hi)

    def _coerce(self, o) -> "Interval":
        return o if isinstance(o, Interval) else _from_number(o)

    def __add__(self, o):
        o = self._coerce(o)
        return Interval(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, o):
        return self + (-self._coerce(o))

    def __rsub__(self, o):
        return self._coerce(o) - self

    def __mul__(self, o):
        o = self._coerce(o)
        ps = [a * b for a in (self.lo, self.hi) for b in (o.lo, o.hi)]
        ps = [0.0 if math.isnan(p) else p for p in ps]  # 0 * inf
        return Interval(_down(min(ps)), _up(max(ps)))

    __rmul__ = __mul__

    def recip(self) -> "Interval":
        if self.lo <= 0 <= self.hi:
            raise DomainError(f"reciprocal of an interval containing 0: {self}")
        return Interval(_down(1.0 / self.hi), _up(1.0 / self.lo))

    def __truediv__(self, o):
        return self * self._coerce(o).recip()

    def __rtruediv__(self, o):
        return self._coerce(o) * self.recip()

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


def _ipow(u: Interval, n: int) -> Interval:
    if n == 0:
        return Interval(1.0, 1.0)
    if n % 2 == 1 or u.lo >= 0:
        lo, hi = u.lo ** n, u.hi ** n
    elif u.hi <= 0:
        lo, hi = u.hi ** n, u.lo ** n
    else:
        lo, hi = 0.0, max(u.lo ** n, u.hi ** n)
    if n % 2 == 0 and u.lo <= 0 <= u.hi:
        return Interval(0.0, _up(hi))
    return Interval(_down(lo), _up(hi))


def _rpow(u: Interval, mu: float) -> Interval:
    if mu > 0:
        if u.lo < 0:
            raise DomainError(f"real power {mu} of an interval reaching below 0: {u}")
        a, b = u.lo ** mu, u.hi ** mu
    else:
        if u.lo <= 0:
            raise DomainError(f"real power {mu} of an interval touching 0: {u}")
        a, b = u.hi ** mu, u.lo ** mu
    return Interval(max(0.0, _down(a)), _up(b))


class IntervalOps(Ops):
    def const(self, c):
        return _from_number(c)

    def recip(self, u):
        return u.recip()

    def exp(self, u):
        hi = math.exp(u.hi) if u.hi < 709 else _INF
        return Interval(max(0.0, _down(math.exp(u.lo))), _up(hi))

    def log1p(self, u):
        if u.lo <= -1:
            raise DomainError(f"log1p of an interval reaching -1: {u}")
        return Interval(_down(math.log1p(u.lo)), _up(math.log1p(u.hi)))

    def ipow(self, u, n):
        return _ipow(u, n)

    def rpow(self, u, mu):
        return _rpow(u, float(mu))


INTERVAL_OPS = IntervalOps()


class Box(dict):
    """Mapping variable name -> Interval; non-empty by construction."""

    def widest(self) -> str:
        return max(sorted(self), key=lambda k: self[k].width)

    def bisect(self, name: str | None = None) -> tuple["Box", "Box"]:
        name = name or self.widest()
        a, b = self[name].split()
        left, right = Box(self), Box(self)
        left[name], right[name] = a, b
        return left, right

    def midpoint(self) -> dict[str, float]:
        return {k: v.mid for k, v in self.items()}


def box(**bounds) -> Box:
    return Box({k: v if isinstance(v, Interval) else Interval(float(v[0]), float(v[1]))
                for k, v in bounds.items()})


def _as_env(b: Mapping, extra: Mapping | None) -> dict:
    env = {}
    for k, v in {**(extra or {}), **b}.items():
        env[k] = v if isinstance(v, Interval) else _from_number(v)
    return env


def enclose(e: Expr, b: Mapping, params: Mapping | None = None) -> Interval:
    """Natural interval extension of ``e`` over box ``b``."""
    return _evaluate(e, _as_env(b, params), INTERVAL_OPS)


def _leaves(e: Expr, b: Box, params, depth: int, need) -> Iterator[Interval]:
    """Enclosures over a bisection of b, refining boxes where ``need`` says so."""
    try:
        iv = enclose(e, b, params)
        if depth == 0 or not need(iv) or not b:
            yield iv
            return
    except DomainError:
        if depth == 0 or not b:
            raise
    l, r = b.bisect()
    yield from _leaves(e, l, params, depth - 1, need)
    yield from _leaves(e, r, params, depth - 1, need)


def certify_unit(e: Expr, b: Mapping, params: Mapping | None = None,
                 depth: int = 8) -> tuple[float, float]:
    """Certified (delta, M) with 0 < delta <= |e| <= M on b."""
    bb = Box(b)
    try:
        parts = list(_leaves(e, bb, params, depth, lambda iv: iv.lo <= 0 <= iv.hi))
    except DomainError as exc:
        raise UnitCertificationError(f"cannot enclose unit: {exc}") from exc
    if any(iv.lo <= 0 <= iv.hi for iv in parts):
        raise UnitCertificationError(f"cannot certify non-vanishing of {e} on {dict(bb)}")
    if not (all(iv.lo > 0 for iv in parts) or all(iv.hi < 0 for iv in parts)):
        raise UnitCertificationError(f"{e} changes sign on {dict(bb)}")
    return min(iv.mig() for iv in parts), max(iv.mag() for iv in parts)


def sup_abs(e: Expr, b: Mapping, params: Mapping | None = None, depth: int = 0) -> float:
    """Certified upper bound for sup |e| over b (bisection optional)."""
    if depth == 0:
        return enclose(e, b, params).mag()
    parts = _leaves(e, Box(b), params, depth, lambda iv: True)
    return max(iv.mag() for iv in parts)


def sup_abs_union(e: Expr, boxes, params: Mapping | None = None) -> float:
    return max(enclose(e, b, params).mag() for b in boxes)


def enclose_union(e: Expr, boxes, params: Mapping | None = None) -> Interval:
    out = None
    for b in boxes:
        iv = enclose(e, b, params)
        out = iv if out is None else out.hull(iv)
    return out
