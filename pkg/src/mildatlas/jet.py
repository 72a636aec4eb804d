"""Truncated multivariate Taylor jets.

A jet stores normalized coefficients f^(nu)(x)/nu! for all |nu| <= r, laid
out in graded-lex order (see :func:`multiindex.enumerate_up_to`).  The
coefficient array may carry trailing batch axes, so one jet can hold the
expansions at many base points at once; every operation broadcasts over them.

Two numeric modes share the code: float64 arrays, and object arrays of
``Fraction`` for exact polynomial computations.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Any, Mapping, Sequence

import numpy as np

from . import multiindex as mi
from .expr import DomainError, Expr, Ops, _evaluate

BASE_POINT_TOL = 1e-12
_TINY = 1e-300


class JetShapeError(ValueError):
    pass


class _Layout:
    def __init__(self, d: int, r: int):
        self.d, self.r = d, r
        self.indices = mi.enumerate_up_to(d, r)
        self.pos = {nu: i for i, nu in enumerate(self.indices)}
        self.size = len(self.indices)
        self.orders = np.array([sum(nu) for nu in self.indices])
        self.factorials = [mi.mfactorial(nu) for nu in self.indices]
        # nu!/|nu|!, the weight turning normalized coefficients into norm terms
        self.norm_weights = np.array(
            [mi.mfactorial(nu) / math.factorial(sum(nu)) for nu in self.indices])
        pairs = []
        for k, nu in enumerate(self.indices):
            for a, b in _splits(nu):
                pairs.append((k, self.pos[a], self.pos[b]))
        pairs.sort()
        self.pair_k = np.array([p[0] for p in pairs])
        self.pair_i = np.array([p[1] for p in pairs])
        self.pair_j = np.array([p[2] for p in pairs])
        self.pair_starts = np.searchsorted(self.pair_k, np.arange(self.size))
        self.unit = [self.pos[tuple(1 if q == i else 0 for q in range(d))] if r >= 1 else None
                     for i in range(d)]


def _splits(nu):
    from itertools import product
    for a in product(*(range(k + 1) for k in nu)):
        yield a, tuple(x - y for x, y in zip(nu, a))


@lru_cache(maxsize=None)
def layout(d: int, r: int) -> _Layout:
    return _Layout(d, r)


class Jet:
    """Truncated Taylor expansion of a scalar function at a point."""

    __slots__ = ("coeffs", "arity", "order", "point")
    __array_priority__ = 1000

    def __init__(self, coeffs, arity: int, order: int, point=None):
        self.coeffs = coeffs
        self.arity = arity
        self.order = order
        self.point = point
        if coeffs.shape[0] != layout(arity, order).size:
            raise JetShapeError("coefficient count does not match (arity, order)")

    # ------------------------------------------------------------ builders
    @classmethod
    def constant(cls, c, arity: int, order: int, point=None, batch=(), exact=False) -> "Jet":
        lay = layout(arity, order)
        co = np.zeros((lay.size,) + tuple(batch), dtype=object if exact else float)
        if exact:
            co[...] = Fraction(0)
        co[0] = c
        return cls(co, arity, order, point)

    @classmethod
    def variable(cls, i: int, point, order: int, exact=False) -> "Jet":
        pt = np.asarray(point, dtype=object if exact else float)
        d = pt.shape[0]
        j = cls.constant(pt[i], d, order, pt, pt.shape[1:], exact)
        if order >= 1:
            j.coeffs[layout(d, order).unit[i]] = 1
        return j

    @property
    def layout(self) -> _Layout:
        return layout(self.arity, self.order)

    @property
    def exact(self) -> bool:
        return self.coeffs.dtype == object

    @property
    def value(self):
        return self.coeffs[0]

    def coeff(self, nu) -> Any:
        return self.coeffs[self.layout.pos[tuple(nu)]]

    def derivative(self, nu) -> Any:
        """f^(nu)(x) = nu! * coeff[nu]."""
        return mi.mfactorial(nu) * self.coeff(nu)

    def derivatives(self):
        lay = self.layout
        f = np.array(lay.factorials, dtype=object if self.exact else float)
        return self.coeffs * f.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))

    def _like(self, coeffs) -> "Jet":
        return Jet(coeffs, self.arity, self.order, self.point)

    def _check(self, other: "Jet") -> None:
        if other.arity != self.arity or other.order != self.order:
            raise JetShapeError("jets of different arity/order")
        if self.point is not None and other.point is not None:
            if not _points_close(self.point, other.point):
                raise JetShapeError("jets at different base points")

    # ---------------------------------------------------------- arithmetic
    def __add__(self, o):
        if isinstance(o, Jet):
            self._check(o)
            return self._like(self.coeffs + o.coeffs)
        c = self.coeffs.copy()
        c[0] = c[0] + o
        return self._like(c)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            return multiply(self, o)
        return self._like(self.coeffs * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * reciprocal(o)
        return self * (1 / o)

    def __rtruediv__(self, o):
        return reciprocal(self) * o

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)) or (isinstance(n, Fraction) and n.denominator == 1):
            n = int(n)
            return int_power(self, n) if n >= 0 else reciprocal(int_power(self, -n))
        return real_power(self, n)

    def nilpotent(self) -> "Jet":
        c = self.coeffs.copy()
        c[0] = 0
        return self._like(c)

    def __repr__(self) -> str:
        return f"Jet(arity={self.arity}, order={self.order}, coeffs={self.coeffs!r})"


def _points_close(p, q) -> bool:
    try:
        return bool(np.all(np.abs(np.asarray(p, float) - np.asarray(q, float)) <= BASE_POINT_TOL))
    except (TypeError, ValueError):
        return False


def multiply(a: Jet, b: Jet) -> Jet:
    """Truncated product: c[nu] = sum over nu1 + nu2 = nu of a[nu1] b[nu2]."""
    a._check(b)
    lay = a.layout
    terms = a.coeffs[lay.pair_i] * b.coeffs[lay.pair_j]
    return a._like(np.add.reduceat(terms, lay.pair_starts, axis=0))


def int_power(a: Jet, n: int) -> Jet:
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    if result is None:
        return Jet.constant(1, a.arity, a.order, a.point, a.coeffs.shape[1:], a.exact)
    return result


def apply_series(u: Jet, taylor) -> Jet:
    """sum_k taylor[k] * (u - u(x))^k, Horner form; taylor[k] may be arrays."""
    h = u.nilpotent()
    out = Jet.constant(0, u.arity, u.order, u.point, u.coeffs.shape[1:], u.exact)
    out.coeffs[0] = taylor[u.order]
    for k in range(u.order - 1, -1, -1):
        out = out * h + taylor[k]
    return out


def _base(u: Jet) -> np.ndarray:
    return np.asarray(u.coeffs[0], dtype=float)


def exp(u: Jet) -> Jet:
    e = np.exp(_base(u))
    return apply_series(u, [e / math.factorial(k) for k in range(u.order + 1)])


def log1p(u: Jet) -> Jet:
    v = _base(u)
    if np.any(v <= -1):
        raise DomainError("log1p evaluated at or below -1")
    w = 1.0 + v
    cs = [np.log1p(v)] + [(-1) ** (k - 1) / (k * w ** k) for k in range(1, u.order + 1)]
    return apply_series(u, cs)


def reciprocal(u: Jet) -> Jet:
    if u.exact:
        v0 = u.coeffs[0]
        if np.any(np.asarray(v0 == 0)):
            raise DomainError("division by zero")
        inv = 1 / v0 if not isinstance(v0, np.ndarray) else np.array([1 / x for x in v0.flat], dtype=object).reshape(v0.shape)
        return apply_series(u, [(-1) ** k * inv ** (k + 1) for k in range(u.order + 1)])
    v = _base(u)
    if np.any(np.abs(v) < _TINY):
        raise DomainError("division by (numerically) zero")
    return apply_series(u, [(-1) ** k / v ** (k + 1) for k in range(u.order + 1)])


def gen_binomial(mu, k: int):
    out = 1.0
    for i in range(k):
        out *= (mu - i) / (i + 1)
    return out


def real_power(u: Jet, mu) -> Jet:
    """u ** mu via the generalized binomial series; needs u > 0."""
    v = _base(u)
    if np.any(v <= 0):
        raise DomainError("real power of a non-positive base")
    mu = float(mu)
    return apply_series(u, [gen_binomial(mu, k) * v ** (mu - k) for k in range(u.order + 1)])


class JetOps(Ops):
    def __init__(self, exact: bool = False):
        self.exact = exact

    def const(self, c):
        return Fraction(c) if self.exact else float(c)

    def recip(self, u):
        return reciprocal(u) if isinstance(u, Jet) else super().recip(u)

    def exp(self, u):
        return exp(u) if isinstance(u, Jet) else math.exp(u)

    def log1p(self, u):
        return log1p(u) if isinstance(u, Jet) else super().log1p(u)

    def ipow(self, u, n):
        return int_power(u, n) if isinstance(u, Jet) else u ** n

    def rpow(self, u, mu):
        if self.exact:
            raise DomainError("real powers are not available in exact mode")
        return real_power(u, mu) if isinstance(u, Jet) else super().rpow(u, float(mu))


def eval_jet(e: Expr, point, r: int, variables: Sequence[str] | None = None,
             env: Mapping[str, Any] | None = None, exact: bool = False) -> Jet:
    """Jet of ``e`` at ``point`` in the given variables (others via ``env``).

    ``point`` has shape (d,) or (d, batch...).
    """
    if variables is None:
        variables = sorted(v for v in e.variables() if v.startswith("x"))
    pt = np.asarray(point, dtype=object if exact else float)
    if pt.ndim == 0:
        pt = pt.reshape(1)
    if pt.shape[0] != len(variables):
        raise JetShapeError("point length does not match the variable list")
    full = dict(env or {})
    for i, name in enumerate(variables):
        full[name] = Jet.variable(i, pt, r, exact)
    return as_jet(_evaluate(e, full, JetOps(exact)), len(variables), r, pt, exact)


def as_jet(v, arity: int, order: int, point, exact=False) -> Jet:
    if isinstance(v, Jet):
        return v
    pt = np.asarray(point)
    return Jet.constant(v, arity, order, point, pt.shape[1:], exact)


def monomial_jet(mu: Sequence[float], x, r: int) -> Jet:
    """Closed-form jet of x^mu: coeff[nu] = prod_i C(mu_i, nu_i) x_i^(mu_i - nu_i)."""
    xs = np.asarray(x, dtype=float)
    if xs.ndim == 0:
        xs = xs.reshape(1)
    if np.any(xs <= 0):
        raise DomainError("monomial jets need a strictly positive base point")
    d = xs.shape[0]
    lay = layout(d, r)
    co = np.empty((lay.size,) + xs.shape[1:])
    for k, nu in enumerate(lay.indices):
        val = 1.0
        for i in range(d):
            val = val * gen_binomial(float(mu[i]), nu[i]) * xs[i] ** (float(mu[i]) - nu[i])
        co[k] = val
    return Jet(co, d, r, xs)


def cr_norm(j: Jet):
    """max over |nu| <= r of |f^(nu)(x)| / |nu|! (per batch element)."""
    w = j.layout.norm_weights.reshape((-1,) + (1,) * (j.coeffs.ndim - 1))
    return np.max(np.abs(np.asarray(j.coeffs, dtype=float)) * w, axis=0)


# ------------------------------------------------------------ composition


class _FaaTable:
    """Flattened Faa di Bruno sum for outer arity d, inner arity e, order r."""

    def __init__(self, d: int, e: int, r: int):
        lay_d, lay_e = layout(d, r), layout(e, r)
        nus, lams, weights, fi, fl, fp = [], [], [], [], [], []
        maxf = 1
        for nu in lay_e.indices:
            n = sum(nu)
            if n == 0:
                continue
            for lam in lay_d.indices:
                if not 1 <= sum(lam) <= n:
                    continue
                for part in mi.faa_partitions(nu, lam):
                    # nu! prod_j 1/(k_j! (l_j!)^{|k_j|}), then / nu! for the coefficient
                    den = 1
                    idx = []
                    for kj, lj in zip(part.k, part.l):
                        den *= mi.mfactorial(kj) * mi.mfactorial(lj) ** sum(kj)
                        for i in range(d):
                            if kj[i]:
                                idx.append((i, lay_e.pos[lj], kj[i]))
                    w = Fraction(mi.mfactorial(nu), den) / mi.mfactorial(nu)
                    nus.append(lay_e.pos[nu])
                    lams.append(lay_d.pos[lam])
                    weights.append(w)
                    fi.append([t[0] for t in idx])
                    fl.append([t[1] for t in idx])
                    fp.append([t[2] for t in idx])
                    maxf = max(maxf, len(idx))
        order_ = np.argsort(nus, kind="stable")
        pad = lambda rows, v: np.array([rows[o] + [v] * (maxf - len(rows[o])) for o in order_], dtype=int)
        self.nu = np.array(nus)[order_]
        self.lam = np.array(lams)[order_]
        self.weights = np.array([weights[o] for o in order_], dtype=object)
        self.fweights = np.array([float(w) for w in self.weights])
        self.fi, self.fl, self.fp = pad(fi, 0), pad(fl, 0), pad(fp, 0)
        self.starts = np.searchsorted(self.nu, np.arange(1, lay_e.size))
        self.r, self.d, self.e = r, d, e


@lru_cache(maxsize=None)
def _faa_table(d: int, e: int, r: int) -> _FaaTable:
    return _FaaTable(d, e, r)


def _check_composable(f_jet: Jet, g_jets: Sequence[Jet]) -> None:
    if len(g_jets) != f_jet.arity:
        raise JetShapeError("need one inner jet per outer variable")
    e, r = g_jets[0].arity, g_jets[0].order
    for g in g_jets:
        if g.arity != e or g.order != r:
            raise JetShapeError("inner jets must share arity and order")
    if f_jet.order != r:
        raise JetShapeError("outer and inner orders differ")
    if f_jet.point is not None:
        vals = np.stack([np.asarray(g.coeffs[0], dtype=float) for g in g_jets])
        if not _points_close(f_jet.point, vals):
            raise JetShapeError("outer jet is not based at the inner value vector")


def compose_faa(f_jet: Jet, g_jets: Sequence[Jet]) -> Jet:
    """Jet of f o g from the multivariate Faa di Bruno sum over p_s(nu, lam)."""
    _check_composable(f_jet, g_jets)
    d, e, r = f_jet.arity, g_jets[0].arity, f_jet.order
    exact = f_jet.exact
    lay_e = layout(e, r)
    batch = np.broadcast_shapes(f_jet.coeffs.shape[1:], *(g.coeffs.shape[1:] for g in g_jets))
    dtype = object if exact else float
    out = np.zeros((lay_e.size,) + batch, dtype=dtype)
    out[0] = f_jet.coeffs[0]
    if r == 0:
        return Jet(out, e, r, g_jets[0].point)
    tab = _faa_table(d, e, r)
    fd = np.broadcast_to(f_jet.derivatives(), (f_jet.coeffs.shape[0],) + batch)
    gd = np.stack([np.broadcast_to(g.derivatives(), (lay_e.size,) + batch) for g in g_jets])
    # pw[i, p, l] = (g_i^(l))^p
    pw = np.stack([gd ** p for p in range(r + 1)], axis=1)
    if exact:
        pw[:, 0] = Fraction(1)
    fac = pw[tab.fi, tab.fp, tab.fl]  # (terms, maxf, batch...)
    w = (tab.weights if exact else tab.fweights).reshape((-1,) + (1,) * len(batch))
    terms = w * fd[tab.lam] * np.prod(fac, axis=1)
    out[1:] = np.add.reduceat(terms, tab.starts, axis=0)
    return Jet(out, e, r, g_jets[0].point)


def compose_series(f_jet: Jet, g_jets: Sequence[Jet]) -> Jet:
    """Independent oracle: substitute the shifted inner series into f's
    Taylor polynomial and re-truncate."""
    _check_composable(f_jet, g_jets)
    d, r = f_jet.arity, f_jet.order
    hs = [g.nilpotent() for g in g_jets]
    powers = []
    for h in hs:
        row = [Jet.constant(1, h.arity, r, h.point, h.coeffs.shape[1:], h.exact)]
        for _ in range(r):
            row.append(row[-1] * h)
        powers.append(row)
    lay_d = layout(d, r)
    acc = None
    for k, lam in enumerate(lay_d.indices):
        term = None
        for i in range(d):
            if lam[i]:
                term = powers[i][lam[i]] if term is None else term * powers[i][lam[i]]
        if term is None:
            term = powers[0][0]
        term = term * f_jet.coeffs[k]
        acc = term if acc is None else acc + term
    return acc
