"""Mildness certificates and the rules that propagate them.

A :class:`MildCert` asserts, for every component of the function it is
attached to and every |nu| <= order::

    |f^(nu)(x)| <= B^(C+1) A^|nu| |nu|!^(C+1)          (times 1/x^nu if weak)

Constant formulas round their outputs up so certificates stay conservative
in floating point.  Where the formula is rational (integer C, natural
exponents) it is evaluated exactly and rounded up once.
"""

from __future__ import annotations

import contextlib
import contextvars
import functools
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .expr import Add, Const, Exp, Expr, Log1p, Mul, Neg, Pow, Recip, Var, is_natural
from .interval import Box, Interval, enclose

INF = math.inf


class CertificateError(ValueError):
    """A precondition of a certificate rule failed."""


class MissingDerivativeCertificates(CertificateError):
    pass


def _up(x: float) -> float:
    return math.nextafter(x, INF) if math.isfinite(x) and x != 0 else x


def _down(x: float) -> float:
    return math.nextafter(x, -INF) if math.isfinite(x) and x != 0 else x


def _ceil_float(q: Fraction) -> float:
    """Smallest float >= q."""
    f = float(q)
    return math.nextafter(f, INF) if Fraction(f) < q else f


@dataclass(frozen=True)
class MildCert:
    A: float
    B: float
    C: float = 0.0
    order: float = INF
    weak: bool = False
    arity: int = 1

    def __post_init__(self):
        if not (self.A > 0 and math.isfinite(self.A)):
            raise CertificateError(f"A must be a positive finite real, got {self.A}")
        # B == 0 is allowed for identically zero functions
        if not (self.B >= 0 and math.isfinite(self.B)):
            raise CertificateError(f"B must be a non-negative finite real, got {self.B}")
        if self.C < 0:
            raise CertificateError("C must be >= 0")
        if self.order != INF and (self.order < 0 or int(self.order) != self.order):
            raise CertificateError("order must be a natural number or inf")

    def bound(self, k: int) -> float:
        """Right-hand side for derivatives of order |nu| = k (weak factor excluded)."""
        c1 = self.C + 1
        return self.B ** c1 * self.A ** k * math.factorial(k) ** c1

    def log_bound(self, k: int) -> float:
        c1 = self.C + 1
        if self.B == 0:
            return -INF
        return c1 * math.log(self.B) + k * math.log(self.A) + c1 * math.lgamma(k + 1)

    def to_json(self) -> dict:
        return {"A": self.A, "B": self.B, "C": self.C,
                "order": "inf" if self.order == INF else int(self.order),
                "weak": self.weak, "arity": self.arity}

    @classmethod
    def from_json(cls, doc: Mapping) -> "MildCert":
        order = doc.get("order", "inf")
        return cls(float(doc["A"]), float(doc["B"]), float(doc.get("C", 0.0)),
                   INF if order in ("inf", None) else int(order),
                   bool(doc.get("weak", False)), int(doc.get("arity", 1)))


@dataclass(frozen=True)
class GevreyCert:
    M: float
    R: float
    alpha: float

    def __post_init__(self):
        if self.M <= 0 or self.R <= 0 or self.alpha < 1:
            raise CertificateError("Gevrey constants need M, R > 0 and alpha >= 1")


# ------------------------------------------------------------------ audit

_AUDIT: contextvars.ContextVar[list | None] = contextvars.ContextVar("mildatlas_audit", default=None)


@contextlib.contextmanager
def audit():
    """Record every certificate rule applied inside the block."""
    log: list[dict] = []
    token = _AUDIT.set(log)
    try:
        yield log
    finally:
        _AUDIT.reset(token)


def _jsonable(v: Any) -> Any:
    if isinstance(v, MildCert):
        return v.to_json()
    if isinstance(v, GevreyCert):
        return asdict(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (int, float, str, bool)) or v is None:
        return v
    return str(v)


def _audited(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        out = fn(*args, **kwargs)
        log = _AUDIT.get()
        if log is not None:
            log.append({"op": fn.__name__, "inputs": _jsonable(list(args)),
                        "kwargs": _jsonable(kwargs), "output": _jsonable(out)})
        return out
    return wrapper


# -------------------------------------------------------------- conversions

def to_gevrey(c: MildCert) -> GevreyCert:
    if c.weak:
        raise CertificateError("weak certificates have no Gevrey counterpart")
    return GevreyCert(M=c.B, R=c.A ** (-1.0 / (c.C + 1)), alpha=c.C + 1)


def from_gevrey(g: GevreyCert, order: float = INF, arity: int = 1) -> MildCert:
    return MildCert(A=g.R ** (-g.alpha), B=g.M, C=g.alpha - 1, order=order, arity=arity)


# ------------------------------------------------------------------- rules

def compose_constants(A_f: float, B_f: float, A_g: float, B_g: float, C: float, d: int) -> tuple[float, float]:
    """(A, B) with A = A_f A_g (A_f^(-1/(C+1)) + d B_g)^(C+1) and
    B = d B_f B_g / (A_f^(-1/(C+1)) + d B_g); these bound |nu| >= 1."""
    if C == 0:
        af, ag, bf, bg = map(Fraction, (A_f, A_g, B_f, B_g))
        den = 1 + d * af * bg
        return _ceil_float(ag * den), _ceil_float(d * af * bf * bg / den)
    c1 = C + 1
    s = A_f ** (-1.0 / c1) + d * B_g
    return _up(A_f * A_g * s ** c1), _up(d * B_f * B_g / s)


def _composed(f: MildCert, g: MildCert, weak: bool) -> MildCert:
    if f.weak:
        raise CertificateError("outer function of a composition must be (non-weakly) mild")
    if f.C != g.C:
        raise CertificateError(f"C mismatch ({f.C} vs {g.C}); lift first")
    A, _ = compose_constants(f.A, f.B, g.A, g.B, f.C, f.arity)
    # the formula B only covers |nu| >= 1; at nu = 0 the value of f o g is
    # bounded by B_f, which dominates it
    return MildCert(A=A, B=f.B, C=f.C, order=min(f.order, g.order), weak=weak, arity=g.arity)


@_audited
def compose(f: MildCert, g: MildCert) -> MildCert:
    """Certificate of f o g, g a (vector) map into the domain of f (arity d = f.arity)."""
    if g.weak:
        raise CertificateError("inner map is weak; use compose_weak")
    return _composed(f, g, weak=False)


@_audited
def compose_weak(f: MildCert, g: MildCert) -> MildCert:
    if not g.weak:
        raise CertificateError("compose_weak expects a weak inner certificate")
    return _composed(f, g, weak=True)


def unify(certs: Sequence[MildCert]) -> MildCert:
    """Componentwise max of A and B (sound since bounds are monotone in both)."""
    certs = [c for c in certs if c is not None]
    if not certs:
        raise CertificateError("nothing to unify")
    weak = {c.weak for c in certs}
    if len(weak) != 1:
        raise CertificateError("cannot mix weak and non-weak certificates")
    C = max(c.C for c in certs)
    certs = [lift_C(c, C) if c.C != C else c for c in certs]
    return MildCert(A=max(c.A for c in certs), B=max(c.B for c in certs), C=C,
                    order=min(c.order for c in certs), weak=weak.pop(),
                    arity=max(c.arity for c in certs))


@_audited
def product(certs: Sequence[MildCert]) -> MildCert:
    """l factors give (l max A_i, prod B_i, C); with a common B this is (l A, B^l, C).

    B_i^(C+1) factors out of each Leibniz term, so unequal B_i need no unifying.
    """
    if not certs:
        raise CertificateError("empty product")
    if len(certs) == 1:
        return certs[0]
    u = unify(certs)
    if u.C != min(c.C for c in certs):
        certs = [lift_C(c, u.C) if c.C != u.C else c for c in certs]
    B = math.prod(Fraction(c.B) for c in certs)
    return replace(u, A=_ceil_float(len(certs) * Fraction(u.A)), B=_ceil_float(B))


@_audited
def sum_(certs: Sequence[MildCert]) -> MildCert:
    """A' = max A_i, B' = (sum B_i^(C+1))^(1/(C+1))."""
    certs = list(certs)
    if not certs:
        raise CertificateError("empty sum")
    if len(certs) == 1:
        return certs[0]
    if len({c.weak for c in certs}) != 1:
        raise CertificateError("cannot add weak and non-weak certificates")
    C = max(c.C for c in certs)
    if any(c.C != C for c in certs):
        raise CertificateError("C mismatch in sum; lift first")
    c1 = C + 1
    if C == 0:
        B = _ceil_float(sum(Fraction(c.B) for c in certs))
    else:
        B = _up(sum(c.B ** c1 for c in certs) ** (1.0 / c1))
    return MildCert(A=max(c.A for c in certs), B=B, C=C,
                    order=min(c.order for c in certs), weak=certs[0].weak,
                    arity=max(c.arity for c in certs))


@_audited
def lift_C(c: MildCert, C2: float) -> MildCert:
    if C2 < c.C:
        raise CertificateError("can only raise C")
    return replace(c, B=max(c.B, 1.0), C=C2)


def scale(c: MildCert, factor: float) -> MildCert:
    """Certificate of factor * f."""
    if c.C == 0:
        return replace(c, B=_ceil_float(Fraction(c.B) * abs(Fraction(factor))))
    return replace(c, B=_up(c.B * abs(factor) ** (1.0 / (c.C + 1))))


def derivative_cert(c: MildCert) -> MildCert:
    """Certificate for any first partial derivative of a mild function.

    B^(C+1) A^(k+1) (k+1)!^(C+1) <= (B A^(1/(C+1)))^(C+1) (2^(C+1) A)^k k!^(C+1).
    """
    if c.order == 0:
        raise CertificateError("order-0 certificate says nothing about derivatives")
    c1 = c.C + 1
    B = _ceil_float(Fraction(c.B) * Fraction(c.A)) if c.C == 0 else _up(c.B * c.A ** (1.0 / c1))
    return replace(c, A=_ceil_float(2 ** Fraction(c1) * Fraction(c.A)) if float(c1).is_integer()
                   else _up(2 ** c1 * c.A), B=B,
                   order=c.order - 1 if c.order != INF else INF)


@_audited
def fold_B(c: MildCert, value_bound: float) -> MildCert:
    """Renormalize to B <= 1 given a certified |f| <= value_bound <= 1.

    For |nu| >= 1, B^(C+1) A^k <= (B^(C+1) A)^k when B >= 1.
    """
    if c.B <= 1:
        return c
    if value_bound > 1:
        raise CertificateError(f"cannot fold B: |f| is only known to be <= {value_bound}")
    if float(c.C).is_integer():
        return replace(c, A=_ceil_float(Fraction(c.A) * Fraction(c.B) ** (int(c.C) + 1)), B=1.0)
    return replace(c, A=_up(c.A * c.B ** (c.C + 1)), B=1.0)


@_audited
def power_substitute(f: MildCert, deriv_certs: Sequence[MildCert | None] | None,
                     n: Sequence[int], r: int) -> MildCert:
    """f o (x_i -> x_i^n_i) is (N A (d+1)^(C+1), B, C)-mild up to order r.

    ``deriv_certs`` holds one weak certificate per first partial derivative
    (None for an identically zero derivative).
    """
    if deriv_certs is None:
        raise MissingDerivativeCertificates(
            "first-derivative certificates are required for power substitution")
    d = f.arity
    if len(n) != d or len(deriv_certs) != d:
        raise CertificateError("need one exponent and one derivative certificate per variable")
    if any(ni < r for ni in n):
        raise CertificateError(f"power substitution needs every exponent >= r = {r}, got {list(n)}")
    if f.order < r or any(c is not None and c.order < r - 1 for c in deriv_certs):
        raise CertificateError("input certificates do not reach the requested order")
    certs = [f] + [c for c in deriv_certs if c is not None]
    # non-weak bounds imply weak ones on (0,1)^d
    certs = [replace(c, weak=True) for c in certs]
    u = unify(certs)
    A = max(u.A, 1.0)
    N = max(n)
    if float(u.C).is_integer():
        At = _ceil_float(N * Fraction(A) * (d + 1) ** (int(u.C) + 1))
    else:
        At = _up(N * A * (d + 1) ** (u.C + 1))
    return MildCert(A=At, B=u.B, C=u.C, order=r, weak=False, arity=d)


@_audited
def rescale_step(c: MildCert, r: int) -> float:
    """Step h = 1/(A r^C) after which the C^r-norm is at most 1."""
    if c.weak:
        raise CertificateError("rescaling needs a non-weak certificate")
    if c.order < r:
        raise CertificateError("certificate does not reach order r")
    if c.B > 1:
        raise CertificateError("B > 1; fold B into A first")
    return _down(1.0 / (c.A * r ** c.C))


@_audited
def monomial_weak(mu: Sequence[float], supB: float) -> MildCert:
    """a x^mu with sup |a x^mu| <= supB is weakly (max(1, |mu_i|), supB, 0)-mild."""
    if not supB > 0:
        raise CertificateError("supB must be positive")
    M = max([1.0] + [abs(float(m)) for m in mu])
    return MildCert(A=M, B=supB, C=0.0, order=INF, weak=True, arity=len(mu))


@_audited
def natural_monomial(p: Sequence[Any], coeff_abs: float) -> MildCert:
    """c x^p with natural exponents on (0,1)^m: (max(1, p_i), |c|, 0)-mild."""
    if not all(is_natural(x) for x in p):
        raise CertificateError("natural_monomial needs natural exponents")
    M = max([1.0] + [float(x) for x in p])
    return MildCert(A=M, B=abs(coeff_abs), C=0.0, order=INF, weak=False, arity=len(p))


@_audited
def root_power(mu: Sequence[float], n: Sequence[int], r: int, l: int,
               c1_bound: float | None, supB: float) -> MildCert:
    """Certificate of (b o phi)^(1/r^(l-1)) for b = a x^mu, a > 0, phi = x^n.

    A = max(n) (1 + m M) with M = max(1, |mu_i|/q), q = r^(l-1).  B must
    dominate sup b^(1/q) and (c1_bound/|mu_k|)^(1/q); we use the r-free bound
    max(1, sup b, c1_bound/|mu_k|) so that B depends on b only.
    """
    if l < 1:
        raise CertificateError("l must be >= 1")
    q = r ** (l - 1)
    m = len(mu)
    active = [k for k in range(m) if float(mu[k]) != 0]
    if any(n[k] < r ** l for k in active):
        raise CertificateError(f"root_power needs n_i >= r^l = {r ** l} for every variable present")
    if not active:
        return MildCert(A=1.0, B=_up(supB ** (1.0 / q)), C=0.0, order=r, weak=False, arity=m)
    if c1_bound is None or not math.isfinite(c1_bound):
        raise CertificateError("root_power needs a finite C^1 bound of the monomial")
    M = max([1.0] + [abs(float(mu[k])) / q for k in active])
    B = max([1.0, supB] + [c1_bound / abs(float(mu[k])) for k in active])
    return MildCert(A=_up(max(n) * (1 + m * M)), B=_up(B), C=0.0,
                    order=r, weak=False, arity=m)


# ---------------------------------------------------------- primitive catalog

def exp_cert(s: float) -> MildCert:
    """exp on (-inf, s]."""
    return MildCert(A=1.0, B=_up(math.exp(s)))


def reciprocal_cert(delta: float) -> MildCert:
    """1/y on |y| >= delta."""
    return MildCert(A=_up(1.0 / delta), B=_up(1.0 / delta))


def power_cert(mu: float, delta: float, M: float) -> MildCert:
    """y^mu on [delta, M], delta > 0."""
    mu = float(mu)
    return MildCert(A=_up(max(1.0, abs(mu)) / delta), B=_up(max(M ** mu, delta ** mu)))


def log1p_cert(delta: float, M: float) -> MildCert:
    """log(1+y) on [-1+delta, M]."""
    return MildCert(A=_up(1.0 / delta), B=_up(max(abs(math.log(delta)), math.log1p(M), 1.0)))


def constant_cert(c: float, arity: int = 1) -> MildCert:
    return MildCert(A=1.0, B=abs(float(c)), arity=arity)


def expr_cert(e: Expr, b: Mapping[str, Interval], params: Mapping[str, Any] | None = None) -> MildCert:
    """(A, B, 0)-mild certificate of ``e`` on box ``b``, derived bottom-up from
    the primitive catalog via compose / product / sum."""
    names = sorted(b)
    arity = max(1, len(names))
    params = dict(params or {})
    bb = Box(b)

    def rec(node: Expr) -> tuple[MildCert, Interval]:
        iv = enclose(node, bb, params)
        if isinstance(node, Const) or not (node.variables() & set(names)):
            return constant_cert(iv.mag(), arity), iv
        if isinstance(node, Var):
            # |x| <= max(1, sup), |dx| = 1
            return MildCert(A=1.0, B=max(1.0, iv.mag()), arity=arity), iv
        if isinstance(node, Neg):
            return rec(node.a)[0], iv
        if isinstance(node, Add):
            return sum_([rec(node.a)[0], rec(node.b)[0]]), iv
        if isinstance(node, Mul):
            for c, other in ((node.a, node.b), (node.b, node.a)):
                if not (c.variables() & set(names)):
                    return scale(rec(other)[0], enclose(c, bb, params).mag()), iv
            return product([rec(node.a)[0], rec(node.b)[0]]), iv
        inner, ui = rec(node.a)
        if isinstance(node, Recip):
            prim = reciprocal_cert(ui.mig())
        elif isinstance(node, Exp):
            prim = exp_cert(ui.hi)
        elif isinstance(node, Log1p):
            prim = log1p_cert(_down(1.0 + ui.lo), ui.hi)
        elif isinstance(node, Pow):
            if is_natural(node.mu):
                k = int(node.mu)
                if k == 0:
                    return constant_cert(1.0, arity), iv
                return product([inner] * k), iv
            if ui.mig() <= 0:
                raise CertificateError(f"power base of {node} touches 0 on the box")
            prim = power_cert(float(node.mu), ui.mig(), ui.mag())
        else:
            raise CertificateError(f"no catalog rule for {type(node).__name__}")
        if isinstance(node.a, Var):
            # precomposing with a coordinate projection changes no derivative bound
            return replace(prim, arity=arity), iv
        return compose(prim, inner), iv

    return rec(e)[0]


# ------------------------------------------------------- prepared functions

@dataclass(frozen=True)
class PreparedCerts:
    f: MildCert
    derivs: tuple[MildCert | None, ...] | None   # None: not C^1-bounded
    failure: str | None = None


@_audited
def prepared_weak(p, unit_cert: MildCert | None, term_certs: Sequence[MildCert],
                  dterm_certs: Sequence[Sequence[MildCert | None]] | None,
                  unit_value: float | None = None) -> PreparedCerts:
    """Weak certificates of f = b_j F(b) and of its first partials.

    ``dterm_certs[l][i]`` certifies d b_l / d x_i (None when it vanishes);
    passing None for the whole table means the monomial map is not
    C^1-bounded.  Derivatives of F come from :func:`derivative_cert`.
    """
    j = p.j
    b = unify(term_certs)
    m = b.arity
    if p.unit_is_constant():
        if unit_value is None:
            raise CertificateError("constant unit needs its value")
        f = scale(term_certs[j], unit_value)
        if dterm_certs is None:
            return PreparedCerts(f, None, "monomial map is not C^1-bounded")
        return PreparedCerts(f, tuple(None if dterm_certs[j][i] is None
                                      else scale(dterm_certs[j][i], unit_value) for i in range(m)))
    if unit_cert is None:
        raise CertificateError("unit certificate missing")
    FB = compose_weak(unit_cert, b)
    f = product([term_certs[j], FB])
    if dterm_certs is None:
        return PreparedCerts(f, None, "monomial map is not C^1-bounded")
    dF = compose_weak(derivative_cert(unit_cert), b)
    derivs = []
    for i in range(m):
        parts = []
        if dterm_certs[j][i] is not None:
            parts.append(product([dterm_certs[j][i], FB]))
        for row in dterm_certs:
            if row[i] is not None:
                parts.append(product([term_certs[j], dF, row[i]]))
        derivs.append(sum_(parts) if parts else None)
    return PreparedCerts(f, tuple(derivs))
