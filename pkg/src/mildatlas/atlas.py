"""Chart pipeline: power substitution, wall straightening, cube subdivision.

For a fixed parameter t the graph of a prepared family over C_t is covered by
charts

    z  ->  components( Phi( P + h z ) ),     z in (0,1)^m

where the components are already pulled back by the power map
x_i -> x_i^(e_i), Phi straightens the pulled-back cell onto the unit cube and
(P, h) runs over a uniform grid.  Each chart carries one certificate whose
rescaled form asserts C^r-norm <= 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from . import certcalc as cc
from .certcalc import CertificateError, MildCert
from .expr import (ONE, Const, DomainError, Expr, Mul, Number, Pow, Var, as_number,
                   is_natural, number_to_json, parse_expr, simplify, _evaluate)
from .interval import Interval, UnitCertificationError, certify_unit, enclose
from .jet import Jet, JetOps, cr_norm
from .prepared import (Cell, Family, PreparedFunction, PreparedTerm, Wall, bname, cell_boxes,
                       check_c1_bounded, range_box, sample_cell, serialize_family, term_stats,
                       wall_prepared_check, xname, _wall_domain_boxes)

log = logging.getLogger(__name__)

TINY = 1e-300
PAVING_DEPTH = 6


class AtlasError(RuntimeError):
    """A pipeline stage could not be certified."""

    def __init__(self, stage: str, message: str, details: Any = None):
        self.stage, self.details = stage, details
        super().__init__(f"[{stage}] {message}")


# ----------------------------------------------------------------- helpers

def exactify(e: Expr) -> Expr:
    """Replace float constants by their exact binary rationals."""
    if isinstance(e, Const):
        return Const(as_number(e.value) if not isinstance(e.value, float) else Fraction(e.value))
    kids = e.children()
    if not kids:
        return e
    return e.rebuild(tuple(exactify(k) for k in kids))


def _num(v: Number) -> Number:
    return v if isinstance(v, Fraction) else float(v)


def standard_exponents(m: int, r: int) -> tuple[int, ...]:
    return tuple(r ** (m - i) for i in range(m))


def improved_exponents(m: int, r: int) -> tuple[int, ...]:
    return (r ** (m - 1),) + tuple(r ** (m - i) for i in range(1, m))


def _point_params(fam: Family, t: Sequence[Number]) -> dict[str, Interval]:
    return {f"t{i + 1}": Interval(float(v), float(v)) for i, v in enumerate(t)}


def _eval_t(e: Expr, t: Sequence[Number]) -> float:
    return float(e.evaluate({f"t{i + 1}": float(v) for i, v in enumerate(t)}))


def _root(v: float, q: int) -> float:
    return 0.0 if v == 0 else v ** (1.0 / q)


# --------------------------------------------------------- stage 1: power map

@dataclass
class PulledBack:
    """Cell and components after x_i -> x_i^(e_i), with t fixed."""

    m: int
    exponents: tuple[int, ...]
    alpha: list[Expr]
    beta: list[Expr]
    alpha_certs: list[MildCert | None]   # None: constant wall
    beta_certs: list[MildCert | None]
    components: list[Expr]               # m coordinates then n - m values
    component_certs: list[MildCert]
    value_sup: float


def _weak_term_certs(terms: Sequence[PreparedTerm], stats, m: int, where: str):
    tc = [cc.monomial_weak([float(v) for v in term.mu], max(s, TINY)) for term, s in zip(terms, stats.sup)]
    if not stats.c1_bounded:
        f = stats.failures[0]
        raise AtlasError("power_substitute", f"{where}: {f['kind']} (term {f['term']}, var {f['var']}), "
                         f"witness {f['point']} -> {f['value']:.3g}", stats.failures)
    dtc = []
    for term, row in zip(terms, stats.dsup):
        out = []
        for i in range(m):
            d = term.derivative(i)
            if d is None or row[i] is None or row[i] == 0:
                out.append(None)
            else:
                out.append(cc.monomial_weak([float(v) for v in d.mu], row[i]))
        dtc.append(out)
    return tc, dtc


def _unit_value(pf: PreparedFunction) -> float:
    return float(pf.unit.evaluate({}))


def _monomial_map_cert(terms, stats, e, r, m, where) -> MildCert:
    """Mild certificate of b o phi via power substitution of each term."""
    tc, dtc = _weak_term_certs(terms, stats, m, where)
    out = [cc.power_substitute(c, d, e, r) for c, d in zip(tc, dtc)]
    return cc.unify(out)


def _component_cert(pf: PreparedFunction, t, boxes, params, e, r, m, where) -> MildCert:
    head = pf.distinguished
    if pf.unit_is_constant():
        p = [v * k for v, k in zip(head.mu, e)]
        if all(is_natural(v) for v in p):
            c = abs(_eval_t(head.a, t) * _unit_value(pf))
            return cc.natural_monomial(p, c)
    stats = term_stats(pf.terms, boxes, params, label=where)
    tc, dtc = _weak_term_certs(pf.terms, stats, m, where)
    if pf.unit_is_constant():
        pc = cc.prepared_weak(pf, None, tc, dtc, unit_value=_unit_value(pf))
    else:
        try:
            ucert = cc.expr_cert(pf.unit, range_box(pf.terms, boxes, params))
        except (CertificateError, DomainError) as exc:
            raise AtlasError("unit_cert", f"{where}: {exc}") from exc
        pc = cc.prepared_weak(pf, ucert, tc, dtc)
    try:
        return cc.power_substitute(pc.f, pc.derivs, e, r)
    except CertificateError as exc:
        raise AtlasError("power_substitute", f"{where}: {exc}") from exc


def _pulled_wall(w: Wall, fam: Family, t, boxes, params, e, r, natural_walls: bool):
    """(expression, certificate or None) of w(phi(x))^(1/e_i)."""
    i, m = w.var, fam.m
    q = e[i]
    if w.kind in ("const", "param"):
        v = float(w.payload) if w.kind == "const" else _eval_t(w.payload, t)
        return Const(Fraction(_root(v, q))), None
    pf: PreparedFunction = w.payload.with_params(fam.param_env(t))
    head = pf.distinguished
    c = float(head.a.evaluate({}))
    if c <= 0:
        raise AtlasError("power_substitute", f"{w.which}{i + 1}: distinguished coefficient must be > 0")
    p = [v * k / q if isinstance(v, Fraction) else float(v) * k / q for v, k in zip(head.mu, e)]
    p = [Fraction(v) if isinstance(v, Fraction) else v for v in p]
    mono = PreparedTerm(Const(Fraction(c ** (1.0 / q))), tuple(p)).expr()
    dom = _wall_domain_boxes(boxes, i)
    stats = term_stats(pf.terms, dom, params, label=f"{w.which}{i + 1}")
    if not stats.c1_bounded:
        _weak_term_certs(pf.terms, stats, m, f"{w.which}{i + 1}")   # raises with witness
    if natural_walls and all(is_natural(v) for v in p):
        # c^(1/q) <= max(1, c) keeps B free of r, as in root_power
        mono_cert = cc.natural_monomial(p, max(1.0, c))
    else:
        l = m - i + 1   # 1-based variable index i+1 gives l = m - (i+1) + 2
        try:
            mono_cert = cc.root_power([float(v) for v in head.mu], e, r, l,
                                      max((v for v in stats.dsup[pf.j] if v is not None), default=0.0),
                                      stats.sup[pf.j])
        except CertificateError as exc:
            raise AtlasError("root_power", f"{w.which}{i + 1}: {exc}") from exc
    if pf.unit_is_constant():
        u = _unit_value(pf)
        if u <= 0:
            raise AtlasError("power_substitute", f"{w.which}{i + 1}: wall unit must be positive")
        factor = Fraction(u ** (1.0 / q))
        return simplify(Mul(Const(factor), mono)), cc.scale(mono_cert, float(factor))
    sub = {bname(l): term.pullback(e).expr() for l, term in enumerate(pf.terms)}
    root_unit = Pow(pf.unit, Fraction(1, q))
    expr = simplify(Mul(mono, root_unit.subs(sub)))
    rb = range_box(pf.terms, dom, params)
    try:
        lo, _ = certify_unit(pf.unit, rb)
        if enclose(pf.unit, rb).lo <= 0:
            raise UnitCertificationError("wall unit must be positive")
        ucert = cc.expr_cert(root_unit, rb)
    except (UnitCertificationError, CertificateError, DomainError) as exc:
        raise AtlasError("unit_cert", f"{w.which}{i + 1}: {exc}") from exc
    bphi = _monomial_map_cert(pf.terms, stats, e, r, m, f"{w.which}{i + 1}")
    return expr, cc.product([mono_cert, cc.compose(ucert, bphi)])


def power_substitute_cell(fam: Family, t: Sequence[Number], r: int,
                          exponents: Sequence[int] | None = None,
                          natural_walls: bool = False, depth: int = PAVING_DEPTH) -> PulledBack:
    """Pull the cell and all components back along x_i -> x_i^(e_i)."""
    m = fam.m
    e = tuple(exponents or standard_exponents(m, r))
    if any(k < r for k in e):
        raise AtlasError("power_substitute", f"exponents {e} must all be >= r = {r}")
    params = _point_params(fam, t)
    boxes = cell_boxes(fam, params, depth)
    alpha, beta, ac, bc = [], [], [], []
    for i in range(m):
        for w, exprs, certs in ((fam.cell.alpha[i], alpha, ac), (fam.cell.beta[i], beta, bc)):
            ex, cert = _pulled_wall(w, fam, t, boxes, params, e, r, natural_walls)
            exprs.append(exactify(ex))
            certs.append(cert)
    env = fam.param_env(t)
    comps, certs = [], []
    for c, pf in enumerate(fam.all_components()):
        where = f"coordinate {c + 1}" if c < m else f"component {c - m + 1}"
        pt = pf.with_params(env)
        comps.append(exactify(pt.pullback(e).expr()))
        certs.append(_component_cert(pt, t, boxes, params, e, r, m, where))
    sup = 0.0
    for pf in fam.components:
        ex = pf.with_params(env).expr()
        sup = max(sup, max(enclose(ex, b, {}).mag() for b in boxes))
    return PulledBack(m, e, alpha, beta, ac, bc, comps, certs, sup)


# ------------------------------------------------------ stage 2: straighten

@dataclass
class Straightened:
    phi_certs: list[MildCert]     # certificate of Phi_i
    phi_cert: MildCert            # all coordinates of Phi together
    composite: MildCert           # components o Phi, B folded to 1
    component_certs: list[MildCert]


def straighten(pb: PulledBack, r: int) -> Straightened:
    """Phi_i(y) = alpha_i'(Phi_<i)(1 - y_i) + beta_i'(Phi_<i) y_i and the certificate
    of every component composed with Phi."""
    m = pb.m
    lin = MildCert(A=1.0, B=1.0, arity=m)   # y_i and 1 - y_i
    P: MildCert | None = None
    phis = []
    for i in range(m):
        a, b = pb.alpha[i], pb.beta[i]
        if pb.alpha_certs[i] is None and pb.beta_certs[i] is None:
            width = abs(float(b.value) - float(a.value))
            c = MildCert(A=max(width, TINY), B=1.0, arity=m)
        else:
            if P is None:
                raise AtlasError("straighten", f"walls of x{i + 1} depend on earlier variables but i = 1")
            parts = []
            for ex, cert in ((a, pb.alpha_certs[i]), (b, pb.beta_certs[i])):
                if cert is None:
                    wc = cc.constant_cert(float(ex.value), m)
                else:
                    wc = cc.compose(cert, P)
                parts.append(cc.product([wc, lin]))
            c = cc.fold_B(cc.sum_(parts), 1.0)
        phis.append(c)
        P = c if P is None else cc.unify([P, c])
    if pb.value_sup > 1:
        raise AtlasError("straighten", f"|f| is only certified <= {pb.value_sup:.6g} on the cell; "
                         "B cannot be folded")
    comp = [cc.compose(c, P) for c in pb.component_certs]
    composite = cc.fold_B(cc.unify(comp), 1.0)
    return Straightened(phis, P, composite, comp)


# -------------------------------------------------------- stage 3: subdivide

@dataclass(frozen=True)
class CubePlacement:
    index: tuple[int, ...]
    side: int

    @property
    def origin(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(k, self.side) for k in self.index)

    @property
    def step(self) -> Fraction:
        return Fraction(1, self.side)


@dataclass(frozen=True)
class Grid:
    """ceil(1/h)^m closed cubes of side 1/N covering [0,1]^m (lazy)."""

    side: int
    m: int

    @property
    def count(self) -> int:
        return self.side ** self.m

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, idx: int) -> CubePlacement:
        if not 0 <= idx < self.count:
            raise IndexError(idx)
        ks = []
        for _ in range(self.m):
            idx, k = divmod(idx, self.side)
            ks.append(k)
        return CubePlacement(tuple(reversed(ks)), self.side)

    def __iter__(self) -> Iterator[CubePlacement]:
        for i in range(self.count):
            yield self[i]

    def chart_id(self, index: Sequence[int]) -> int:
        out = 0
        for k in index:
            out = out * self.side + int(k)
        return out

    def locate(self, y: Sequence[float]) -> tuple[int, np.ndarray]:
        """Chart id of a cube containing y and the local coordinate z = N y - k."""
        y = np.asarray(y, dtype=float)
        k = np.clip(np.floor(y * self.side).astype(np.int64), 0, self.side - 1)
        return self.chart_id(k), y * self.side - k


def subdivide(cert: MildCert, r: int, m: int | None = None) -> tuple[Grid, float]:
    """Grid of side N = ceil(A'' r^(m^2)) with A'' r^(m^2) >= 1/h; returns (grid, A'')."""
    m = cert.arity if m is None else m
    cc.rescale_step(cert, r)  # validates the certificate and records the step
    scale = r ** (m * m)
    if float(cert.C).is_integer():
        inv_h = Fraction(cert.A) * Fraction(r) ** int(cert.C)  # exact 1/h
    else:
        inv_h = Fraction(cc._up(cert.A * r ** cert.C))
    side = max(1, math.ceil(inv_h))
    # reported A'' is the float nearest 1/(h r^(m^2)), nudged so the count
    # formula ceil(A'' r^(m^2)) reproduces the side in float and exact arithmetic
    a2 = float(inv_h / scale)
    for _ in range(64):
        lo = min(math.ceil(a2 * scale), math.ceil(Fraction(a2) * scale))
        hi = max(math.ceil(a2 * scale), math.ceil(Fraction(a2) * scale))
        if hi > side and side > 1:
            a2 = math.nextafter(a2, 0.0)
        elif lo < side:
            a2 = math.nextafter(a2, math.inf)
        else:
            break
    return Grid(side, m), a2


def predicted_count(a2: float, r: int, m: int) -> int:
    return max(1, math.ceil(a2 * r ** (m * m))) ** m


# -------------------------------------------------------------- chart sets

@dataclass
class ChartSet:
    """Everything needed to evaluate charts: straightening walls, pulled-back
    components and the grid.  Rebuildable from atlas JSON alone."""

    m: int
    alpha: list[Expr]
    beta: list[Expr]
    components: list[Expr]
    grid: Grid
    order: int

    def phi_jets(self, y: list) -> list:
        """x' = Phi(y) for jets (or floats) y."""
        xs: list = []
        ops = JetOps()
        n = len(self.alpha)
        for i in range(n):
            env = {xname(k): xs[k] for k in range(i)}
            a = _evaluate(self.alpha[i], env, ops)
            b = _evaluate(self.beta[i], env, ops)
            xs.append(a * (1 - y[i]) + b * y[i])
        return xs

    def chart_jets(self, idx: int, z: np.ndarray, r: int | None = None) -> list[Jet]:
        """Jets of all n components of chart ``idx`` at local points z (shape (m, batch))."""
        r = self.order if r is None else r
        cube = self.grid[idx]
        h = 1.0 / cube.side
        y = [Jet.variable(i, z, r) * h + float(cube.origin[i]) for i in range(self.m)]
        xs = self.phi_jets(y)
        env = {xname(k): xs[k] for k in range(self.m)}
        out = []
        for e in self.components:
            v = _evaluate(e, env, JetOps())
            out.append(v if isinstance(v, Jet) else Jet.constant(v, self.m, r, z, z.shape[1:]))
        return out

    def chart_values(self, idx: int, z: Sequence[float]) -> np.ndarray:
        cube = self.grid[idx]
        y = [float(cube.origin[i]) + z[i] / cube.side for i in range(self.m)]
        xs = self.phi_jets(y)
        env = {xname(k): xs[k] for k in range(self.m)}
        return np.array([float(e.evaluate(env)) for e in self.components])

    def invert_phi(self, xp: Sequence[float]) -> np.ndarray:
        y = []
        for i in range(self.m):
            env = {xname(k): float(xp[k]) for k in range(i)}
            a, b = float(self.alpha[i].evaluate(env)), float(self.beta[i].evaluate(env))
            y.append((xp[i] - a) / (b - a))
        return np.array(y)

    def to_json(self) -> dict:
        return {"alpha": [str(e) for e in self.alpha], "beta": [str(e) for e in self.beta],
                "components": [str(e) for e in self.components],
                "side": self.grid.side, "m": self.m, "order": self.order}

    @classmethod
    def from_json(cls, doc: Mapping) -> "ChartSet":
        m = int(doc["m"])
        return cls(m, [parse_expr(s) for s in doc["alpha"]], [parse_expr(s) for s in doc["beta"]],
                   [parse_expr(s) for s in doc["components"]], Grid(int(doc["side"]), m),
                   int(doc["order"]))


# ---------------------------------------------------- improved normalization

class NormalizationUnsupported(ValueError):
    """The x_2 walls are not of the shape the improved pipeline handles."""


def _mul_mu(v: Number, k: Number) -> Number:
    if isinstance(v, Fraction) and isinstance(k, Fraction):
        return v * k
    return float(v) * float(k)


def _substitute_x2(pf: PreparedFunction, K: Expr, s: Number) -> PreparedFunction:
    """x_2 -> K(t) x_1^s x_2 applied to every term."""
    terms = []
    for term in pf.terms:
        mu = list(term.mu)
        p = mu[1]
        a = term.a if p == 0 else simplify(Mul(term.a, simplify(Pow(K, p))))
        mu[0] = mu[0] + _mul_mu(s, p) if p != 0 else mu[0]
        terms.append(PreparedTerm(a, tuple(mu)))
    return PreparedFunction(tuple(terms), pf.unit, pf.j)


def _scale_x1(pf: PreparedFunction, kappa: Number) -> PreparedFunction:
    terms = tuple(PreparedTerm(t.a, (_mul_mu(t.mu[0], kappa),) + tuple(t.mu[1:])) for t in pf.terms)
    return PreparedFunction(terms, pf.unit, pf.j)


def _wall_head(w: Wall):
    """(coefficient expr, x_1 exponent, prepared function or None) of an x_2 wall."""
    if w.kind == "const":
        if w.payload == 0:
            return None
        return Const(w.payload), Fraction(0), None
    if w.kind == "param":
        return w.payload, Fraction(0), None
    pf: PreparedFunction = w.payload
    head = pf.distinguished
    if any(v != 0 for v in head.mu[1:]):
        raise NormalizationUnsupported(f"{w.which}2 distinguished term depends on x2 or later")
    return head.a, head.mu[0], pf


def improved_normalize(fam: Family, r: int | None = None) -> tuple[Family, dict]:
    """Rewrite the x_2 walls as ã x_1^R F(ã) < x_2 < G(b)/S with R natural.

    Substitutes x_2 -> b_j(t) S x_1^s x_2, then x_1 -> x_1^(R/(rho - s)),
    R = ceil(rho - s).  The coordinate maps of the result express the
    original coordinates in the new ones.
    """
    if fam.m < 2:
        raise ValueError("improved mode needs m >= 2")
    lower = _wall_head(fam.cell.alpha[1])
    upper = _wall_head(fam.cell.beta[1])
    if upper is None:
        raise NormalizationUnsupported("upper x2 wall is zero")
    bj, s, pf_u = upper
    rho = None if lower is None else lower[1]
    if rho is not None and rho - s < 0:
        raise NormalizationUnsupported(f"exponent gap rho - s = {rho - s} < 0 (symmetric case not handled)")
    params = fam.param_box()
    if enclose(bj, {}, params).lo <= 0:
        raise NormalizationUnsupported("upper wall coefficient not certified positive on T")
    boxes = cell_boxes(fam, params)
    if pf_u is None or pf_u.unit_is_constant():
        S = Fraction(1) if pf_u is None else Fraction(float(pf_u.unit.evaluate({})))
        new_upper = Wall("beta", 1, "const", Fraction(1))
    else:
        lo, hi = certify_unit(pf_u.unit, range_box(pf_u.terms, _wall_domain_boxes(boxes, 1), params))
        if enclose(pf_u.unit, range_box(pf_u.terms, _wall_domain_boxes(boxes, 1), params)).lo <= 0:
            raise NormalizationUnsupported("upper wall unit is not positive")
        S = Fraction(hi)
        extra = PreparedTerm(Const(1 / S), (Fraction(0),) * fam.m)
        new_upper = Wall("beta", 1, "prepared",
                         PreparedFunction(pf_u.terms + (extra,), pf_u.unit, len(pf_u.terms)))
    K = simplify(Mul(bj, Const(S)))
    if lower is None:
        new_lower = Wall("alpha", 1, "const", Fraction(0))
    else:
        ai, _, pf_l = lower
        mu = (rho - s,) + (Fraction(0),) * (fam.m - 1)
        head = PreparedTerm(simplify(Mul(ai, simplify(Pow(K, Fraction(-1))))), mu)
        if pf_l is None:
            new_lower = Wall("alpha", 1, "prepared", PreparedFunction((head,), ONE, 0))
        else:
            new_lower = Wall("alpha", 1, "prepared",
                             PreparedFunction(pf_l.terms + (head,), pf_l.unit, len(pf_l.terms)))
    sub = lambda pf: _substitute_x2(pf, K, s)
    alpha = list(fam.cell.alpha)
    beta = list(fam.cell.beta)
    alpha[1], beta[1] = new_lower, new_upper
    for i in range(2, fam.m):
        for walls in (alpha, beta):
            if walls[i].kind == "prepared":
                walls[i] = Wall(walls[i].which, i, "prepared", sub(walls[i].payload))
    comps = [sub(c) for c in fam.components]
    coords = [sub(c) for c in fam.coordinate_maps()]
    gap = None if rho is None else rho - s
    if gap is None or gap == 0:
        R, kappa = None, Fraction(1)
    else:
        R = math.ceil(gap)
        kappa = Fraction(R) / gap if isinstance(gap, Fraction) else R / float(gap)
    if kappa != 1:
        inv = 1 / kappa
        for walls in (alpha, beta):
            w = walls[0]
            if w.kind == "const":
                v = w.payload
                walls[0] = Wall(w.which, 0, "const", Fraction(0) if v == 0 else Fraction(float(v) ** float(inv)))
            else:
                walls[0] = Wall(w.which, 0, "param", simplify(Pow(w.expr(), inv)))
            for i in range(1, fam.m):
                if walls[i].kind == "prepared":
                    walls[i] = Wall(walls[i].which, i, "prepared", _scale_x1(walls[i].payload, kappa))
        comps = [_scale_x1(c, kappa) for c in comps]
        coords = [_scale_x1(c, kappa) for c in coords]
    out = Family(fam.k, fam.m, fam.n, fam.T, Cell(fam.m, tuple(alpha), tuple(beta)), tuple(comps),
                 tuple(coords), fam.name + "+normalized")
    info = {"rho": None if rho is None else number_to_json(rho), "s": number_to_json(s),
            "S": number_to_json(S), "R": R, "kappa": number_to_json(kappa)}
    return out, info


# ------------------------------------------------------------------- atlas

MODES = ("standard", "improved")


@dataclass
class Atlas:
    family: Family                       # as given
    working: Family                      # after optional normalization
    t: tuple[Number, ...]
    r: int
    mode: str
    exponents: tuple[int, ...]
    charts: ChartSet
    certificate: MildCert                # composite, before rescaling
    a2: float                            # A'' with side = ceil(A'' r^(m^2))
    stage_certs: dict = field(default_factory=dict)
    normalization: dict | None = None
    warnings: list[str] = field(default_factory=list)
    audit: list[dict] = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.charts.grid.count

    @property
    def predicted(self) -> int:
        if self.family.m == 0:
            return 1
        return predicted_count(self.a2, self.r, self.family.m)

    def to_json(self, include_audit: bool = False) -> dict:
        doc = {"format": "mildatlas-atlas/1",
               "family": serialize_family(self.family),
               "t": [number_to_json(as_number(v)) for v in self.t],
               "r": self.r, "mode": self.mode,
               "stages": [{"kind": "power_map", "exponents": list(self.exponents)},
                          {"kind": "affine", "alpha": [str(e) for e in self.charts.alpha],
                           "beta": [str(e) for e in self.charts.beta]},
                          {"kind": "cube_placement", "side": self.charts.grid.side,
                           "step": f"1/{self.charts.grid.side}"}],
               "charts": self.charts.to_json(),
               "certificate": self.certificate.to_json(),
               "stage_certificates": {k: cc._jsonable(v) for k, v in self.stage_certs.items()},
               "A_double_prime": self.a2,
               "counts": {"charts": self.count, "predicted": self.predicted,
                          "side": self.charts.grid.side},
               "normalization": self.normalization,
               "warnings": list(self.warnings)}
        if include_audit:
            doc["audit"] = self.audit
        return doc


def _point_atlas(fam: Family, t, r: int, mode: str) -> Atlas:
    env = fam.param_env(t)
    comps = [exactify(c.with_params(env).expr()) for c in fam.components]
    vals = [abs(float(c.evaluate({}))) for c in comps]
    cert = MildCert(A=1.0, B=max(vals, default=0.0), arity=1)
    charts = ChartSet(0, [], [], comps, Grid(1, 0), r)
    return Atlas(fam, fam, tuple(t), r, mode, (), charts, cert, 1.0)


def build_atlas(fam: Family, t: Sequence[Number], r: int, mode: str = "standard",
                depth: int = PAVING_DEPTH) -> Atlas:
    """Charts covering the graph over C_t, each with C^r-norm <= 1."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not isinstance(r, int) or r < 1:
        raise ValueError("r must be a positive integer")
    t = tuple(as_number(v) for v in t)
    fam.check_t(t)
    if fam.m == 0:
        return _point_atlas(fam, t, r, mode)
    params = _point_params(fam, t)
    c1 = check_c1_bounded(fam, params, depth)
    if not c1.ok:
        f = c1.failures[0]
        raise AtlasError("check_c1_bounded", f"{f['where']}: {f['kind']} (term {f['term']}, var {f['var']}) "
                         f"witness {f['point']} -> {f['value']:.3g}", c1.failures)
    diag = wall_prepared_check(fam, params, depth)
    if not diag.ok:
        raise AtlasError("wall_prepared_check", str(diag.issues[0]), diag.issues)
    warnings: list[str] = []
    working, info = fam, None
    exps = standard_exponents(fam.m, r)
    natural = False
    if mode == "improved":
        if fam.m < 2:
            raise ValueError("improved mode needs m >= 2")
        try:
            working, info = improved_normalize(fam, r)
            exps = improved_exponents(fam.m, r)
            natural = True
        except NormalizationUnsupported as exc:
            msg = f"improved mode unavailable ({exc}); falling back to standard mode"
            log.warning(msg)
            warnings.append(msg)
    with cc.audit() as trail:
        pb = power_substitute_cell(working, t, r, exps, natural, depth)
        st = straighten(pb, r)
        grid, a2 = subdivide(st.composite, r, fam.m)
    charts = ChartSet(fam.m, pb.alpha, pb.beta, pb.components, grid, r)
    stage = {"alpha_walls": pb.alpha_certs, "beta_walls": pb.beta_certs,
             "components": pb.component_certs, "phi": st.phi_certs,
             "composed_components": st.component_certs}
    return Atlas(fam, working, t, r, mode, exps, charts, st.composite, a2, stage, info,
                 warnings, trail)


# ---------------------------------------------------------------- coverage

def invert_coordinates(fam: Family, x: Sequence[float], t: Sequence[Number]) -> np.ndarray:
    """Solve x = coordinate_maps(x') for triangular monomial coordinate maps."""
    if fam.coordinates is None:
        return np.asarray(x, dtype=float)
    env = {f"t{i + 1}": float(v) for i, v in enumerate(t)}
    xp: list[float] = []
    for i, pf in enumerate(fam.coordinates):
        if len(pf.terms) != 1 or pf.unit != ONE:
            raise ValueError("only monomial coordinate maps can be inverted")
        term = pf.terms[0]
        if any(term.mu[k] != 0 for k in range(i + 1, fam.m)) or term.mu[i] == 0:
            raise ValueError("coordinate maps must be triangular")
        rest = float(term.a.evaluate(env))
        for k in range(i):
            rest *= xp[k] ** float(term.mu[k])
        xp.append((x[i] / rest) ** (1.0 / float(term.mu[i])))
    return np.array(xp)


@dataclass
class CoverageResult:
    samples: int
    covered: int
    max_error: float
    failures: list[dict]

    @property
    def ok(self) -> bool:
        return self.covered == self.samples and not self.failures


def check_coverage(atlas: Atlas, samples: int = 1000, seed: int = 0, tol: float = 1e-7,
                   margin: float = 1e-9) -> CoverageResult:
    """Invert the pipeline at sampled graph points and re-evaluate the chart."""
    fam = atlas.family
    if fam.m == 0:
        return CoverageResult(1, 1, 0.0, [])
    pts = sample_cell(fam, atlas.t, samples, seed)
    covered, worst, failures = 0, 0.0, []
    e = atlas.exponents
    for x in pts:
        xn = invert_coordinates(atlas.working, x, atlas.t)
        xp = np.array([xn[i] ** (1.0 / e[i]) for i in range(fam.m)])
        y = atlas.charts.invert_phi(xp)
        if np.any(y < -margin) or np.any(y > 1 + margin):
            failures.append({"x": x.tolist(), "y": y.tolist(), "reason": "outside unit cube"})
            continue
        idx, z = atlas.charts.grid.locate(np.clip(y, 0, 1))
        vals, _ = _graph_point(fam, atlas.t, x)
        got = atlas.charts.chart_values(idx, z)
        err = float(np.max(np.abs(got - vals) / np.maximum(1.0, np.abs(vals))))
        worst = max(worst, err)
        if err > tol:
            failures.append({"x": x.tolist(), "chart": idx, "z": z.tolist(), "error": err})
        else:
            covered += 1
    return CoverageResult(samples, covered, worst, failures)


def _graph_point(fam: Family, t, x) -> tuple[np.ndarray, bool]:
    from .prepared import evaluate
    vals, member = evaluate(fam, t, x)
    return np.concatenate([np.asarray(x, dtype=float), vals]), member


# ------------------------------------------------------------------ growth

@dataclass
class GrowthFit:
    slope: float
    intercept: float
    table: list[dict]


def growth_fit(fam: Family, t: Sequence[Number], r_values: Sequence[int],
               mode: str = "standard") -> GrowthFit:
    """Least-squares slope of log(chart count) against log r."""
    rs = sorted(set(int(r) for r in r_values))
    if len(rs) < 3:
        raise ValueError("growth_fit needs at least 3 distinct values of r")
    table = []
    for r in rs:
        a = build_atlas(fam, t, r, mode)
        table.append({"r": r, "charts": a.count, "predicted": a.predicted, "A_double_prime": a.a2,
                      "A": a.certificate.A, "mode": a.mode, "warnings": a.warnings})
    x = np.log(np.array(rs, dtype=float))
    y = np.log(np.array([row["charts"] for row in table], dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return GrowthFit(float(slope), float(intercept), table)
