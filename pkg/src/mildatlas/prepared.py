"""Prepared families: the input data of the chart pipeline.

A family over a parameter box T is a cell

    alpha_i(t, x_<i) < x_i < beta_i(t, x_<i),   i = 1..m

inside (0,1)^m together with n - m components, each of the form
``f = b_j * F(b)`` where ``b_l = a_l(t) x^mu_l`` is a bounded monomial map
shared by all components and ``F`` is a unit (non-vanishing on the closure of
the range of b).  Walls are constants, expressions in t, or prepared
functions of (t, x_<i).  Centres are fixed to zero.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from .expr import (ONE, Const, DomainError, Expr, ExprSyntaxError, Mul, Number, Pow, Var,
                   as_number, number_to_json, parse_expr, simplify)
from .interval import Box, Interval, UnitCertificationError, certify_unit, enclose

BOUNDARY_MARGIN = 1e-9
WALL_SAMPLES = 1000


class FamilyError(ValueError):
    """A family document failed schema or semantic validation."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def tname(i: int) -> str:
    return f"t{i + 1}"


def xname(i: int) -> str:
    return f"x{i + 1}"


def bname(i: int) -> str:
    return f"b{i + 1}"


# ---------------------------------------------------------------- data model

@dataclass(frozen=True)
class PreparedTerm:
    a: Expr
    mu: tuple[Number, ...]

    def expr(self) -> Expr:
        out: Expr = self.a
        for i, e in enumerate(self.mu):
            if e != 0:
                out = simplify(Mul(out, simplify(Pow(Var(xname(i)), e))))
        return out

    def derivative(self, i: int) -> "PreparedTerm | None":
        """d/dx_i as a term, or None if identically zero."""
        if self.mu[i] == 0:
            return None
        mu = list(self.mu)
        mu[i] = mu[i] - 1
        return PreparedTerm(simplify(Mul(Const(self.mu[i]), self.a)), tuple(mu))

    def pullback(self, e: Sequence[Number]) -> "PreparedTerm":
        return PreparedTerm(self.a, tuple(m * k for m, k in zip(self.mu, e)))

    def to_json(self) -> dict:
        return {"a": str(self.a), "mu": [number_to_json(v) for v in self.mu]}


@dataclass(frozen=True)
class PreparedFunction:
    terms: tuple[PreparedTerm, ...]
    unit: Expr
    j: int  # 0-based

    @property
    def arity(self) -> int:
        return len(self.terms[0].mu)

    @property
    def distinguished(self) -> PreparedTerm:
        return self.terms[self.j]

    def unit_is_constant(self) -> bool:
        return not any(v.startswith("b") for v in self.unit.variables())

    def unit_variables(self) -> list[str]:
        return [bname(l) for l in range(len(self.terms))]

    def expr(self) -> Expr:
        head = self.distinguished.expr()
        if self.unit == ONE:
            return head
        sub = {bname(l): t.expr() for l, t in enumerate(self.terms)}
        return simplify(Mul(head, self.unit.subs(sub)))

    def pullback(self, e: Sequence[Number]) -> "PreparedFunction":
        return PreparedFunction(tuple(t.pullback(e) for t in self.terms), self.unit, self.j)

    def with_params(self, env: Mapping[str, Expr]) -> "PreparedFunction":
        return PreparedFunction(tuple(PreparedTerm(t.a.subs(env), t.mu) for t in self.terms),
                                self.unit, self.j)

    def to_json(self) -> dict:
        return {"terms": [t.to_json() for t in self.terms], "unit": str(self.unit), "j": self.j + 1}


@dataclass(frozen=True)
class Wall:
    which: str   # "alpha" | "beta"
    var: int     # 0-based
    kind: str    # "const" | "param" | "prepared"
    payload: Any  # Number | Expr | PreparedFunction

    def expr(self) -> Expr:
        if self.kind == "const":
            return Const(self.payload)
        if self.kind == "param":
            return self.payload
        return self.payload.expr()

    def to_json(self) -> dict:
        if self.kind == "const":
            payload = number_to_json(self.payload)
        elif self.kind == "param":
            payload = str(self.payload)
        else:
            payload = self.payload.to_json()
        return {"which": self.which, "var": self.var + 1, "kind": self.kind, "payload": payload}


@dataclass(frozen=True)
class Cell:
    m: int
    alpha: tuple[Wall, ...]
    beta: tuple[Wall, ...]

    def walls(self) -> Iterable[Wall]:
        for a, b in zip(self.alpha, self.beta):
            yield a
            yield b


@dataclass(frozen=True)
class Family:
    k: int
    m: int
    n: int
    T: tuple[tuple[Number, Number], ...]
    cell: Cell
    components: tuple[PreparedFunction, ...]
    # original coordinates as functions of the current ones (None: identity)
    coordinates: tuple[PreparedFunction, ...] | None = None
    name: str = ""

    # --------------------------------------------------------- parameters
    def param_names(self) -> list[str]:
        return [tname(i) for i in range(self.k)]

    def x_names(self) -> list[str]:
        return [xname(i) for i in range(self.m)]

    def param_box(self) -> dict[str, Interval]:
        return {tname(i): Interval(float(lo), float(hi)) for i, (lo, hi) in enumerate(self.T)}

    def check_t(self, t: Sequence[Number]) -> None:
        if len(t) != self.k:
            raise ValueError(f"expected {self.k} parameter values, got {len(t)}")
        for i, (v, (lo, hi)) in enumerate(zip(t, self.T)):
            if not lo <= v <= hi:
                raise ValueError(f"t{i + 1} = {v} lies outside T = [{lo}, {hi}]")

    def param_env(self, t: Sequence[Number]) -> dict[str, Expr]:
        return {tname(i): Const(as_number(v)) for i, v in enumerate(t)}

    def coordinate_maps(self) -> tuple[PreparedFunction, ...]:
        if self.coordinates is not None:
            return self.coordinates
        out = []
        for i in range(self.m):
            mu = tuple(Fraction(int(k == i)) for k in range(self.m))
            out.append(PreparedFunction((PreparedTerm(ONE, mu),), ONE, 0))
        return tuple(out)

    def all_components(self) -> tuple[PreparedFunction, ...]:
        """m coordinate maps followed by the n - m values."""
        return self.coordinate_maps() + self.components

    # ------------------------------------------------------------- numerics
    def _env(self, t: Sequence[Number], x: Sequence[float]) -> dict[str, float]:
        env = {tname(i): float(v) for i, v in enumerate(t)}
        env.update({xname(i): float(v) for i, v in enumerate(x)})
        return env

    def wall_values(self, i: int, t, x) -> tuple[float, float]:
        env = self._env(t, x)
        return (float(self.cell.alpha[i].expr().evaluate(env)),
                float(self.cell.beta[i].expr().evaluate(env)))


def evaluate(fam: Family, t: Sequence[Number], x: Sequence[float]) -> tuple[np.ndarray, bool]:
    """(f_t(x), x in C_t); raises ValueError if t lies outside T."""
    fam.check_t(t)
    if len(x) != fam.m:
        raise ValueError(f"expected {fam.m} coordinates, got {len(x)}")
    member = True
    for i in range(fam.m):
        try:
            lo, hi = fam.wall_values(i, t, x)
        except (DomainError, ZeroDivisionError, ValueError, OverflowError):
            member = False
            break
        if not lo < x[i] < hi:
            member = False
            break
    env = fam._env(t, x)
    vals = []
    for c in fam.components:
        try:
            vals.append(float(c.expr().evaluate(env)))
        except (DomainError, ZeroDivisionError, ValueError, OverflowError):
            vals.append(math.nan)
    return np.array(vals, dtype=float), member


# ------------------------------------------------------------ cell geometry

def _clip01(iv: Interval) -> Interval:
    lo, hi = max(0.0, iv.lo), min(1.0, iv.hi)
    if lo > hi:
        lo, hi = 0.0, 1.0
    return Interval(lo, hi)


def _wall_range(fam: Family, i: int, b: Mapping, params: Mapping) -> Interval:
    try:
        lo = enclose(fam.cell.alpha[i].expr(), b, params).lo
        hi = enclose(fam.cell.beta[i].expr(), b, params).hi
        return _clip01(Interval(lo, max(lo, hi)))
    except (DomainError, ValueError):
        return Interval(0.0, 1.0)


def cell_boxes(fam: Family, params: Mapping[str, Interval], depth: int = 6) -> list[Box]:
    """Closed boxes whose union contains the closure of the cell.

    x_1 is split into 2^depth slabs; the range of each later variable is the
    hull of its wall enclosures over the box built so far.
    """
    if fam.m == 0:
        return [Box()]
    first = _wall_range(fam, 0, Box(), params)
    boxes = []
    for slab in _slabs(first, depth):
        b = Box({xname(0): slab})
        for i in range(1, fam.m):
            b[xname(i)] = _wall_range(fam, i, b, params)
        boxes.append(b)
    return boxes


def _slabs(iv: Interval, depth: int) -> list[Interval]:
    n = 2 ** depth
    edges = [iv.lo + (iv.hi - iv.lo) * k / n for k in range(n + 1)]
    edges[-1] = iv.hi
    return [Interval(edges[k], edges[k + 1]) for k in range(n)]


def sample_parameters(fam: Family, count: int, seed: int = 0) -> np.ndarray:
    if fam.k == 0:
        return np.zeros((count, 0))
    u = qmc.Halton(d=fam.k, scramble=True, seed=seed).random(count)
    lo = np.array([float(a) for a, _ in fam.T])
    hi = np.array([float(b) for _, b in fam.T])
    return lo + (hi - lo) * u


def sample_cell(fam: Family, t: Sequence[Number], count: int, seed: int = 0,
                margin: float = BOUNDARY_MARGIN) -> np.ndarray:
    """Points of C_t, placed by a scrambled Halton sequence between the walls."""
    if fam.m == 0:
        return np.zeros((count, 0))
    u = qmc.Halton(d=fam.m, scramble=True, seed=seed).random(count)
    u = np.clip(u, margin, 1 - margin)
    pts = np.empty_like(u)
    for s in range(count):
        x: list[float] = []
        for i in range(fam.m):
            lo, hi = fam.wall_values(i, t, x + [0.0] * (fam.m - i))
            x.append(lo + (hi - lo) * u[s, i])
        pts[s] = x
    return pts


def _lift_box(b: Box, params: Mapping) -> Box:
    return Box({**{k: v for k, v in params.items()}, **b})


# ------------------------------------------------------ per-term statistics

@dataclass
class TermStats:
    """Certified sup |b_l| and sup |d b_l / d x_i| of a monomial map over a cell."""

    sup: list[float]
    dsup: list[list[float | None]]          # None: identically zero
    failures: list[dict] = field(default_factory=list)

    @property
    def c1_bounded(self) -> bool:
        return not self.failures

    def c1_bound(self) -> float:
        vals = [v for row in self.dsup for v in row if v is not None]
        return max(vals, default=0.0)


def _witness(e: Expr, b: Box, params: Mapping, margin: float) -> dict:
    """A point near the low corner of a failing box and the value there."""
    pt = {k: v.lo + max(margin, 1e-12) * max(v.width, 1.0) for k, v in b.items()}
    env = {**{k: v.mid for k, v in params.items()}, **pt}
    try:
        val = abs(float(e.evaluate(env)))
    except (DomainError, ZeroDivisionError, ValueError, OverflowError):
        val = math.inf
    return {"point": pt, "value": val}


def term_stats(terms: Sequence[PreparedTerm], boxes: Sequence[Box], params: Mapping,
               margin: float = BOUNDARY_MARGIN, label: str = "") -> TermStats:
    sup, dsup, failures = [], [], []
    for l, term in enumerate(terms):
        e = term.expr()
        try:
            sup.append(max(enclose(e, b, params).mag() for b in boxes))
        except (DomainError, ValueError):
            sup.append(math.inf)
            bad = next(b for b in boxes if not _encloses(e, b, params))
            failures.append({"where": label, "term": l + 1, "var": None, "kind": "unbounded term",
                             **_witness(e, bad, params, margin)})
        row: list[float | None] = []
        for i in range(len(term.mu)):
            d = term.derivative(i)
            if d is None:
                row.append(None)
                continue
            de = d.expr()
            best, bad = 0.0, None
            for b in boxes:
                try:
                    best = max(best, enclose(de, b, params).mag())
                except (DomainError, ValueError):
                    bad = b
                    break
            if bad is not None or not math.isfinite(best):
                row.append(math.inf)
                failures.append({"where": label, "term": l + 1, "var": i + 1,
                                 "kind": "unbounded first derivative",
                                 **_witness(de, bad or boxes[0], params, margin)})
            else:
                row.append(best)
        dsup.append(row)
    return TermStats(sup, dsup, failures)


def _encloses(e: Expr, b: Box, params: Mapping) -> bool:
    try:
        enclose(e, b, params)
        return True
    except (DomainError, ValueError):
        return False


def range_box(terms: Sequence[PreparedTerm], boxes: Sequence[Box], params: Mapping) -> Box:
    """Hull of the range of the monomial map, as a box over b1..bN."""
    out = Box()
    for l, term in enumerate(terms):
        e = term.expr()
        iv = None
        for b in boxes:
            piece = enclose(e, b, params)
            iv = piece if iv is None else iv.hull(piece)
        out[bname(l)] = iv
    return out


# ---------------------------------------------------------------- checks

@dataclass
class C1Report:
    bounds: dict[str, float]
    failures: list[dict]

    @property
    def ok(self) -> bool:
        return not self.failures


def _wall_domain_boxes(boxes: Sequence[Box], i: int) -> list[Box]:
    return [Box({xname(k): b[xname(k)] for k in range(i)}) for b in boxes]


def check_c1_bounded(fam: Family, params: Mapping[str, Interval] | None = None,
                     depth: int = 6, margin: float = BOUNDARY_MARGIN) -> C1Report:
    """Certified bounds on the first x-derivatives of every monomial map of the
    family (components and walls), or witnesses where a bound fails."""
    params = dict(params if params is not None else fam.param_box())
    boxes = cell_boxes(fam, params, depth)
    bounds: dict[str, float] = {}
    failures: list[dict] = []
    if fam.components:
        st = term_stats(fam.components[0].terms, boxes, params, margin, "components")
        bounds["components"] = st.c1_bound()
        failures += st.failures
    for w in fam.cell.walls():
        if w.kind != "prepared":
            continue
        label = f"{w.which}{w.var + 1}"
        st = term_stats(w.payload.terms, _wall_domain_boxes(boxes, w.var), params, margin, label)
        bounds[label] = st.c1_bound()
        failures += st.failures
    for i, c in enumerate(fam.coordinates or ()):
        st = term_stats(c.terms, boxes, params, margin, f"coordinate{i + 1}")
        bounds[f"coordinate{i + 1}"] = st.c1_bound()
        failures += st.failures
    return C1Report(bounds, failures)


@dataclass
class Diagnostics:
    issues: list[dict]

    @property
    def ok(self) -> bool:
        return not self.issues


def wall_prepared_check(fam: Family, params: Mapping[str, Interval] | None = None,
                        depth: int = 6) -> Diagnostics:
    """Structural form of every wall plus C^1-boundedness of its monomial map."""
    params = dict(params if params is not None else fam.param_box())
    boxes = cell_boxes(fam, params, depth)
    issues: list[dict] = []
    for w in fam.cell.walls():
        label = f"{w.which}{w.var + 1}"
        if w.kind == "param":
            extra = {v for v in w.payload.variables() if not v.startswith("t")}
            if extra:
                issues.append({"wall": label, "issue": f"parameter wall uses {sorted(extra)}"})
            continue
        if w.kind != "prepared":
            continue
        pf: PreparedFunction = w.payload
        structural = [l for l, term in enumerate(pf.terms)
                      if any(term.mu[k] != 0 for k in range(w.var, fam.m))]
        for l in structural:
            issues.append({"wall": label, "issue": f"term {l + 1} depends on x_{w.var + 1} or later"})
        if structural:
            continue
        dom = _wall_domain_boxes(boxes, w.var)
        st = term_stats(pf.terms, dom, params, BOUNDARY_MARGIN, label)
        for f in st.failures:
            issues.append({"wall": label, "issue": f["kind"], "term": f["term"], "var": f["var"],
                           "witness": {"point": f["point"], "value": f["value"]}})
        if st.c1_bounded and not pf.unit_is_constant():
            try:
                certify_unit(pf.unit, range_box(pf.terms, dom, params))
            except (UnitCertificationError, DomainError) as exc:
                issues.append({"wall": label, "issue": f"unit not certified non-vanishing: {exc}"})
    return Diagnostics(issues)


# --------------------------------------------------------------- parsing

def _parse_number(v, where: str, errors: list[str]) -> Number | None:
    try:
        return as_number(v)
    except (TypeError, ValueError) as exc:
        errors.append(f"{where}: malformed number {v!r} ({exc})")
        return None


def _parse_expr(text, where: str, allowed, errors: list[str]) -> Expr | None:
    if not isinstance(text, (str, int, float)):
        errors.append(f"{where}: expected an expression string")
        return None
    try:
        return parse_expr(str(text), allowed)
    except ExprSyntaxError as exc:
        errors.append(f"{where}: {exc}")
        return None


def _params_only(k: int):
    names = {tname(i) for i in range(k)}
    return lambda v: v in names


def _parse_prepared(doc, where: str, k: int, arity: int, errors: list[str]) -> PreparedFunction | None:
    if not isinstance(doc, Mapping):
        errors.append(f"{where}: expected an object with terms, unit, j")
        return None
    terms_doc = doc.get("terms")
    if not isinstance(terms_doc, list) or not terms_doc:
        errors.append(f"{where}: terms must be a non-empty list")
        return None
    terms = []
    for l, td in enumerate(terms_doc):
        tw = f"{where}.terms[{l + 1}]"
        if not isinstance(td, Mapping):
            errors.append(f"{tw}: expected an object")
            return None
        a = _parse_expr(td.get("a", 1), f"{tw}.a", _params_only(k), errors)
        mu_doc = td.get("mu", [])
        if not isinstance(mu_doc, list):
            errors.append(f"{tw}.mu: expected a list")
            return None
        mu = [_parse_number(v, f"{tw}.mu", errors) for v in mu_doc]
        if any(v is None for v in mu) or a is None:
            return None
        if len(mu) > arity:
            errors.append(f"{tw}.mu: {len(mu)} exponents, expected at most {arity}")
            return None
        terms.append(PreparedTerm(a, tuple(mu) + (Fraction(0),) * (arity - len(mu))))
    n_terms = len(terms)
    bnames = {bname(l) for l in range(n_terms)}
    unit = _parse_expr(doc.get("unit", "1"), f"{where}.unit", lambda v: v in bnames, errors)
    j = doc.get("j", 1)
    if not isinstance(j, int) or not 1 <= j <= n_terms:
        errors.append(f"{where}.j: distinguished index must be in 1..{n_terms}")
        return None
    if unit is None:
        return None
    return PreparedFunction(tuple(terms), unit, j - 1)


def _parse_wall(doc, k: int, m: int, errors: list[str]) -> Wall | None:
    if not isinstance(doc, Mapping):
        errors.append("wall: expected an object")
        return None
    which, var, kind = doc.get("which"), doc.get("var"), doc.get("kind")
    where = f"wall {which}{var}"
    if which not in ("alpha", "beta"):
        errors.append(f"{where}: which must be alpha or beta")
        return None
    if not isinstance(var, int) or not 1 <= var <= m:
        errors.append(f"{where}: var must be in 1..{m}")
        return None
    payload = doc.get("payload")
    if kind == "const":
        v = _parse_number(payload, where, errors)
        return None if v is None else Wall(which, var - 1, kind, v)
    if kind == "param":
        e = _parse_expr(payload, where, _params_only(k), errors)
        return None if e is None else Wall(which, var - 1, kind, e)
    if kind == "prepared":
        pf = _parse_prepared(payload, where, k, m, errors)
        if pf is None:
            return None
        for l, term in enumerate(pf.terms):
            if any(term.mu[q] != 0 for q in range(var - 1, m)):
                errors.append(f"{where}: term {l + 1} depends on x_{var} or later")
                return None
        return Wall(which, var - 1, kind, pf)
    errors.append(f"{where}: kind must be const, param or prepared")
    return None


def parse_family(doc: Mapping, validate: bool = True) -> Family:
    """Family from a JSON document; raises FamilyError listing every problem."""
    errors: list[str] = []
    if not isinstance(doc, Mapping):
        raise FamilyError(["family document must be a JSON object"])
    k, m, n = doc.get("k", 0), doc.get("m"), doc.get("n")
    for name, v in (("k", k), ("m", m), ("n", n)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            errors.append(f"{name} must be a natural number")
    if errors:
        raise FamilyError(errors)
    T_doc = doc.get("T", [])
    if not isinstance(T_doc, list) or len(T_doc) != k:
        raise FamilyError([f"T must list {k} [lo, hi] pairs"])
    T = []
    for i, pair in enumerate(T_doc):
        if not isinstance(pair, list) or len(pair) != 2:
            errors.append(f"T[{i + 1}] must be a [lo, hi] pair")
            continue
        lo, hi = (_parse_number(v, f"T[{i + 1}]", errors) for v in pair)
        if lo is not None and hi is not None:
            if lo > hi:
                errors.append(f"T[{i + 1}] is empty")
            T.append((lo, hi))
    alpha: list[Wall] = [Wall("alpha", i, "const", Fraction(0)) for i in range(m)]
    beta: list[Wall] = [Wall("beta", i, "const", Fraction(1)) for i in range(m)]
    for wd in (doc.get("cell") or {}).get("walls", []):
        w = _parse_wall(wd, k, m, errors)
        if w is not None:
            (alpha if w.which == "alpha" else beta)[w.var] = w
    comps = []
    for c, cd in enumerate(doc.get("components", [])):
        pf = _parse_prepared(cd, f"component {c + 1}", k, m, errors)
        if pf is not None:
            comps.append(pf)
    coords = None
    if doc.get("coordinates") is not None:
        coords = []
        for c, cd in enumerate(doc["coordinates"]):
            pf = _parse_prepared(cd, f"coordinate {c + 1}", k, m, errors)
            if pf is not None:
                coords.append(pf)
        if len(coords) != m:
            errors.append(f"coordinates must list {m} maps")
        coords = tuple(coords)
    if not errors and len(comps) != n - m:
        errors.append(f"n - m = {n - m} components expected, got {len(comps)}")
    if comps and any(c.terms != comps[0].terms for c in comps[1:]):
        errors.append("components must share one bounded monomial map (identical terms)")
    if errors:
        raise FamilyError(errors)
    fam = Family(k, m, n, tuple(T), Cell(m, tuple(alpha), tuple(beta)), tuple(comps), coords,
                 str(doc.get("name", "")))
    if validate:
        problems = validate_family(fam)
        if problems:
            raise FamilyError(problems)
    return fam


def serialize_family(fam: Family) -> dict:
    walls = [w.to_json() for w in fam.cell.walls()
             if not (w.kind == "const" and w.payload == (0 if w.which == "alpha" else 1))]
    doc = {"name": fam.name, "k": fam.k, "m": fam.m, "n": fam.n,
           "T": [[number_to_json(lo), number_to_json(hi)] for lo, hi in fam.T],
           "cell": {"walls": walls},
           "components": [c.to_json() for c in fam.components]}
    if fam.coordinates is not None:
        doc["coordinates"] = [c.to_json() for c in fam.coordinates]
    return doc


# ------------------------------------------------------------ validation

def validate_family(fam: Family, samples: int = WALL_SAMPLES, seed: int = 0) -> list[str]:
    """Semantic checks: units non-vanishing (certified), walls ordered inside
    (0,1) and |f| <= 1 (sampled)."""
    problems: list[str] = []
    params = fam.param_box()
    try:
        boxes = cell_boxes(fam, params)
    except (DomainError, ValueError) as exc:
        return [f"cannot enclose the cell: {exc}"]
    if fam.components and not all(c.unit_is_constant() for c in fam.components):
        try:
            rb = range_box(fam.components[0].terms, boxes, params)
        except (DomainError, ValueError) as exc:
            rb = None
            problems.append(f"monomial map not bounded on the cell: {exc}")
        if rb is not None:
            for c, pf in enumerate(fam.components):
                if pf.unit_is_constant():
                    continue
                try:
                    certify_unit(pf.unit, rb)
                except UnitCertificationError as exc:
                    problems.append(f"component {c + 1}: unit not certified non-vanishing ({exc})")
    for c, pf in enumerate(fam.components):
        if pf.unit_is_constant():
            try:
                if float(pf.unit.evaluate({})) == 0:
                    problems.append(f"component {c + 1}: unit is identically zero")
            except (DomainError, ZeroDivisionError):
                problems.append(f"component {c + 1}: unit cannot be evaluated")
    if problems:
        return problems
    ts = sample_parameters(fam, max(1, samples // 50), seed)
    per_t = max(1, samples // len(ts))
    for t in ts:
        try:
            pts = sample_cell(fam, t, per_t, seed)
        except (DomainError, ZeroDivisionError, ValueError, OverflowError) as exc:
            return [f"walls cannot be evaluated at t={list(t)}: {exc}"]
        for x in pts:
            for i in range(fam.m):
                lo, hi = fam.wall_values(i, t, x)
                if not (0 <= lo < hi <= 1):
                    return [f"wall ordering 0 <= alpha{i + 1} < beta{i + 1} <= 1 violated at "
                            f"t={list(t)}, x={list(x)}: ({lo}, {hi})"]
            vals, _ = evaluate(fam, t, x)
            if not np.all(np.abs(vals) <= 1):
                return [f"|f| <= 1 violated at t={list(t)}, x={list(x)}: {vals.tolist()}"]
    return problems


def builtin_family(name: str, validate: bool = True) -> Family:
    """Load one of the families shipped in ``mildatlas/families``."""
    src = resources.files("mildatlas").joinpath("families", f"{name}.json")
    return parse_family(json.loads(src.read_text(encoding="utf-8")), validate=validate)
