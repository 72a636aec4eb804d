"""Turning certificates into checked claims: sampled jet verification and reports."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from .atlas import Atlas, ChartSet, Grid, check_coverage
from .certcalc import MildCert
from .expr import DomainError, Expr
from .interval import Interval
from .jet import Jet, eval_jet, layout

SLACK = 1e-9
DEFAULT_SAMPLES = 500
DEFAULT_MARGIN = 1e-9
DEFAULT_MAX_CHARTS = 64


def thread_count() -> int:
    try:
        n = int(os.environ.get("MILDATLAS_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else min(8, os.cpu_count() or 1)


def digest(doc: Any) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return "sha256:" + hashlib.sha256(blob).hexdigest()


def unit_samples(d: int, count: int, seed: int, margin: float) -> np.ndarray:
    """Scrambled Halton points in [margin, 1 - margin]^d, shape (d, count)."""
    if d == 0:
        return np.zeros((0, count))
    u = qmc.Halton(d=d, scramble=True, seed=seed).random(count)
    return np.clip(u, margin, 1 - margin).T


# ------------------------------------------------------------ chart norms

def _norm_table(j: Jet) -> np.ndarray:
    """|f^(nu)| / |nu|! per (nu, sample)."""
    w = j.layout.norm_weights.reshape((-1,) + (1,) * (j.coeffs.ndim - 1))
    return np.abs(np.asarray(j.coeffs, dtype=float)) * w


def _check_chart(charts: ChartSet, idx: int, z: np.ndarray, tol: float) -> dict:
    cube = charts.grid[idx] if charts.m else None
    entry: dict = {"id": idx, "index": list(cube.index) if cube else [], "samples": int(z.shape[1])}
    if charts.m == 0:
        vals = [abs(float(e.evaluate({}))) for e in charts.components]
        worst = max(vals, default=0.0)
        entry.update(max_norm=worst, verdict="pass" if worst <= 1 + tol else "fail")
        if worst > 1 + tol:
            entry["witness"] = {"component": int(np.argmax(vals)), "nu": [], "point": [], "value": worst}
        return entry
    try:
        jets = charts.chart_jets(idx, z)
    except (DomainError, ZeroDivisionError, FloatingPointError) as exc:
        entry.update(max_norm=math.inf, verdict="fail", witness={"error": str(exc)})
        return entry
    worst, wit = -1.0, None
    for c, j in enumerate(jets):
        tab = _norm_table(j)
        tab = np.where(np.isnan(tab), np.inf, tab)
        k, s = np.unravel_index(int(np.argmax(tab)), tab.shape)
        v = float(tab[k, s])
        if v > worst:
            worst = v
            wit = {"component": c, "nu": list(j.layout.indices[k]),
                   "point": z[:, s].tolist(), "value": v}
    entry.update(max_norm=worst, verdict="pass" if worst <= 1 + tol else "fail")
    if worst > 1 + tol:
        entry["witness"] = wit
    return entry


def select_charts(grid: Grid, max_charts: int, seed: int) -> list[int]:
    """All charts, or the corner cubes plus a seeded random subset."""
    total = grid.count
    if total <= max_charts:
        return list(range(total))
    n, m = grid.side, grid.m
    picks = set()
    for corner in range(2 ** m):
        picks.add(grid.chart_id([(n - 1) if (corner >> i) & 1 else 0 for i in range(m)]))
    rng = np.random.default_rng(seed)
    while len(picks) < max_charts:
        picks.add(grid.chart_id([int(rng.integers(0, n)) for _ in range(m)]))
    return sorted(picks)


def verify_chart_norms(charts: ChartSet, samples: int = DEFAULT_SAMPLES, margin: float = DEFAULT_MARGIN,
                       tol: float = SLACK, seed: int = 0, max_charts: int = DEFAULT_MAX_CHARTS,
                       threads: int | None = None) -> dict:
    """Max over samples and |nu| <= r of |f^(nu)|/|nu|! per chart, against 1."""
    z = unit_samples(charts.m, samples, seed, margin)
    ids = select_charts(charts.grid, max_charts, seed) if charts.m else [0]
    threads = threads or thread_count()
    if threads > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda i: _check_chart(charts, i, z, tol), ids))
    else:
        results = [_check_chart(charts, i, z, tol) for i in ids]
    ok = all(r["verdict"] == "pass" for r in results)
    return {"charts": results, "charts_total": charts.grid.count if charts.m else 1,
            "charts_checked": len(results), "samples": samples, "margin": margin,
            "tol": tol, "seed": seed, "verdict": "pass" if ok else "fail"}


# ---------------------------------------------------- certificate checks

@dataclass
class Verdict:
    ok: bool
    checked: int
    witness: dict | None = None
    worst_ratio: float = 0.0

    def to_json(self) -> dict:
        return {"verdict": "pass" if self.ok else "fail", "checked": self.checked,
                "worst_ratio": self.worst_ratio, "witness": self.witness}


def box_samples(domain: Mapping[str, Interval], count: int, seed: int, margin: float) -> tuple[list[str], np.ndarray]:
    names = sorted(domain)
    u = unit_samples(len(names), count, seed, 0.0)
    pts = np.empty_like(u)
    for i, name in enumerate(names):
        iv = domain[name]
        eps = margin * max(iv.width, 1.0)
        pts[i] = iv.lo + eps + (iv.width - 2 * eps) * u[i]
    return names, pts


def verify_certificate(e: Expr, cert: MildCert, domain: Mapping[str, Interval], samples: int = DEFAULT_SAMPLES,
                       max_order: int = 6, seed: int = 0, margin: float = DEFAULT_MARGIN,
                       env: Mapping | None = None, slack: float = SLACK) -> Verdict:
    """Check |f^(nu)| <= B^(C+1) A^|nu| |nu|!^(C+1) (/x^nu if weak) at sampled points."""
    if max_order > cert.order:
        raise ValueError("max_order exceeds the certificate's order")
    names, pts = box_samples(domain, samples, seed, margin)
    jet = eval_jet(e, pts, max_order, names, env)
    lay = layout(len(names), max_order)
    co = np.asarray(jet.coeffs, dtype=float)
    worst, wit = 0.0, None
    for k, nu in enumerate(lay.indices):
        deriv = np.abs(co[k]) * float(lay.factorials[k])
        bound = cert.bound(sum(nu))
        if cert.weak:
            bound = bound / np.prod(pts ** np.array(nu, dtype=float).reshape(-1, 1), axis=0)
        ratio = np.where(deriv == 0, 0.0, deriv / np.maximum(bound, np.finfo(float).tiny))
        s = int(np.argmax(ratio))
        if ratio[s] > worst:
            worst = float(ratio[s])
            wit = {"nu": list(nu), "point": dict(zip(names, pts[:, s].tolist())),
                   "derivative": float(deriv[s]), "bound": float(np.broadcast_to(bound, deriv.shape)[s])}
    ok = worst <= 1 + slack
    return Verdict(ok, samples * lay.size, None if ok else wit, worst)


def fd_crosscheck(e: Expr, points: np.ndarray, variables: Sequence[str] | None = None,
                  order: int = 2, rtol: float = 1e-6, step: float = 1e-4,
                  env: Mapping | None = None) -> Verdict:
    """Jet derivatives up to order 2 against central finite differences."""
    if order > 2:
        raise ValueError("finite-difference oracle only covers order <= 2")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if variables is None:
        variables = sorted(v for v in e.variables() if v.startswith("x"))
    d = len(variables)
    if pts.shape[0] != d:
        pts = pts.T
    jet = eval_jet(e, pts, order, variables, env)
    lay = layout(d, order)
    co = np.asarray(jet.coeffs, dtype=float)
    base = dict(env or {})

    def f(x):
        return float(e.evaluate({**base, **dict(zip(variables, x))}))

    worst, wit = 0.0, None
    for s in range(pts.shape[1]):
        x0 = pts[:, s]
        for k, nu in enumerate(lay.indices):
            if sum(nu) == 0:
                fd = f(x0)
            else:
                fd = _central(f, x0, nu, step)
            jd = co[k, s] * float(lay.factorials[k])
            err = abs(fd - jd) / max(1.0, abs(jd))
            if err > worst:
                worst, wit = err, {"nu": list(nu), "point": x0.tolist(), "jet": jd, "fd": fd}
    ok = worst <= rtol
    return Verdict(ok, pts.shape[1] * lay.size, None if ok else wit, float(worst))


def _central(f, x0: np.ndarray, nu: Sequence[int], h: float) -> float:
    idx = [i for i, k in enumerate(nu) for _ in range(k)]
    hs = h * np.maximum(1.0, np.abs(x0))
    if len(idx) == 1:
        i = idx[0]
        e = np.zeros_like(x0); e[i] = hs[i]
        return (f(x0 + e) - f(x0 - e)) / (2 * hs[i])
    i, j = idx
    if i == j:
        e = np.zeros_like(x0); e[i] = hs[i]
        return (f(x0 + e) - 2 * f(x0) + f(x0 - e)) / hs[i] ** 2
    ei = np.zeros_like(x0); ei[i] = hs[i]
    ej = np.zeros_like(x0); ej[j] = hs[j]
    return (f(x0 + ei + ej) - f(x0 + ei - ej) - f(x0 - ei + ej) + f(x0 - ei - ej)) / (4 * hs[i] * hs[j])


# ---------------------------------------------------------------- reports

@dataclass
class Report:
    meta: dict
    sections: dict = field(default_factory=dict)
    audit: list = field(default_factory=list)
    growth: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(s.get("verdict", "pass") == "pass" for s in self.sections.values())

    def to_json(self) -> dict:
        return {"meta": self.meta, "sections": self.sections, "audit": self.audit,
                "growth": self.growth, "verdict": "pass" if self.ok else "fail"}


def emit_report(report: Report | Mapping) -> str:
    """Deterministic JSON: sorted keys, no timestamps, non-finite floats as strings."""
    doc = report.to_json() if isinstance(report, Report) else dict(report)
    return json.dumps(_finite(doc), sort_keys=True, indent=2) + "\n"


def _finite(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _finite(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_finite(x) for x in v]
    if isinstance(v, np.generic):
        return _finite(v.item())
    return v


def verify_atlas_doc(doc: Mapping, samples: int = DEFAULT_SAMPLES, margin: float = DEFAULT_MARGIN,
                     tol: float = SLACK, seed: int = 0, max_charts: int = DEFAULT_MAX_CHARTS,
                     coverage: int = 0) -> Report:
    """Rebuild the charts from atlas JSON and verify norms (and coverage if asked)."""
    charts = ChartSet.from_json(doc["charts"])
    meta = {"input_digest": digest(doc), "r": doc.get("r"), "t": doc.get("t"), "mode": doc.get("mode"),
            "seed": seed, "samples": samples, "margin": margin, "tol": tol,
            "charts": doc.get("counts", {}).get("charts")}
    rep = Report(meta)
    rep.sections["norms"] = verify_chart_norms(charts, samples, margin, tol, seed, max_charts)
    if coverage and doc.get("family") is not None:
        from .prepared import parse_family
        from .atlas import build_atlas
        fam = parse_family(doc["family"], validate=False)
        atlas = build_atlas(fam, doc["t"], int(doc["r"]), doc.get("mode", "standard"))
        cov = check_coverage(atlas, coverage, seed)
        rep.sections["coverage"] = {"samples": cov.samples, "covered": cov.covered,
                                    "max_error": cov.max_error, "failures": cov.failures[:5],
                                    "verdict": "pass" if cov.ok else "fail"}
    return rep


def atlas_report(atlas: Atlas, samples: int = DEFAULT_SAMPLES, seed: int = 0, coverage: int = 0,
                 max_charts: int = DEFAULT_MAX_CHARTS) -> Report:
    doc = atlas.to_json()
    rep = Report({"input_digest": digest(doc["family"]), "r": atlas.r, "t": doc["t"], "mode": atlas.mode,
                  "seed": seed, "samples": samples, "charts": atlas.count})
    rep.sections["norms"] = verify_chart_norms(atlas.charts, samples, seed=seed, max_charts=max_charts)
    if coverage:
        cov = check_coverage(atlas, coverage, seed)
        rep.sections["coverage"] = {"samples": cov.samples, "covered": cov.covered,
                                    "max_error": cov.max_error, "failures": cov.failures[:5],
                                    "verdict": "pass" if cov.ok else "fail"}
    rep.audit = atlas.audit
    return rep
