"""Built-in example suite behind ``mildatlas selftest``.

Each check returns a short detail string or raises AssertionError.
"""

from __future__ import annotations

import math
import time
import traceback
from typing import Callable

import numpy as np

from . import certcalc as cc
from . import jet as jt
from . import multiindex as mi
from .atlas import build_atlas, check_coverage, subdivide
from .expr import parse_expr
from .harness import verify_certificate, verify_chart_norms
from .interval import UnitCertificationError, box, certify_unit, enclose
from .prepared import builtin_family, check_c1_bounded

CHECKS: list[tuple[str, Callable[[], str]]] = []


def check(name: str):
    def wrap(fn):
        CHECKS.append((name, fn))
        return fn
    return wrap


def _close(a, b, tol=1e-9) -> bool:
    return np.allclose(np.asarray(a, float), np.asarray(b, float), rtol=tol, atol=tol)


@check("multiindex.order_and_factorial")
def _oaf():
    assert mi.order_and_factorial((0, 0, 0)) == (0, 1)
    assert mi.order_and_factorial((2, 1)) == (3, 2)
    assert mi.order_and_factorial((3, 3)) == (6, 36)
    return "(3,3) -> (6, 36)"


@check("multiindex.precedes")
def _prec():
    assert not mi.precedes((2, 0), (0, 1))
    assert mi.precedes((1, 0), (0, 1))
    assert not mi.precedes((1, 1), (1, 1))
    return "graded-lex"


@check("multiindex.enumerate_up_to")
def _enum():
    assert mi.enumerate_up_to(2, 1) == ((0, 0), (1, 0), (0, 1))
    assert len(mi.enumerate_up_to(2, 3)) == math.comb(5, 2)
    return "10 indices for d=2, r=3"


@check("multiindex.decompositions")
def _dec():
    assert [ch for _, ch in mi.decompositions((2,), 2)] == [1, 2, 1]
    total = sum(ch for _, ch in mi.decompositions((2, 1), 3))
    assert total == 27
    return "sum Ch = 27"


@check("multiindex.faa_partitions")
def _faa():
    (p,) = mi.faa_partitions((1,), (1,))
    assert p.k == ((1,),) and p.l == ((1,),)
    (p,) = mi.faa_partitions((2,), (2,))
    assert p.k == ((2,),) and p.l == ((1,),)
    return "chain rule terms"


@check("jet.eval_jet")
def _ej():
    j = jt.eval_jet(parse_expr("x1^6"), [1.0], 3)
    assert _close(j.coeffs, [1, 6, 15, 20])
    j = jt.eval_jet(parse_expr("exp(x1)"), [0.0], 4)
    assert _close(j.coeffs, [1 / math.factorial(k) for k in range(5)])
    return "binomial and exponential series"


@check("jet.compose")
def _comp():
    f = jt.eval_jet(parse_expr("x1^3"), [1.0], 3)
    g = jt.eval_jet(parse_expr("x1^2"), [1.0], 3)
    a, b = jt.compose_faa(f, [g]), jt.compose_series(f, [g])
    assert _close(a.coeffs, [1, 6, 15, 20]) and _close(a.coeffs, b.coeffs)
    return "y^3 o x^2 = x^6"


@check("jet.monomial_and_norm")
def _mono():
    j = jt.monomial_jet([-1.0], [0.5], 2)
    assert _close(j.coeffs, [2, -4, 8])
    n = float(jt.cr_norm(jt.monomial_jet([1.5], [0.01], 3)))
    assert abs(n - 62.5) < 1e-9
    return f"norm of x^(3/2) at 0.01 = {n:g}"


@check("interval.enclose_and_unit")
def _iv():
    iv = enclose(parse_expr("x1*x2"), box(x1=(0, 1), x2=(0, 1)))
    assert iv.lo <= 0 and iv.hi >= 1 and iv.hi < 1 + 1e-12
    d, M = certify_unit(parse_expr("exp(x1)"), box(x1=(0, 1)))
    assert d <= 1 and M >= math.e
    try:
        certify_unit(parse_expr("x1 - 0.5"), box(x1=(0, 1)))
    except UnitCertificationError:
        return f"exp on [0,1]: ({d:g}, {M:.6g})"
    raise AssertionError("sign change not rejected")


@check("certcalc.constants")
def _consts():
    A, _ = cc.compose_constants(2, 1, 3, 1, 0, 1)
    assert abs(A - 9) < 1e-9
    A, B = cc.compose_constants(1, 1, 1, 1, 1, 2)
    assert abs(A - 9) < 1e-9 and abs(B - 2 / 3) < 1e-9
    ps = cc.power_substitute(cc.MildCert(1, 1, 0), [cc.MildCert(1, 1, 0, weak=True)], [3], 3)
    assert abs(ps.A - 6) < 1e-9
    h = cc.rescale_step(cc.MildCert(2, 1, 1), 3)
    assert abs(h - 1 / 6) < 1e-12
    return "compose 9, substitute 6, step 1/6"


@check("certcalc.gevrey")
def _gev():
    g = cc.to_gevrey(cc.MildCert(4, 2, 1))
    assert _close((g.R, g.M, g.alpha), (0.5, 2, 2))
    lifted = cc.lift_C(cc.MildCert(1, 0.5, 0), 1)
    assert (lifted.A, lifted.B, lifted.C) == (1, 1, 1)
    return "(4,2,1) -> R=1/2, M=2, alpha=2"


@check("certcalc.soundness")
def _sound():
    e = parse_expr("exp(x1)")
    dom = box(x1=(0, 1))
    good = verify_certificate(e, cc.expr_cert(e, dom), dom, samples=200)
    bad = verify_certificate(e, cc.MildCert(0.5, math.e, 0), dom, samples=200)
    assert good.ok and not bad.ok
    return f"exp certified, halved A refuted (ratio {bad.worst_ratio:.3g})"


@check("atlas.subdivide")
def _sub():
    grid, a2 = subdivide(cc.MildCert(18, 1, 0), 3, 2)
    assert (grid.side, grid.count) == (18, 324) and abs(a2 - 18 / 81) < 1e-15
    return "1/h = 18, m = 2: 324 cubes"


@check("prepared.c1_bounded")
def _c1():
    rep = check_c1_bounded(builtin_family("hyperbola"))
    assert rep.ok
    return "hyperbola first derivatives bounded"


@check("atlas.hyperbola_end_to_end")
def _hyp():
    atlas = build_atlas(builtin_family("hyperbola"), (0.5,), 4)
    norms = verify_chart_norms(atlas.charts, samples=200)
    cov = check_coverage(atlas, samples=100)
    assert norms["verdict"] == "pass" and cov.ok
    return f"{atlas.count} charts, coverage {cov.covered}/{cov.samples}"


@check("atlas.synthetic2_improved")
def _syn():
    atlas = build_atlas(builtin_family("synthetic2"), (0.5,), 3, "improved")
    norms = verify_chart_norms(atlas.charts, samples=100, max_charts=8)
    assert norms["verdict"] == "pass"
    return f"{atlas.count} charts"


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            detail, passed = fn(), True
        except Exception as exc:  # report every failure, keep going
            detail, passed = f"{type(exc).__name__}: {exc}", False
            if verbose:
                traceback.print_exc()
        ok &= passed
        if verbose:
            print(f"{'pass' if passed else 'FAIL'}  {name:34s} {time.perf_counter() - t0:6.2f}s  {detail}")
    if verbose:
        print(f"{len(CHECKS)} checks: {'all passed' if ok else 'FAILURES'}")
    return ok
