import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from mildatlas import certcalc as cc
from mildatlas import jet as jt
from mildatlas.expr import parse_expr
from mildatlas.harness import verify_certificate
from mildatlas.interval import box

from catalog import halved_a_case, soundness_cases
from strategies import expressions

CASES = soundness_cases()
pos = st.floats(0.05, 20, allow_nan=False)


# ------------------------------------------------------------- examples


def test_gevrey_examples():
    g = cc.to_gevrey(cc.MildCert(1, 1, 0))
    assert (g.M, g.R, g.alpha) == (1, 1, 1)
    g = cc.to_gevrey(cc.MildCert(4, 2, 1))
    assert (g.M, g.R, g.alpha) == pytest.approx((2, 0.5, 2))
    back = cc.to_gevrey(cc.from_gevrey(cc.GevreyCert(3, 0.2, 1.5)))
    assert (back.M, back.R, back.alpha) == pytest.approx((3, 0.2, 1.5), rel=1e-14)


def test_compose_examples():
    A, _ = cc.compose_constants(2, 1, 3, 1, 0, 1)
    assert A == 9
    A, B = cc.compose_constants(1, 1, 1, 1, 1, 2)
    assert A == pytest.approx(9, rel=1e-15) and B == pytest.approx(2 / 3, rel=1e-15)
    c = cc.compose(cc.MildCert(2, 1, arity=1), cc.MildCert(3, 1, arity=2))
    assert (c.A, c.arity) == (9, 2)


def test_compose_weak_identity_formula():
    g = cc.monomial_weak([0.5, 2], 1.0)
    c = cc.compose_weak(cc.MildCert(1, 1, arity=2), g)
    assert c.weak and c.A == g.A * (2 * 1 + 1)


def test_product_and_sum_examples():
    c = cc.MildCert(2, 3, 0)
    assert cc.product([c]) == c
    p = cc.product([c, c])
    assert (p.A, p.B, p.C) == (4, 9, 0)
    assert cc.sum_([c]) == c
    s = cc.sum_([c, c])
    assert (s.A, s.B, s.C) == (2, 6, 0)


def test_lift_examples():
    c = cc.MildCert(1, 0.5, 0)
    assert cc.lift_C(c, 0) == cc.MildCert(1, 1, 0)
    up = cc.lift_C(c, 1)
    assert (up.A, up.B, up.C) == (1, 1, 1)
    for k in range(7):
        assert up.bound(k) >= c.bound(k)
    with pytest.raises(cc.CertificateError):
        cc.lift_C(up, 0)


def test_power_substitute_examples():
    f = cc.MildCert(1, 1, 0, weak=True)
    assert cc.power_substitute(f, [f], [3], 3).A == 6
    with pytest.raises(cc.MissingDerivativeCertificates):
        cc.power_substitute(f, None, [3], 3)
    with pytest.raises(cc.CertificateError):
        cc.power_substitute(f, [f], [2], 3)


def test_rescale_examples():
    assert cc.rescale_step(cc.MildCert(2, 1, 1), 3) == pytest.approx(1 / 6)
    for r in (1, 4, 9):
        assert cc.rescale_step(cc.MildCert(1, 1, 0), r) == pytest.approx(1)
    with pytest.raises(cc.CertificateError):
        cc.rescale_step(cc.MildCert(1, 2, 0), 2)
    with pytest.raises(cc.CertificateError):
        cc.rescale_step(cc.MildCert(1, 1, 0, weak=True), 2)


def test_rescaled_square_has_unit_norm():
    cert = cc.MildCert(2, 1, 0)
    h = cc.rescale_step(cert, 4)
    assert h == pytest.approx(0.5)
    rng = np.random.default_rng(0)
    for P in rng.uniform(0, 1 - h, 10):
        x = rng.uniform(0, 1, 10)
        j = jt.eval_jet(parse_expr(f"({h}*x1 + {P})^2"), [x], 4)
        assert np.all(jt.cr_norm(j) <= 1 + 1e-12)


def test_monomial_weak_examples():
    assert cc.monomial_weak([0.5], 1.0) == cc.MildCert(1, 1, 0, weak=True)
    c = cc.monomial_weak([0, 0], 0.75)
    assert (c.A, c.B) == (1, 0.75)
    c = cc.monomial_weak([-1], 0.5)
    assert (c.A, c.B) == (1, 0.5)


def test_root_power_preconditions():
    with pytest.raises(cc.CertificateError):
        cc.root_power([1], [3], 2, 2, 1.0, 1.0)          # n < r^l
    with pytest.raises(cc.CertificateError):
        cc.root_power([0.5], [4], 2, 2, math.inf, 1.0)   # sqrt is not C^1-bounded
    assert cc.root_power([0, 0], [1, 1], 2, 2, None, 0.25).B == pytest.approx(0.5)


def test_fold_needs_value_bound():
    c = cc.MildCert(1, 2, 0)
    with pytest.raises(cc.CertificateError):
        cc.fold_B(c, 1.5)
    f = cc.fold_B(c, 1.0)
    assert (f.A, f.B) == (2, 1)


def test_invalid_certificates():
    for bad in (dict(A=0, B=1), dict(A=1, B=-1), dict(A=math.inf, B=1), dict(A=1, B=1, C=-1),
                dict(A=1, B=1, order=2.5)):
        with pytest.raises(cc.CertificateError):
            cc.MildCert(**bad)
    with pytest.raises(cc.CertificateError):
        cc.to_gevrey(cc.MildCert(1, 1, weak=True))
    with pytest.raises(cc.CertificateError):
        cc.compose(cc.MildCert(1, 1, 0), cc.MildCert(1, 1, 1))


def test_json_round_trip():
    for c in (cc.MildCert(2.5, 0.5, 1, 4, True, 3), cc.MildCert(1, 1)):
        assert cc.MildCert.from_json(c.to_json()) == c


def test_audit_records_rules():
    with cc.audit() as log:
        cc.product([cc.MildCert(1, 1)] * 2)
        cc.rescale_step(cc.MildCert(2, 1), 2)
    assert [e["op"] for e in log] == ["product", "rescale_step"]
    assert log[0]["output"]["A"] == 2
    cc.product([cc.MildCert(1, 1)] * 2)   # outside the block: nothing recorded
    assert len(log) == 2


# ------------------------------------------------------------ soundness


@pytest.mark.parametrize("name,e,cert,dom,order", CASES, ids=[c[0] for c in CASES])
def test_catalog_soundness(name, e, cert, dom, order):
    v = verify_certificate(e, cert, dom, samples=500, max_order=order)
    assert v.ok, v.witness


def test_halved_a_is_refuted():
    e, cert, dom = halved_a_case()
    v = verify_certificate(e, cert, dom, samples=500)
    assert not v.ok and v.witness["nu"] == [1]


def test_half_power_substitution_is_refused():
    # f = sqrt(x): f' = x^(-1/2)/2 is unbounded, so no weak certificate of any B covers it at nu = 0
    fprime = parse_expr("pow(x1, -1/2)/2")
    for B in (1.0, 1e3, 1e5):
        v = verify_certificate(fprime, cc.monomial_weak([-0.5], B), box(x1=(1e-14, 1e-12)),
                               samples=50, margin=0.0)
        assert not v.ok and v.witness["nu"] == [0]
    with pytest.raises(cc.MissingDerivativeCertificates):
        cc.power_substitute(cc.monomial_weak([0.5], 1.0), None, [3], 3)


# ------------------------------------------------------------ properties


@given(pos, pos, pos, st.integers(1, 5))
def test_c0_compose_constant_is_exact(A_f, A_g, B_f, d):
    A, B = cc.compose_constants(A_f, B_f, A_g, 1.0, 0, d)
    exact = Fraction(A_g) * (d * Fraction(A_f) + 1)
    assert Fraction(A) >= exact
    assert float(exact) == A or math.nextafter(float(exact), math.inf) == A


@given(pos, st.floats(0, 3), st.integers(1, 4), st.lists(st.integers(1, 12), min_size=1, max_size=4))
def test_power_substitute_constant_is_exact(A, C, d, n):
    n = (n * d)[:d]
    C = float(int(C))
    f = cc.MildCert(A, 1.0, C, weak=True, arity=d)
    c = cc.power_substitute(f, [f] * d, n, 1)
    exact = max(n) * Fraction(max(A, 1.0)) * (d + 1) ** (int(C) + 1)
    assert Fraction(c.A) >= exact and (float(exact) == c.A or math.nextafter(float(exact), math.inf) == c.A)


@given(st.floats(0.05, 10), st.floats(0.01, 10), st.floats(1, 4))
def test_gevrey_round_trip(M, R, alpha):
    g = cc.to_gevrey(cc.from_gevrey(cc.GevreyCert(M, R, alpha)))
    assert (g.M, g.R, g.alpha) == pytest.approx((M, R, alpha), rel=1e-12)


@given(pos, st.floats(0, 5), st.floats(0, 3), st.floats(0, 3))
def test_lift_dominates(A, B, C, dC):
    c = cc.MildCert(A, B, C)
    up = cc.lift_C(c, C + dC)
    for k in range(8):
        assert up.log_bound(k) >= c.log_bound(k) - 1e-12


boxes = st.tuples(st.floats(-1, 1), st.floats(0.01, 1), st.floats(-1, 1), st.floats(0.01, 1)).map(
    lambda v: box(x1=(v[0], v[0] + v[1]), x2=(v[2], v[2] + v[3])))


@settings(max_examples=60, deadline=None)
@given(expressions, boxes)
def test_expression_certificates_are_sound(text, b):
    e = parse_expr(text)
    assume(e.variables())
    cert = cc.expr_cert(e, b)
    v = verify_certificate(e, cert, b, samples=64, max_order=4)
    assert v.ok, (str(e), cert, v.witness)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=3), st.integers(0, 1))
def test_product_and_sum_rules_are_sound(rates, C):
    # exp(a x) on [0,1] is (|a|, e^max(a,0), 0)-mild
    certs = [cc.lift_C(cc.MildCert(max(abs(a), 1e-3), math.exp(max(a, 0.0))), C) for a in rates]
    terms = [f"exp(({a})*x1)" for a in rates]
    dom = box(x1=(0, 1))
    assert verify_certificate(parse_expr("*".join(terms)), cc.product(certs), dom, 100).ok
    assert verify_certificate(parse_expr(" + ".join(terms)), cc.sum_(certs), dom, 100).ok


@pytest.mark.parametrize("name,e,cert,dom,order", CASES[:20], ids=[c[0] for c in CASES[:20]])
def test_norm_bound_iff_unit_a_certificate(name, e, cert, dom, order):
    # sampled C^r-norm <= B  <=>  (1, B, 0)-mild up to order r at the same samples
    from mildatlas.harness import box_samples
    r = min(order, 4)
    names, pts = box_samples(dom, 200, 0, 1e-9)
    N = float(np.max(jt.cr_norm(jt.eval_jet(e, pts, r, names))))
    for B, expect in ((N * (1 + 1e-6), True), (N * (1 - 1e-6), False)):
        v = verify_certificate(e, cc.MildCert(1.0, B, 0, order=r, arity=len(names)), dom, 200,
                               max_order=r, slack=0.0)
        assert v.ok is expect


@given(pos, pos, pos, pos, st.floats(0, 3), st.integers(1, 4))
def test_composition_b_stays_below_outer_b(A_f, B_f, A_g, B_g, C, d):
    _, B = cc.compose_constants(A_f, B_f, A_g, B_g, C, d)
    assert B <= B_f * (1 + 1e-15)
    c = cc.compose(cc.MildCert(A_f, B_f, C, arity=d), cc.MildCert(A_g, B_g, C))
    assert c.B <= B_f


@given(pos, pos, pos, pos, st.floats(0, 3), st.integers(1, 4), st.floats(1, 3), st.integers(0, 3))
def test_rules_are_monotone(A_f, B_f, A_g, B_g, C, d, grow, which):
    base = [A_f, B_f, A_g, B_g]
    bigger = list(base)
    bigger[which] *= grow
    A0, B0 = cc.compose_constants(*base, C, d)
    A1, B1 = cc.compose_constants(*bigger, C, d)
    assert A1 >= A0 * (1 - 1e-12) and B1 >= B0 * (1 - 1e-12)
    f, g = cc.MildCert(A_f, B_f, C), cc.MildCert(A_g, B_g, C)
    F, G = cc.MildCert(A_f * grow, B_f * grow, C), cc.MildCert(A_g * grow, B_g * grow, C)
    for rule in (cc.product, cc.sum_):
        lo, hi = rule([f, g]), rule([F, G])
        assert hi.A >= lo.A and hi.B >= lo.B
    assert cc.lift_C(F, C + 1).A >= cc.lift_C(f, C + 1).A
    assert cc.scale(F, 2.0).B >= cc.scale(f, 2.0).B
