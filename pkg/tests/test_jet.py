import math
from fractions import Fraction
from itertools import product as cartesian

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mildatlas import jet as jt
from mildatlas.expr import DomainError, parse_expr
from mildatlas.multiindex import enumerate_up_to

shapes = st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 6))


def rand_jet(rng, d, r, point, exact=False):
    lay = jt.layout(d, r)
    if exact:
        co = np.array([Fraction(int(v), 7) for v in rng.integers(-9, 10, lay.size)], dtype=object)
    else:
        co = rng.uniform(-1, 1, lay.size)
    return jt.Jet(co, d, r, np.asarray(point, dtype=object if exact else float))


def composable_pair(seed, d, e, r, exact=False):
    rng = np.random.default_rng(seed)
    x0 = [Fraction(int(v), 5) for v in rng.integers(-5, 6, e)] if exact else rng.uniform(-1, 1, e)
    gs = [rand_jet(rng, e, r, x0, exact) for _ in range(d)]
    y0 = [g.value for g in gs]
    return rand_jet(rng, d, r, y0, exact), gs


def taylor_of_polynomial(poly, x0, r):
    """Exact Taylor coefficients of sum c_a x^a at x0 via the binomial theorem."""
    out = {}
    for nu in enumerate_up_to(len(x0), r):
        acc = Fraction(0)
        for a, c in poly.items():
            term = Fraction(c)
            for ai, ni, xi in zip(a, nu, x0):
                if ni > ai:
                    term = 0
                    break
                term *= math.comb(ai, ni) * Fraction(xi) ** (ai - ni)
            acc += term
        out[nu] = acc
    return out


def poly_text(poly):
    parts = []
    for a, c in poly.items():
        mono = "*".join(f"x{i + 1}^{k}" for i, k in enumerate(a) if k)
        parts.append(f"({c})" + (f"*{mono}" if mono else ""))
    return " + ".join(parts)


# ------------------------------------------------------------- examples


def test_identity_jet():
    j = jt.eval_jet(parse_expr("x1"), [0.3], 2)
    assert np.allclose(j.coeffs, [0.3, 1, 0])


def test_sixth_power_and_exponential():
    assert np.allclose(jt.eval_jet(parse_expr("x1^6"), [1.0], 3).coeffs, [1, 6, 15, 20])
    e = jt.eval_jet(parse_expr("exp(x1)"), [0.0], 4)
    assert np.allclose(e.coeffs, [1 / math.factorial(k) for k in range(5)], rtol=1e-14)


def test_multiply_examples():
    x = jt.eval_jet(parse_expr("x1"), [0.0], 2)
    assert np.allclose(jt.multiply(x, x).coeffs, [0, 0, 1])
    a = jt.eval_jet(parse_expr("1 + x1"), [0.0], 2)
    b = jt.eval_jet(parse_expr("1 - x1"), [0.0], 2)
    assert np.allclose(jt.multiply(a, b).coeffs, [1, 0, -1])
    one = jt.Jet.constant(1.0, 1, 2, np.array([0.0]))
    assert np.allclose(jt.multiply(a, one).coeffs, a.coeffs)


def test_compose_examples():
    f = jt.eval_jet(parse_expr("x1^3"), [1.0], 3)
    g = jt.eval_jet(parse_expr("x1^2"), [1.0], 3)
    for comp in (jt.compose_faa, jt.compose_series):
        assert np.allclose(comp(f, [g]).coeffs, [1, 6, 15, 20])
    ident = jt.eval_jet(parse_expr("x1"), [1.0], 3)
    assert np.allclose(jt.compose_faa(ident, [g]).coeffs, g.coeffs)
    const = jt.Jet.constant(2.5, 1, 3, np.array([1.0]))
    assert np.allclose(jt.compose_series(const, [g]).coeffs, [2.5, 0, 0, 0])


@pytest.mark.parametrize("compose", [jt.compose_faa, jt.compose_series])
def test_gevrey_witness(compose):
    # F(y) = 1/(1-y), G(x) = x/(1-x): both have M = R = 1; F o G = 1 + sum 2^(k-1) x^k
    r = 6
    F = jt.eval_jet(parse_expr("1/(1 - x1)"), [0.0], r)
    G = jt.eval_jet(parse_expr("x1/(1 - x1)"), [0.0], r)
    got = compose(F, [G]).coeffs
    M = R = 0.5
    for k in range(1, r + 1):
        assert got[k] == pytest.approx(M * math.factorial(k) / R ** k / math.factorial(k), rel=1e-12)


def test_monomial_jet_examples():
    assert np.allclose(jt.monomial_jet([1.0], [0.5], 3).coeffs, [0.5, 1, 0, 0])
    # sqrt: f'' = -x^(-3/2)/4 = -2 at 1/4, so the normalized coefficient is -1
    assert np.allclose(jt.monomial_jet([0.5], [0.25], 2).coeffs, [0.5, 1, -1])
    assert np.allclose(jt.monomial_jet([-1.0], [0.5], 2).coeffs, [2, -4, 8])


def test_cr_norm_examples():
    assert float(jt.cr_norm(jt.eval_jet(parse_expr("x1"), [0.7], 3))) == pytest.approx(1.0)
    assert float(jt.cr_norm(jt.monomial_jet([1.5], [0.01], 3))) == pytest.approx(62.5)
    assert float(jt.cr_norm(jt.Jet.constant(0.0, 2, 3, np.zeros(2)))) == 0.0


def test_mismatched_shapes_rejected():
    a = jt.eval_jet(parse_expr("x1"), [0.1], 2)
    b = jt.eval_jet(parse_expr("x1"), [0.1], 3)
    with pytest.raises(jt.JetShapeError):
        jt.multiply(a, b)
    f = jt.eval_jet(parse_expr("x1"), [0.9], 2)
    with pytest.raises(jt.JetShapeError):
        jt.compose_faa(f, [a])


def test_monomial_jet_needs_positive_point():
    with pytest.raises(DomainError):
        jt.monomial_jet([0.5], [0.0], 2)


# ------------------------------------------------------------ properties


@settings(max_examples=60, deadline=None)
@given(shapes, st.integers(0, 2 ** 32 - 1))
def test_faa_matches_series(shape, seed):
    d, e, r = shape
    f, gs = composable_pair(seed, d, e, r)
    a, b = jt.compose_faa(f, gs).coeffs, jt.compose_series(f, gs).coeffs
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9 * max(1.0, np.max(np.abs(b))))


@settings(max_examples=20, deadline=None)
@given(shapes, st.integers(0, 2 ** 32 - 1))
def test_faa_matches_series_exactly_in_rationals(shape, seed):
    d, e, r = shape
    r = min(r, 4)
    f, gs = composable_pair(seed, d, e, r, exact=True)
    assert list(jt.compose_faa(f, gs).coeffs) == list(jt.compose_series(f, gs).coeffs)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 4), st.integers(0, 2 ** 32 - 1))
def test_eval_jet_matches_binomial_expansion(d, r, seed):
    rng = np.random.default_rng(seed)
    poly = {tuple(int(k) for k in rng.integers(0, 4, d)): Fraction(int(c), 3)
            for c in rng.integers(-6, 7, 4)}
    x0 = [Fraction(int(v), 4) for v in rng.integers(-4, 5, d)]
    j = jt.eval_jet(parse_expr(poly_text(poly)), np.array(x0, dtype=object), r,
                    [f"x{i + 1}" for i in range(d)], exact=True)
    expect = taylor_of_polynomial(poly, x0, r)
    for nu, c in expect.items():
        assert j.coeff(nu) == c


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 5), st.integers(0, 2 ** 32 - 1))
def test_multiply_is_truncated_convolution(d, r, seed):
    rng = np.random.default_rng(seed)
    a, b = rand_jet(rng, d, r, np.zeros(d), True), rand_jet(rng, d, r, np.zeros(d), True)
    got = jt.multiply(a, b)
    idx = jt.layout(d, r).indices
    for nu in idx:
        want = sum((a.coeff(p) * b.coeff(q) for p, q in cartesian(idx, idx)
                    if tuple(x + y for x, y in zip(p, q)) == nu), Fraction(0))
        assert got.coeff(nu) == want


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.8, 0.8), st.integers(1, 6))
def test_elementary_identities(x, r):
    u = jt.eval_jet(parse_expr("x1"), [x], r) * 0.5 + 0.1
    assert np.allclose((jt.exp(jt.log1p(u))).coeffs, (u + 1.0).coeffs, atol=1e-12)
    assert np.allclose((jt.reciprocal(u + 1.0) * (u + 1.0)).coeffs,
                       jt.Jet.constant(1.0, 1, r, u.point).coeffs, atol=1e-12)
    root = jt.real_power(u + 1.0, 0.5)
    assert np.allclose((root * root).coeffs, (u + 1.0).coeffs, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.integers(1, 4))
def test_faa_agrees_with_direct_evaluation(x, y, r):
    # exp(g) composed by Faa di Bruno equals the jet of exp(g) evaluated directly
    g_expr = parse_expr("x1*x2 + log1p(x1)")
    g = jt.eval_jet(g_expr, [x, y], r)
    f = jt.eval_jet(parse_expr("exp(x1)"), [float(g.value)], r)
    direct = jt.eval_jet(parse_expr("exp(x1*x2 + log1p(x1))"), [x, y], r)
    assert np.allclose(jt.compose_faa(f, [g]).coeffs, direct.coeffs, rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=2), st.integers(0, 4), st.data())
def test_monomial_jet_matches_closed_form(mu, r, data):
    x = [data.draw(st.floats(0.1, 0.9)) for _ in mu]
    j = jt.monomial_jet(mu, x, r)
    for nu in jt.layout(len(mu), r).indices:
        want = 1.0
        for m, n, xi in zip(mu, nu, x):
            falling = math.prod(m - q for q in range(n))
            want *= falling / math.factorial(n) * xi ** (m - n)
        assert j.coeff(nu) == pytest.approx(want, rel=1e-10, abs=1e-12)


@given(st.floats(-1, 1), st.floats(0.1, 10))
def test_cr_norm_is_homogeneous(x, c):
    j = jt.eval_jet(parse_expr("exp(x1)"), [x], 3)
    assert float(jt.cr_norm(j * c)) == pytest.approx(c * float(jt.cr_norm(j)))
