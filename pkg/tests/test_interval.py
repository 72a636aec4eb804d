import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mildatlas.expr import DomainError, FLOAT_OPS, parse_expr
from mildatlas.interval import (Interval, UnitCertificationError, box, certify_unit, enclose,
                                sup_abs)

from strategies import expressions


def grid_values(e, b, n=41):
    """Dense grid evaluation: a sampled inner approximation of the range."""
    names = sorted(b)
    axes = [np.linspace(b[k].lo, b[k].hi, n) for k in names]
    return np.array([e.evaluate(dict(zip(names, map(float, pt))), FLOAT_OPS)
                     for pt in itertools.product(*axes)])


boxes = st.tuples(st.floats(-1, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(0, 1)).map(
    lambda v: box(x1=(v[0], v[0] + v[1]), x2=(v[2], v[2] + v[3])))


def test_enclose_examples():
    iv = enclose(parse_expr("x1"), box(x1=(0.2, 0.8)))
    assert (iv.lo, iv.hi) == pytest.approx((0.2, 0.8))
    iv = enclose(parse_expr("x1*x2"), box(x1=(0, 1), x2=(0, 1)))
    assert iv.lo <= 0 and 1 <= iv.hi <= 1 + 1e-15
    with pytest.raises(DomainError):
        enclose(parse_expr("1/x1"), box(x1=(0, 1)))


def test_certify_unit_examples():
    d, M = certify_unit(parse_expr("2 + x1"), box(x1=(0, 1)))
    assert 2 - 1e-12 <= d <= 2 and 3 <= M <= 3 + 1e-12
    d, M = certify_unit(parse_expr("exp(x1)"), box(x1=(0, 1)))
    assert d <= 1 and math.e <= M <= math.e * (1 + 1e-14)
    with pytest.raises(UnitCertificationError):
        certify_unit(parse_expr("x1 - 0.5"), box(x1=(0, 1)))


def test_sup_abs_examples():
    s = sup_abs(parse_expr("pow(x1, 1/2)"), box(x1=(0, 1)))
    assert 1 <= s <= 1 + 1e-12
    assert sup_abs(parse_expr("t1^2/x1"), box(x1=(0.5, 1)), {"t1": 0.5}) >= 0.5
    assert sup_abs(parse_expr("-3/4"), box(x1=(0, 1))) == pytest.approx(0.75)


def test_interval_validation():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)


@settings(max_examples=80, deadline=None)
@given(expressions, boxes)
def test_enclosure_contains_all_samples(text, b):
    e = parse_expr(text)
    iv = enclose(e, b)
    vals = grid_values(e, b, 21)
    assert np.all(vals >= iv.lo) and np.all(vals <= iv.hi)


@settings(max_examples=60, deadline=None)
@given(expressions, boxes, st.integers(0, 4))
def test_sup_abs_bounds_samples(text, b, depth):
    e = parse_expr(text)
    assert np.max(np.abs(grid_values(e, b, 21))) <= sup_abs(e, b, depth=depth)


@settings(max_examples=60, deadline=None)
@given(expressions, boxes)
def test_unit_certificate_brackets_samples(text, b):
    e = parse_expr(f"exp({text}) + 1/10")
    d, M = certify_unit(e, b, depth=4)
    vals = np.abs(grid_values(e, b, 21))
    assert 0 < d <= vals.min() and vals.max() <= M


@given(st.floats(-5, 5), st.floats(0, 3), st.floats(-5, 5), st.floats(0, 3))
def test_product_rule_is_outward(a, w, c, v):
    x, y = Interval(a, a + w), Interval(c, c + v)
    p = x * y
    for s in (a, a + w):
        for t in (c, c + v):
            assert p.lo <= s * t <= p.hi
