import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mildatlas import atlas as at
from mildatlas import certcalc as cc
from mildatlas import harness as hs
from mildatlas import prepared as pp
from mildatlas.expr import Const, parse_expr
from mildatlas.interval import box


def unit_chart(*components, r=2):
    return at.ChartSet(1, [Const(Fraction(0))], [Const(Fraction(1))],
                       [parse_expr(c) for c in components], at.Grid(1, 1), r)


@pytest.fixture(scope="module")
def hyper_doc():
    return json.loads(json.dumps(at.build_atlas(pp.builtin_family("hyperbola"), (0.5,), 3).to_json()))


# ------------------------------------------------------------- examples


def test_half_square_chart_passes():
    # x^2/2 on [0,1]: |f| <= 1/2, |f'| <= 1, |f''|/2! = 1/2; x1 itself has norm exactly 1
    res = hs.verify_chart_norms(unit_chart("x1", "x1^2/2"), samples=64)
    assert res["verdict"] == "pass"
    assert res["charts"][0]["max_norm"] == pytest.approx(1.0)


def test_three_halves_power_chart_fails():
    # f''/2! = (3/8) z^(-1/2) is unbounded at 0
    res = hs.verify_chart_norms(unit_chart("x1", "pow(x1, 3/2)"), samples=200, margin=1e-6)
    assert res["verdict"] == "fail"
    wit = res["charts"][0]["witness"]
    assert wit["component"] == 1 and wit["nu"] == [2]
    z = wit["point"][0]
    assert wit["value"] == pytest.approx(3 / 8 / math.sqrt(z), rel=1e-9)


def test_fd_crosscheck_example():
    v = hs.fd_crosscheck(parse_expr("exp(x1)*pow(x1, 1/2)"), np.array([[0.3]]))
    assert v.ok and v.worst_ratio < 1e-6
    with pytest.raises(ValueError):
        hs.fd_crosscheck(parse_expr("x1"), np.array([[0.3]]), order=3)


def test_verify_certificate_order_guard():
    with pytest.raises(ValueError):
        hs.verify_certificate(parse_expr("x1"), cc.MildCert(1, 1, order=2), box(x1=(0, 1)), max_order=3)


def test_emit_report_is_deterministic():
    rep = hs.Report({"b": 1, "a": math.inf}, {"norms": {"verdict": "pass", "x": np.float64(0.5)}})
    text = hs.emit_report(rep)
    assert text == hs.emit_report(rep)
    doc = json.loads(text)
    assert doc["meta"]["a"] == "inf" and doc["verdict"] == "pass"
    assert list(doc) == sorted(doc)


def test_verify_atlas_doc(hyper_doc):
    rep = hs.verify_atlas_doc(hyper_doc, samples=100, coverage=100)
    assert rep.ok, rep.sections
    assert rep.meta["input_digest"] == hs.digest(hyper_doc)
    assert rep.sections["coverage"]["covered"] == 100


def test_verify_atlas_doc_detects_tampering(hyper_doc):
    doc = json.loads(json.dumps(hyper_doc))
    doc["charts"]["components"][1] = f"100*({doc['charts']['components'][1]})"
    rep = hs.verify_atlas_doc(doc, samples=100)
    assert not rep.ok


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("MILDATLAS_THREADS", "3")
    assert hs.thread_count() == 3
    monkeypatch.setenv("MILDATLAS_THREADS", "many")
    assert hs.thread_count() >= 1


def test_threads_do_not_change_results():
    a = at.build_atlas(pp.builtin_family("synthetic2"), (0.5,), 2)
    one = hs.verify_chart_norms(a.charts, samples=16, max_charts=8, threads=1)
    four = hs.verify_chart_norms(a.charts, samples=16, max_charts=8, threads=4)
    assert one == four


def test_select_charts_includes_corners():
    grid = at.Grid(100, 2)
    ids = hs.select_charts(grid, 10, seed=3)
    assert len(ids) == 10 and ids == hs.select_charts(grid, 10, seed=3)
    for corner in ([0, 0], [0, 99], [99, 0], [99, 99]):
        assert grid.chart_id(corner) in ids
    assert hs.select_charts(at.Grid(2, 2), 10, 0) == [0, 1, 2, 3]


# ------------------------------------------------------------ properties


@given(st.integers(1, 4), st.integers(1, 64), st.integers(0, 1000), st.floats(0, 0.1))
def test_unit_samples_shape_and_range(d, n, seed, margin):
    u = hs.unit_samples(d, n, seed, margin)
    assert u.shape == (d, n)
    assert np.all(u >= margin) and np.all(u <= 1 - margin)


json_values = st.recursive(st.none() | st.booleans() | st.integers() | st.text(max_size=5),
                           lambda kids: st.lists(kids, max_size=3) | st.dictionaries(st.text(max_size=5), kids, max_size=3),
                           max_leaves=10)


@given(st.dictionaries(st.text(max_size=5), json_values, max_size=5))
def test_digest_ignores_key_order(doc):
    shuffled = dict(reversed(list(doc.items())))
    assert hs.digest(doc) == hs.digest(shuffled)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 0.8), st.floats(0.2, 0.8))
def test_fd_agrees_with_jets(a, b, x, y):
    e = parse_expr(f"({a})*x1^2*x2 + ({b})*exp(x1)*log1p(x2)")
    v = hs.fd_crosscheck(e, np.array([[x], [y]]), ["x1", "x2"], rtol=1e-5)
    assert v.ok, v.witness
