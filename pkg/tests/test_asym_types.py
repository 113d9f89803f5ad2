"""Asymptotic types: strip validation, restriction, union, shadow
condition, subordination, coverings, serialization."""

import io
import json

import numpy as np
import pytest

from mellin_edge.asym_types import (
    AsymptoticType,
    CompactRegion,
    WeightData,
    build_covering,
    check_shadow,
    covering_reconstructs,
    covering_to_json,
    pairs_to_csv,
    restrict,
    set_equal,
    shadow_closure,
    subordinate,
    type_of_family,
    union,
)
from mellin_edge.errors import EmptyDomain, WrongKind
from mellin_edge.symbols import MeromorphicSymbol

from conftest import double_pole, simple_pole


def const_type(pairs, weight=None, nodes=(-1.0, 0.0, 1.0)):
    return AsymptoticType(np.array(nodes), [list(pairs)] * len(nodes), weight)


def branching_type():
    ys = np.linspace(-0.5, 0.5, 21)
    pairs = [[(complex(y), 0), (complex(-y), 0)] if y != 0 else [(0j, 1)]
             for y in ys]
    return AsymptoticType(ys, pairs)


def test_weight_strip():
    w = WeightData(gamma=0.25, theta=-2.0)
    assert w.strip == (0.25 - 2.0, 0.25)
    with pytest.raises(ValueError):
        WeightData(0.0, 0.0)


def test_weighted_ctor_validates_strip():
    w = WeightData(gamma=0.0, theta=-1.0)
    const_type([(0.2 + 0j, 0)], weight=w)            # inside (-0.5, 0.5)
    with pytest.raises(ValueError):
        const_type([(0.7 + 0j, 0)], weight=w)        # outside


def test_type_of_family_log_orders():
    # pole multiplicity m corresponds to log-order m - 1
    f = double_pole(0.25) + simple_pole(-0.75)
    r = type_of_family(f, np.array([0.0]))
    got = sorted(r.pairs_at(0.0), key=lambda pm: pm[0].real)
    assert got[0][0] == pytest.approx(-0.75) and got[0][1] == 0
    assert got[1][0] == pytest.approx(0.25) and got[1][1] == 1


def test_restrict_idempotent():
    r = branching_type()
    region = lambda p: p.real > 0.1
    r1 = restrict(r, region=region, u_box=(0.0, 0.5))
    r2 = restrict(r1, region=region, u_box=(0.0, 0.5))
    assert set_equal(r1, r2)
    with pytest.raises(EmptyDomain):
        restrict(r, u_box=(5.0, 6.0))


def test_union_identity_and_commutativity():
    r = branching_type()
    empty = AsymptoticType(r.y_nodes, [[] for _ in r.y_nodes])
    assert set_equal(union([r, empty]), r)
    a = const_type([(0.2 + 0j, 1)])
    b = const_type([(0.2 + 0j, 0), (-0.3 + 0j, 2)])
    assert set_equal(union([a, b]), union([b, a]))
    # coincident location takes the max log-order
    m = union([a, b]).pairs_at(0.0)
    orders = {round(p.real, 9): k for p, k in m}
    assert orders[0.2] == 1


def test_check_shadow_cases():
    w = WeightData(gamma=0.0, theta=-3.0)    # strip (-2.5, 0.5)
    # pass: single pair whose shadows leave the strip immediately
    ok, v = check_shadow(const_type([(-2.0 + 0j, 0)], weight=w))
    assert ok and v == []
    # pass: closed chain with non-increasing log-orders
    chain = [(0.2 + 0j, 1), (-0.8 + 0j, 1), (-1.8 + 0j, 2)]
    ok, v = check_shadow(const_type(chain, weight=w))
    assert ok
    # fail: missing shadow p - 1
    ok, v = check_shadow(const_type([(0.2 + 0j, 0)], weight=w))
    assert not ok and len(v) == 3 * 2     # two missing shadows per node
    # fail: shadow present but with too small a log-order
    bad = [(0.2 + 0j, 1), (-0.8 + 0j, 0), (-1.8 + 0j, 1)]
    ok, v = check_shadow(const_type(bad, weight=w))
    assert not ok
    with pytest.raises(WrongKind):
        check_shadow(const_type([(0.2 + 0j, 0)]))


def test_shadow_closure_passes_checker():
    w = WeightData(gamma=0.0, theta=-3.0)
    closed = shadow_closure([(0.2 + 0j, 1)], w)
    ok, _ = check_shadow(const_type(closed, weight=w))
    assert ok
    assert len(closed) == 3       # 0.2, -0.8, -1.8


def test_subordinate():
    f = double_pole(0.25)
    good = const_type([(0.25 + 0j, 1)])
    ok, v = subordinate(f, good, [0.0, 0.5])
    assert ok
    weak = const_type([(0.25 + 0j, 0)])
    ok, v = subordinate(f, weak, [0.0])
    assert not ok and v[0][2] == "multiplicity"
    wrong = const_type([(0.9 + 0j, 3)])
    ok, v = subordinate(f, wrong, [0.0])
    assert not ok and v[0][2] == "missing"


def test_build_covering_and_reconstruct():
    r = branching_type()
    cov = build_covering(r, strip=(-0.4, 0.4), u_box=(-0.5, 0.5),
                         eps_target=0.1)
    assert len(cov.sets) >= 2     # poles cross the strip boundary at |y|=0.4
    assert covering_reconstructs(r, cov)
    for u, k, e in cov.sets:
        assert e > 0
        lo, hi = cov.strip
        if k.re_bounds is not None:
            # compact carriers sit inside the closed strip (up to padding)
            assert k.re_bounds[0] >= lo - 0.1
            assert k.re_bounds[1] <= hi + 0.1
    obj = json.loads(json.dumps(covering_to_json(cov)))
    assert obj["strip"] == [-0.4, 0.4]
    assert len(obj["sets"]) == len(cov.sets)


def test_compact_region():
    k = CompactRegion.of_points([0.1 + 0.2j, -0.3 - 0.1j], pad=1e-3)
    assert k.contains(0.0 + 0.0j)
    assert not k.contains(1.0 + 0.0j)
    assert CompactRegion.of_points([]).contains(0.0) is False


def test_type_json_roundtrip():
    w = WeightData(gamma=0.1, theta=-1.5)
    r = const_type([(0.1 + 0.3j, 2), (-0.5 + 0j, 0)], weight=w)
    r2 = AsymptoticType.from_json(json.loads(json.dumps(r.to_json())))
    assert set_equal(r, r2)
    assert r2.weight == w


def test_pairs_csv_format():
    r = const_type([(0.25 + 0.5j, 1)], nodes=(0.0,))
    buf = io.StringIO()
    pairs_to_csv(r, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "y,Re p,Im p,log_order"
    assert lines[1].split(",") == ["0", "0.25", "0.5", "1"]
