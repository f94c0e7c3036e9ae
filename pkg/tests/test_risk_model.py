import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_point_risk, eta_risk
from riskocc.geometry import Point2
from riskocc.risk_model import (
    RiskConfig,
    dynamic_contribution,
    dynamic_risk,
    eta,
    point_risk,
    project_future,
    risk_eta_cubic,
    static_risk,
)
from riskocc.scenario import (
    ConfigError,
    DynamicObject,
    Frame,
    GeometryType,
    ParticipantCategory as P,
    StaticFactor,
    StaticKind,
)

CFG = RiskConfig()


def obj(x, y, speed=0.0, heading=0.0, cat=P.SMALL_VEHICLE, oid="o"):
    return DynamicObject(oid, cat, Point2(x, y), speed, heading)


def curb_at(x, y, rv=0.5, w=0.5):
    return StaticFactor(StaticKind.CURB, GeometryType.POINT, (Point2(x, y),), rv, w)


@pytest.mark.parametrize("d,v,want", [(10.0, 5.0, 10 / 5.01), (0.0, 7.3, 0.0), (1.0, 0.0, 100.0)])
def test_eta(d, v, want):
    assert eta(d, v, CFG) == pytest.approx(want, rel=1e-12)
    assert eta(10.0, 5.0, CFG) == pytest.approx(1.99601, abs=1e-5)


def test_dynamic_risk_curve():
    assert dynamic_risk(0.0, CFG) == 1.0
    assert dynamic_risk(1.0, CFG) == pytest.approx(0.8000, abs=1e-9)
    assert dynamic_risk(3.0, CFG) == pytest.approx(0.2008, abs=1e-4)
    assert dynamic_risk(3.5, CFG) == 0.5
    assert dynamic_risk(100.0, CFG) == 0.5


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50))
def test_dynamic_risk_matches_oracle(e):
    assert dynamic_risk(e, CFG) == pytest.approx(eta_risk(e), abs=1e-12)
    assert 0.0 <= dynamic_risk(e, CFG) <= 1.0


def test_cubic_overshoot_is_clamped():
    # positive slope at 0 lifts the raw cubic just above 1 for small eta
    grid = [k / 1000 * 3 for k in range(1001)]
    peak = max(risk_eta_cubic(k * 1e-5) for k in range(10001))
    assert peak == pytest.approx(1.00094, abs=1e-5)
    assert min(risk_eta_cubic(e) for e in grid) > 0.0
    assert max(dynamic_risk(e, CFG) for e in grid) == 1.0
    assert dynamic_risk(0.05, RiskConfig(clamp_dynamic=False)) > 1.0


@pytest.mark.parametrize("d,want", [(0.4, 0.5), (1.0, 0.5), (1.5, 0.0)])
def test_static_risk_boundary_inclusive(d, want):
    assert static_risk(d, curb_at(0, 0), CFG) == want


def test_project_future():
    s = project_future(obj(1, 2, 0.0), 3.0)
    assert s.start == s.end
    s = project_future(obj(1, 2, 10.0, 0.0), 3.0)
    assert s.end == pytest.approx((31, 2)) and s.length == pytest.approx(30.0)
    s = project_future(obj(0, 0, 5.0, math.pi / 2), 3.0)
    assert s.end == pytest.approx((0, 15))


def test_empty_frame_zero():
    assert point_risk(Point2(0, 0), Frame(0.0, ()), (), CFG) == 0.0


def test_stationary_small_vehicle():
    f = Frame(0.0, (obj(1.0, 0.0),))
    assert point_risk(Point2(0, 0), f, (), CFG) == pytest.approx(0.35, abs=1e-15)


def test_dynamic_plus_static_sum():
    o = obj(3.0, 0.0, 2.0, math.pi, P.PEDESTRIAN)
    st_ = curb_at(0.5, 0.5)
    f = Frame(0.0, (o,))
    got = point_risk(Point2(0, 0), f, (st_,), CFG)
    want = brute_point_risk(0, 0, [(3.0, 0.0, 2.0, math.pi, 1.0)], [([(0.5, 0.5)], 0.5, 0.5)])
    assert got == pytest.approx(want, abs=1e-12)
    assert got == pytest.approx(eta_risk(3 / 2.01) + 0.25, abs=1e-12)


def test_gate_uses_segment_eta_uses_position():
    # p is 20 m ahead of a 10 m/s vehicle: outside a 2 m disc but on the path
    o = obj(0, 0, 10.0, 0.0, P.LARGE_VEHICLE)
    p = Point2(20, 0)
    assert dynamic_contribution(p, o, CFG) == pytest.approx(eta_risk(20 / 10.01) * 0.8)
    pos_cfg = RiskConfig(gating="position")
    assert dynamic_contribution(p, o, pos_cfg) == 0.0
    # behind the vehicle, beyond the radius: no risk
    assert dynamic_contribution(Point2(-2.5, 0), o, CFG) == 0.0


def test_risk_config_validation():
    with pytest.raises(ConfigError):
        RiskConfig(dynamic_radius=0)
    with pytest.raises(ConfigError):
        RiskConfig(gating="disc")


dyn_st = st.tuples(
    st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 15), st.floats(-math.pi, math.pi),
    st.sampled_from(list(P)),
)


@settings(max_examples=150, deadline=None)
@given(st.lists(dyn_st, max_size=6, unique_by=lambda t: (t[0], t[1])), st.floats(-10, 10), st.floats(-10, 10))
def test_point_risk_matches_brute_force(dyns, px, py):
    w = CFG.weights
    objs = tuple(obj(x, y, v, h, c, f"o{i}") for i, (x, y, v, h, c) in enumerate(dyns))
    got = point_risk(Point2(px, py), Frame(0.0, objs), (), CFG)
    want = brute_point_risk(px, py, [(o.position.x, o.position.y, o.speed, o.heading, w.of(o.category)) for o in objs], [])
    assert got == pytest.approx(want, abs=1e-12)
    assert got >= 0.0
