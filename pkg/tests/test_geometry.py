import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import seg_dist
from riskocc.geometry import (
    EARTH_RADIUS,
    Centerline,
    DirectedSegment,
    Point2,
    closest_points_segments,
    dist_point_point,
    dist_point_segment,
    dist_points_segments,
    frenet_project,
    geodetic_to_local,
    local_to_geodetic,
    normalize_angle,
    segment_intersection,
    sub_polyline,
)

coord = st.floats(-200, 200, allow_nan=False)
pt = st.builds(Point2, coord, coord)


@pytest.mark.parametrize(
    "a,b,want",
    [((0, 0), (3, 4), 5.0), ((1, 1), (1, 1), 0.0), ((-2, 0), (2, 3), 5.0)],
)
def test_point_distance(a, b, want):
    assert dist_point_point(Point2(*a), Point2(*b)) == want


@pytest.mark.parametrize(
    "p,seg,want",
    [
        ((1, 1), ((0, 0), (2, 0)), 1.0),
        ((3, 0), ((0, 0), (2, 0)), 1.0),
        ((5, 5), ((2, 2), (2, 2)), math.hypot(3, 3)),
    ],
)
def test_segment_distance(p, seg, want):
    s = DirectedSegment(Point2(*seg[0]), Point2(*seg[1]))
    assert dist_point_segment(Point2(*p), s) == pytest.approx(want, abs=1e-12)


def test_degenerate_segment_matches_point_distance():
    assert dist_point_segment(Point2(5, 5), DirectedSegment(Point2(2, 2), Point2(2, 2))) == pytest.approx(4.2426, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(pt, pt, pt)
def test_segment_distance_matches_oracle(p, a, b):
    got = dist_point_segment(p, DirectedSegment(a, b))
    assert got == pytest.approx(seg_dist(*p, *a, *b), abs=1e-9)
    assert got <= min(dist_point_point(p, a), dist_point_point(p, b)) + 1e-9


def test_vectorised_distances_match_scalar():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-20, 20, (40, 2))
    starts = rng.uniform(-20, 20, (7, 2))
    ends = starts.copy()
    ends[:4] += rng.uniform(-5, 5, (4, 2))
    d = dist_points_segments(pts, starts, ends)
    assert d.shape == (40, 7)
    for i in range(40):
        for j in range(7):
            assert d[i, j] == pytest.approx(seg_dist(*pts[i], *starts[j], *ends[j]), abs=1e-12)


def test_geodetic_identity_and_unit_offsets():
    assert geodetic_to_local(39.7, 116.4, (39.7, 116.4)) == (0.0, 0.0)
    step = 6378137 * 1e-5 * math.pi / 180
    p = geodetic_to_local(39.7 + 1e-5, 116.4, (39.7, 116.4))
    assert p.x == pytest.approx(0.0, abs=1e-9) and p.y == pytest.approx(step, abs=1e-9)
    assert p.y == pytest.approx(1.11319, abs=1e-5)
    q = geodetic_to_local(0.0, 10.0 + 1e-5, (0.0, 10.0))
    assert q.x == pytest.approx(1.11319, abs=1e-5) and q.y == 0.0
    assert EARTH_RADIUS == 6378137.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-60, 60), st.floats(-170, 170), coord, coord)
def test_geodetic_round_trip(lat0, lon0, x, y):
    lat, lon = local_to_geodetic(Point2(x, y), (lat0, lon0))
    back = geodetic_to_local(lat, lon, (lat0, lon0))
    assert back.x == pytest.approx(x, abs=1e-6) and back.y == pytest.approx(y, abs=1e-6)


def test_geodetic_rejects_non_finite():
    with pytest.raises(ValueError):
        geodetic_to_local(float("nan"), 0.0, (0.0, 0.0))


@pytest.mark.parametrize("p,want", [((5, 0), (5, 0)), ((5, 2), (5, 2)), ((12, 0), (10, 0)), ((5, -3), (5, -3))])
def test_frenet_straight(p, want):
    cl = Centerline([(0, 0), (10, 0)])
    f = frenet_project(cl, Point2(*p))
    assert (f.s, f.d) == pytest.approx(want)


def test_frenet_polyline_and_round_trip():
    cl = Centerline([(0, 0), (10, 0), (10, 10)])
    assert cl.length == 20.0
    f = frenet_project(cl, Point2(9, 5))
    assert f.s == pytest.approx(15.0) and f.d == pytest.approx(1.0)
    p = cl.to_cartesian(15.0, 1.0)
    assert p == pytest.approx((9.0, 5.0))
    assert cl.heading_at(15.0) == pytest.approx(math.pi / 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 30), st.floats(-3, 3))
def test_frenet_inverse_on_straight_road(s, d):
    cl = Centerline([(1, 2), (1 + 30 * math.cos(0.3), 2 + 30 * math.sin(0.3))])
    f = frenet_project(cl, cl.to_cartesian(s, d))
    assert f.s == pytest.approx(s, abs=1e-9) and f.d == pytest.approx(d, abs=1e-9)


def test_centerline_rejects_bad_input():
    with pytest.raises(ValueError):
        Centerline([(0, 0)])
    with pytest.raises(ValueError):
        Centerline([(0, 0), (0, 0), (1, 0)])


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10))
def test_normalize_angle_range(a):
    w = normalize_angle(a)
    assert -math.pi <= w < math.pi
    assert math.cos(w) == pytest.approx(math.cos(a), abs=1e-9)
    assert math.sin(w) == pytest.approx(math.sin(a), abs=1e-9)


def test_segment_intersection_and_closest_points():
    s1 = DirectedSegment(Point2(0, 0), Point2(4, 4))
    s2 = DirectedSegment(Point2(0, 4), Point2(4, 0))
    assert segment_intersection(s1, s2) == pytest.approx((2, 2))
    d, a, b = closest_points_segments(DirectedSegment(Point2(0, 0), Point2(4, 0)), DirectedSegment(Point2(2, 3), Point2(2, 1)))
    assert d == pytest.approx(1.0) and a == pytest.approx((2, 0)) and b == pytest.approx((2, 1))
    assert segment_intersection(DirectedSegment(Point2(0, 0), Point2(1, 0)), DirectedSegment(Point2(0, 1), Point2(1, 1))) is None


def test_sub_polyline():
    cl = Centerline([(0, 0), (10, 0), (10, 10)])
    rest = sub_polyline(cl, 5.0)
    assert rest.points[0] == pytest.approx((5, 0)) and rest.length == pytest.approx(15.0)
    assert sub_polyline(cl, 20.0) is None
