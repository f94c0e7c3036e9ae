"""Regenerate the bundled fixtures in src/riskocc/data/.

    python tools/make_fixtures.py

intersection_dair.json
    four-lane approach to an intersection (lanes 3.8 m, samples every
    1.9 m), stored in geodetic coordinates, with left/straight/right node
    sets that narrow towards the stop line.
overtake_merge.jsonl
    four frames at 1 s spacing: the ICV in the third lane from the right
    wants to turn right while a faster vehicle overtakes in the rightmost
    lane.
quant_leftturn.jsonl
    braking study scene: crash blocking the ICV's lane, a vehicle behind on
    the left, and a pedestrian crossing from the left kerb.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from riskocc.geometry import Centerline, Point2, local_to_geodetic
from riskocc.occupancy import layout_samples

DATA = Path(__file__).resolve().parents[1] / "src" / "riskocc" / "data"

ORIGIN = (39.7295, 116.4963)
HEADING = math.radians(20.0)
RES = 1.9
HALF_WIDTH = 7.6
N_ROWS = 33
LENGTH = RES * (N_ROWS - 1)
START = Point2(-30.0, -10.0)


def road_point(s: float, d: float) -> Point2:
    c, sn = math.cos(HEADING), math.sin(HEADING)
    return Point2(START.x + s * c - d * sn, START.y + s * sn + d * c)


def geo(p: Point2) -> list[float]:
    lat, lon = local_to_geodetic(p, ORIGIN)
    return [round(lat, 12), round(lon, 12)]


def intersection_prior() -> dict:
    cl = Centerline([road_point(0.0, 0.0), road_point(LENGTH, 0.0)])
    samples = layout_samples(cl, HALF_WIDTH, RES)
    grid = {(s.row, s.col): s.position for s in samples}
    narrow_from = N_ROWS - 6

    def node_rows(col_range_near, col_range_far):
        rows = []
        for r in range(N_ROWS):
            cols = col_range_far if r >= narrow_from else col_range_near
            rows.append([{"col": c, "lat": geo(grid[(r, c)])[0], "lon": geo(grid[(r, c)])[1]} for c in cols])
        return rows

    last = N_ROWS - 1
    sets = {
        "left": {"rows": node_rows(range(1, 8), range(4, 8)), "dest": geo(grid[(last, 7)])},
        "straight": {"rows": node_rows(range(1, 8), range(2, 7)), "dest": geo(grid[(last, 3)])},
        "right": {"rows": node_rows(range(1, 8), range(1, 5)), "dest": geo(grid[(last, 1)])},
    }
    statics = []
    for d in (-HALF_WIDTH, HALF_WIDTH):
        statics.append({"kind": "curb", "geometry": {"type": "polyline", "coords": [geo(road_point(0, d)), geo(road_point(LENGTH, d))]}})
    solid_from = RES * narrow_from
    for d in (-3.8, 0.0, 3.8):
        statics.append(
            {"kind": "solid_lane_line", "geometry": {"type": "polyline", "coords": [geo(road_point(solid_from, d)), geo(road_point(LENGTH, d))]}}
        )
    statics.append({"kind": "pothole", "geometry": {"type": "point", "coords": [geo(road_point(22.0, -5.2))]}})
    poly = [road_point(-2.0, -HALF_WIDTH - 1), road_point(LENGTH + 2, -HALF_WIDTH - 1), road_point(LENGTH + 2, HALF_WIDTH + 1), road_point(-2.0, HALF_WIDTH + 1)]
    return {
        "coordinates": "geodetic",
        "origin": {"lat": ORIGIN[0], "lon": ORIGIN[1]},
        "centerlines": {"approach": [geo(p) for p in cl.points]},
        "sampling": {"centerline": "approach", "half_width": HALF_WIDTH, "resolution": RES},
        "statics": statics,
        "maneuver_sets": sets,
        "road_polygon": [geo(p) for p in poly],
        "units": {"rsu-1": geo(road_point(-5.0, 12.0)), "rsu-2": geo(road_point(LENGTH + 5, -12.0))},
    }


def _obj(oid, cat, s, d, speed):
    p = road_point(s, d)
    return {"id": oid, "category": cat, "x": round(p.x, 6), "y": round(p.y, 6), "speed": speed, "heading": round(HEADING, 12)}


def overtake_frames() -> list[dict]:
    frames = []
    for k in range(4):
        t = float(k)
        icv = road_point(3.8 + 5.0 * t, 1.9)
        hdv_speed = 12.0 if k < 3 else 8.0
        hdv_s = -6.0 + 12.0 * t if k < 3 else -6.0 + 12.0 * 2 + 10.0
        dyn = [
            _obj("hdv-1", "small_vehicle", hdv_s, -5.7, hdv_speed),
            _obj("hdv-2", "large_vehicle", -10.0 + 6.0 * t, 5.7, 6.0),
        ]
        frames.append(
            {
                "t": t,
                "dynamics": dyn,
                "icv": {"id": "ego", "x": round(icv.x, 6), "y": round(icv.y, 6), "maneuver": "right"},
            }
        )
    return frames


def quant_scene() -> list[dict]:
    header = {
        "type": "scenario",
        "name": "quant_leftturn",
        "hazard": "ped-1",
        "dt": 0.01,
        "duration": 15.0,
        "icv": {
            "start": [0.0, 0.0],
            "speed": 8.0,
            "maneuver": "left",
            "lane_track": [[0.0, 0.0], [56.0, 0.0], [64.0, 3.8], [80.0, 3.8]],
        },
        "road": {"centerline": [[0.0, 0.0], [80.0, 0.0]], "half_width": 5.7, "resolution": RES, "dest": [79.8, 3.8]},
        "statics": [
            {"kind": "curb", "geometry": {"type": "polyline", "coords": [[0.0, -5.7], [80.0, -5.7]]}},
            {"kind": "curb", "geometry": {"type": "polyline", "coords": [[0.0, 5.7], [80.0, 5.7]]}},
            {"kind": "roadblock", "geometry": {"type": "point", "coords": [67.5, 0.0]}},
        ],
    }

    def state(t):
        return {
            "t": t,
            "dynamics": [
                {"id": "crash-a", "category": "small_vehicle", "x": 70.0, "y": 0.4, "speed": 0.0, "heading": 0.3},
                {"id": "crash-b", "category": "small_vehicle", "x": 72.5, "y": -0.3, "speed": 0.0, "heading": -2.6},
                {"id": "hdv-rear-left", "category": "small_vehicle", "x": -30.0 + 8.0 * t, "y": 3.8, "speed": 8.0, "heading": 0.0},
                {"id": "ped-1", "category": "pedestrian", "x": 50.0, "y": 9.0 - 1.5 * t, "speed": 1.5, "heading": -math.pi / 2},
            ],
        }

    return [header, state(0.0), state(1.0)]


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "intersection_dair.json").write_text(json.dumps(intersection_prior(), indent=1) + "\n")
    (DATA / "overtake_merge.jsonl").write_text("".join(json.dumps(f) + "\n" for f in overtake_frames()))
    (DATA / "quant_leftturn.jsonl").write_text("".join(json.dumps(f) + "\n" for f in quant_scene()))


if __name__ == "__main__":
    main()
