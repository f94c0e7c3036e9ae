"""Kinematic braking study: how early each scheme notices a hazard, and what
that buys in safe initial speed and braking effort.

Three schemes are compared:

``baseline``
    the hazard counts once its current position is inside the ICV's lane
    corridor;
``occupancy``
    the hazard counts once its risk footprint (the 3 s projected segment
    widened by the dynamic radius) touches the lane corridor;
``occupancy_plus_plan``
    as ``occupancy`` but against the corridor of the path produced by the
    local planner.

Braking uses constant deceleration: ``v = sqrt(2 a d)`` and ``a = v^2 / 2d``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .geometry import Centerline, Point2, closest_points_segments, dist_point_segment, frenet_project, sub_polyline
from .occupancy import compute_map, layout_samples
from .planner import PlannerConfig, collision_free, node_set_from_samples, plan
from .risk_model import RiskConfig, project_future
from .scenario import (
    ConfigError,
    DynamicObject,
    Frame,
    Maneuver,
    ParseError,
    StaticFactor,
    ValidationError,
    frame_from_dict,
    map_prior_from_dict,
)

SCHEMES = ("baseline", "occupancy", "occupancy_plus_plan")


@dataclass(frozen=True)
class BrakingConfig:
    a_max: float = 4.0
    v0: float = 8.0
    lookahead_corridor_halfwidth: float = 1.9

    def __post_init__(self):
        if not self.a_max > 0:
            raise ConfigError("a_max must be > 0")
        if not self.v0 >= 0:
            raise ConfigError("v0 must be >= 0")
        if not self.lookahead_corridor_halfwidth > 0:
            raise ConfigError("corridor half-width must be > 0")


@dataclass(frozen=True)
class SchemeResult:
    scheme: str
    detection_distance: float
    max_safe_speed: float
    avg_decel: float

    @property
    def conflict(self) -> bool:
        return math.isfinite(self.detection_distance)

    @property
    def unavoidable(self) -> bool:
        return math.isinf(self.avg_decel)


@dataclass(frozen=True)
class BrakingScenario:
    name: str
    frames: tuple[Frame, ...]
    hazard_id: str
    icv_start: Point2
    icv_speed: float
    lane_track: Centerline
    road: Centerline
    half_width: float
    resolution: float
    statics: tuple[StaticFactor, ...] = ()
    dest: Point2 | None = None
    maneuver: Maneuver = Maneuver.LEFT
    dt: float = 0.01
    duration: float = 15.0


@dataclass(frozen=True)
class StudyResult:
    results: tuple[SchemeResult, SchemeResult, SchemeResult]
    v0: float
    planned_track: Centerline | None = None
    # s3 over s2 max safe speed, and s3 over the operating speed v0
    speed_gain_vs_occupancy_pct: float = math.nan
    speed_gain_vs_v0_pct: float = math.nan
    # s2 -> s3 reduction of average deceleration at v0
    decel_reduction_pct: float = math.nan
    extras: dict = field(default_factory=dict)


def max_safe_speed(d: float, a_max: float) -> float:
    if d < 0:
        raise ValueError("distance must be >= 0")
    return math.sqrt(2.0 * a_max * d)


def avg_decel(v0: float, d: float) -> float:
    """Average deceleration magnitude to stop from ``v0`` within ``d``.

    ``d == 0`` with ``v0 > 0`` returns ``inf``: the collision cannot be
    avoided by braking.
    """
    if d < 0 or v0 < 0:
        raise ValueError("v0 and d must be >= 0")
    if d == 0.0:
        return math.inf if v0 > 0 else 0.0
    return v0 * v0 / (2.0 * d)


def percent_gain(new: float, base: float) -> float:
    return (new - base) / base * 100.0


def percent_reduction(before: float, after: float) -> float:
    return (before - after) / before * 100.0


def load_braking_scenario(path: str | Path) -> BrakingScenario:
    """Read a scenario: a header line ``{"type": "scenario", ...}`` followed
    by frame lines."""
    path = Path(path)
    header = None
    frames: list[Frame] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON: {exc.msg}", source=str(path), line=lineno) from None
            try:
                if header is None:
                    if doc.get("type") != "scenario":
                        raise ValidationError("first line must be the scenario header")
                    header = doc
                    continue
                frames.append(frame_from_dict(doc))
            except ValidationError as exc:
                raise ValidationError(exc.detail, source=str(path), line=lineno) from None
            if len(frames) > 1 and frames[-1].timestamp <= frames[-2].timestamp:
                raise ValidationError("timestamps must increase", source=str(path), line=lineno)
    if header is None or not frames:
        raise ValidationError("scenario needs a header and at least one frame", source=str(path))
    try:
        return _scenario_from_header(header, frames)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise ValidationError(exc.detail, source=str(path), line=1) from None
        raise ValidationError(f"scenario header: {exc!r}", source=str(path), line=1) from None


def _scenario_from_header(h: dict[str, Any], frames: list[Frame]) -> BrakingScenario:
    icv = h["icv"]
    road = h["road"]
    statics: tuple[StaticFactor, ...] = ()
    if h.get("statics"):
        # reuse the map prior reader for static factor validation and defaults
        stub = {
            "origin": {"lat": 0.0, "lon": 0.0},
            "statics": h["statics"],
            "maneuver_sets": {"straight": {"rows": [[{"col": 0, "x": 0.0, "y": 0.0}]]}},
        }
        statics = map_prior_from_dict(stub).statics
    hazard = h["hazard"]
    if not any(o.id == hazard for o in frames[0].dynamics):
        raise ValidationError(f"hazard {hazard!r} not present in the first frame")
    return BrakingScenario(
        name=str(h.get("name", "scenario")),
        frames=tuple(frames),
        hazard_id=str(hazard),
        icv_start=Point2(*map(float, icv["start"])),
        icv_speed=float(icv["speed"]),
        lane_track=Centerline(icv["lane_track"]),
        road=Centerline(road["centerline"]),
        half_width=float(road["half_width"]),
        resolution=float(road.get("resolution", 1.9)),
        statics=statics,
        dest=Point2(*map(float, road["dest"])) if "dest" in road else None,
        maneuver=Maneuver(icv.get("maneuver", "left")),
        dt=float(h.get("dt", 0.01)),
        duration=float(h.get("duration", 15.0)),
    )


def hazard_at(scenario: BrakingScenario, t: float) -> DynamicObject | None:
    """Hazard state at ``t``: latest frame at or before ``t``, extrapolated
    at constant speed and heading."""
    frame = None
    for f in scenario.frames:
        if f.timestamp <= t:
            frame = f
    if frame is None:
        return None
    for o in frame.dynamics:
        if o.id == scenario.hazard_id:
            lag = t - frame.timestamp
            p = Point2(
                o.position.x + o.speed * lag * math.cos(o.heading),
                o.position.y + o.speed * lag * math.sin(o.heading),
            )
            return DynamicObject(o.id, o.category, p, o.speed, o.heading)
    return None


def _nearest_on_track(track: Centerline, seg) -> tuple[float, Point2]:
    best = None
    for piece in track.segments():
        d, _, on_track = closest_points_segments(seg, piece)
        if best is None or d < best[0]:
            best = (d, on_track)
    return best


def detection_distance(
    scenario: BrakingScenario,
    icv_track: Centerline,
    scheme: str,
    risk_cfg: RiskConfig | None = None,
    braking: BrakingConfig | None = None,
) -> float:
    """Distance left along ``icv_track`` between the ICV and the conflict
    point at the first instant the scheme registers the hazard.

    The ICV drives ``icv_track`` at ``scenario.icv_speed`` from station 0.
    The conflict point is the track point nearest the hazard's current
    position (``baseline``) or its projected segment (footprint schemes).
    Returns ``inf`` when no conflict arises within the scenario duration.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    risk_cfg = risk_cfg or RiskConfig()
    braking = braking or BrakingConfig()
    hw = braking.lookahead_corridor_halfwidth
    footprint = scheme != "baseline"
    n_steps = int(math.floor(scenario.duration / scenario.dt + 1e-9))
    for k in range(n_steps + 1):
        t = k * scenario.dt
        s_icv = scenario.icv_speed * t
        ahead = sub_polyline(icv_track, s_icv)
        if ahead is None:
            break
        haz = hazard_at(scenario, t)
        if haz is None:
            continue
        if footprint:
            seg = project_future(haz, risk_cfg.horizon)
            gap, on_track = _nearest_on_track(ahead, seg)
            hit = gap <= hw + risk_cfg.dynamic_radius
        else:
            gap = min(dist_point_segment(haz.position, piece) for piece in ahead.segments())
            hit = gap <= hw
            on_track = None
        if not hit:
            continue
        if on_track is None:
            s_conf = frenet_project(ahead, haz.position).s
        else:
            s_conf = frenet_project(ahead, on_track).s
        return max(s_conf, 0.0)
    return math.inf


def scheme_result(scheme: str, d: float, braking: BrakingConfig) -> SchemeResult:
    if math.isinf(d):
        return SchemeResult(scheme, d, math.inf, 0.0)
    return SchemeResult(scheme, d, max_safe_speed(d, braking.a_max), avg_decel(braking.v0, d))


def planned_track(
    scenario: BrakingScenario,
    risk_cfg: RiskConfig | None = None,
    planner_cfg: PlannerConfig | None = None,
) -> Centerline:
    """Plan on the first frame's occupancy grid and return the smoothed path
    (prefixed with the ICV start when they differ)."""
    risk_cfg = risk_cfg or RiskConfig()
    planner_cfg = planner_cfg or PlannerConfig()
    samples = layout_samples(scenario.road, scenario.half_width, scenario.resolution)
    grid = compute_map(samples, scenario.frames[0], scenario.statics, risk_cfg, resolution=scenario.resolution)
    nodes = node_set_from_samples(samples, scenario.maneuver, scenario.dest)
    free = collision_free(nodes, grid, planner_cfg.risk_threshold)
    path = plan(free, scenario.icv_start, scenario.dest, scenario.maneuver, planner_cfg)
    pts = list(path.smoothed)
    if pts[0] != scenario.icv_start:
        pts.insert(0, scenario.icv_start)
    return Centerline(pts)


def run_study(
    scenario: BrakingScenario,
    braking: BrakingConfig | None = None,
    risk_cfg: RiskConfig | None = None,
    planner_cfg: PlannerConfig | None = None,
) -> StudyResult:
    braking = braking or BrakingConfig()
    risk_cfg = risk_cfg or RiskConfig()
    track = planned_track(scenario, risk_cfg, planner_cfg)
    tracks = {"baseline": scenario.lane_track, "occupancy": scenario.lane_track, "occupancy_plus_plan": track}
    results = tuple(
        scheme_result(s, detection_distance(scenario, tracks[s], s, risk_cfg, braking), braking) for s in SCHEMES
    )
    s1, s2, s3 = results
    speed_gain = percent_gain(s3.max_safe_speed, s2.max_safe_speed) if s2.conflict and s3.conflict else math.nan
    speed_vs_v0 = percent_gain(s3.max_safe_speed, braking.v0) if s3.conflict and braking.v0 > 0 else math.nan
    decel_red = percent_reduction(s2.avg_decel, s3.avg_decel) if s2.avg_decel > 0 and math.isfinite(s2.avg_decel) else math.nan
    return StudyResult(results, braking.v0, track, speed_gain, speed_vs_v0, decel_red)


def report_csv(study: StudyResult) -> str:
    lines = ["scheme,detection_distance,max_safe_speed,avg_decel_at_v0"]
    for r in study.results:
        lines.append(f"{r.scheme},{r.detection_distance:.6f},{r.max_safe_speed:.6f},{r.avg_decel:.6f}")
    return "\n".join(lines) + "\n"


def report_summary(study: StudyResult) -> str:
    s1, s2, s3 = study.results
    out = [
        f"operating speed v0 = {study.v0:.3f} m/s",
        f"max safe speed: baseline {s1.max_safe_speed:.3f}, occupancy {s2.max_safe_speed:.3f}, "
        f"occupancy+plan {s3.max_safe_speed:.3f} m/s",
        f"safe-speed gain of occupancy+plan over occupancy: {study.speed_gain_vs_occupancy_pct:.2f}%",
        f"safe-speed margin of occupancy+plan over v0: {study.speed_gain_vs_v0_pct:.2f}%",
        f"average deceleration at v0: occupancy {s2.avg_decel:.4f}, occupancy+plan {s3.avg_decel:.4f} m/s^2 "
        f"({study.decel_reduction_pct:.2f}% lower)",
    ]
    out.append(f"scheme ordering s3 >= s2 > s1 and decel s3 < s2: {'yes' if ordering_holds(study.results) else 'no'}")
    return "\n".join(out) + "\n"


def ordering_holds(results: Sequence[SchemeResult]) -> bool:
    s1, s2, s3 = results
    return s3.max_safe_speed >= s2.max_safe_speed > s1.max_safe_speed and s3.avg_decel < s2.avg_decel
