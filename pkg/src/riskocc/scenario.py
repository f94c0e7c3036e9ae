"""Traffic scene model, map priors and frame streams.

Map priors are JSON documents, frame streams are line-delimited JSON. Both
are validated on load; violations raise :class:`ValidationError` carrying
the offending field path (and line number for frame files).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

from .geometry import (
    Centerline,
    DirectedSegment,
    Point2,
    geodetic_to_local,
    normalize_angle,
)

BBOX_MARGIN = 50.0


class ScenarioError(ValueError):
    """Base class for input problems. ``source`` names the file, ``line`` the
    1-based line for line-delimited inputs."""

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.detail = message
        self.source = source
        self.line = line
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass


class ConfigError(ScenarioError):
    pass


class ParticipantCategory(str, Enum):
    PEDESTRIAN = "pedestrian"
    NON_MOTORIZED = "non_motorized"
    SMALL_VEHICLE = "small_vehicle"
    LARGE_VEHICLE = "large_vehicle"


class StaticKind(str, Enum):
    SOLID_LANE_LINE = "solid_lane_line"
    CURB = "curb"
    GUARDRAIL = "guardrail"
    ROADBLOCK = "roadblock"
    POTHOLE = "pothole"


class Maneuver(str, Enum):
    LEFT = "left"
    STRAIGHT = "straight"
    RIGHT = "right"


class GeometryType(str, Enum):
    POINT = "point"
    POINTS = "points"
    POLYLINE = "polyline"


@dataclass(frozen=True)
class DynamicObject:
    id: str
    category: ParticipantCategory
    position: Point2
    speed: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.speed) and self.speed >= 0.0):
            raise ValidationError(f"object {self.id!r}: speed must be finite and >= 0, got {self.speed}")
        if not all(math.isfinite(v) for v in (*self.position, self.heading)):
            raise ValidationError(f"object {self.id!r}: non-finite position or heading")
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class StaticFactor:
    kind: StaticKind
    geometry: GeometryType
    points: tuple[Point2, ...]
    risk_value: float
    weight: float

    def __post_init__(self):
        if not 0.0 <= self.risk_value <= 1.0:
            raise ValidationError(f"risk_value must lie in [0, 1], got {self.risk_value}")
        if not self.weight > 0.0:
            raise ValidationError(f"weight must be > 0, got {self.weight}")
        if not self.points:
            raise ValidationError("static factor geometry is empty")
        if self.geometry is GeometryType.POINT and len(self.points) != 1:
            raise ValidationError("point geometry takes exactly one coordinate")
        if self.geometry is GeometryType.POLYLINE and len(self.points) < 2:
            raise ValidationError("polyline geometry needs at least two coordinates")

    def segments(self) -> list[DirectedSegment]:
        """Decompose into segments; points become zero-length segments."""
        if self.geometry is GeometryType.POLYLINE:
            return [DirectedSegment(a, b) for a, b in zip(self.points, self.points[1:])]
        return [DirectedSegment(p, p) for p in self.points]


@dataclass(frozen=True)
class IcvState:
    """Optional ego-vehicle annotation carried by a frame line (used by replay)."""

    id: str
    position: Point2
    maneuver: Maneuver | None = None


@dataclass(frozen=True)
class Frame:
    timestamp: float
    dynamics: tuple[DynamicObject, ...] = ()
    unit: str | None = None
    icv: IcvState | None = None

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValidationError("frame timestamp must be finite")
        seen = set()
        for obj in self.dynamics:
            if obj.id in seen:
                raise ValidationError(f"duplicate object id {obj.id!r} in frame t={self.timestamp}")
            seen.add(obj.id)


# -- weights -----------------------------------------------------------------


@dataclass(frozen=True)
class Weights:
    dynamic: Mapping[ParticipantCategory, float]
    static: Mapping[StaticKind, tuple[float, float]]  # kind -> (risk_value, weight)

    def of(self, category: ParticipantCategory) -> float:
        return self.dynamic[category]

    def validate(self) -> "Weights":
        """Enforce the safety-first ordering; raise :class:`ConfigError` otherwise."""
        P = ParticipantCategory
        S = StaticKind
        missing = [c.value for c in P if c not in self.dynamic] + [k.value for k in S if k not in self.static]
        if missing:
            raise ConfigError(f"weights missing entries: {', '.join(missing)}")
        w = self.dynamic
        chain = [P.PEDESTRIAN, P.NON_MOTORIZED, P.LARGE_VEHICLE, P.SMALL_VEHICLE]
        for hi, lo in zip(chain, chain[1:]):
            if not w[hi] > w[lo]:
                raise ConfigError(f"weight ordering violated: {hi.value} ({w[hi]}) must exceed {lo.value} ({w[lo]})")
        for kind, (rv, sw) in self.static.items():
            if not 0.0 <= rv <= 1.0:
                raise ConfigError(f"static {kind.value}: risk_value {rv} outside [0, 1]")
            if not sw > 0.0:
                raise ConfigError(f"static {kind.value}: weight must be > 0")
            if not w[P.SMALL_VEHICLE] > sw:
                raise ConfigError(
                    f"weight ordering violated: small_vehicle ({w[P.SMALL_VEHICLE]}) must exceed static {kind.value} ({sw})"
                )
        for strong in (S.CURB, S.GUARDRAIL):
            for weak in (S.POTHOLE, S.SOLID_LANE_LINE):
                if not self.static[strong][1] > self.static[weak][1]:
                    raise ConfigError(f"weight ordering violated: {strong.value} must outweigh {weak.value}")
        if any(v <= 0.0 for v in w.values()):
            raise ConfigError("dynamic weights must be > 0")
        return self

    def with_overrides(self, overrides: Mapping[str, Any]) -> "Weights":
        """Apply a config mapping such as ``{"pedestrian": 1.2, "curb": {"weight": 0.6}}``."""
        dyn = dict(self.dynamic)
        sta = dict(self.static)
        for key, val in overrides.items():
            try:
                if key in ParticipantCategory._value2member_map_:
                    dyn[ParticipantCategory(key)] = float(val)
                elif key in StaticKind._value2member_map_:
                    kind = StaticKind(key)
                    rv, sw = sta[kind]
                    if isinstance(val, Mapping):
                        rv = float(val.get("risk_value", rv))
                        sw = float(val.get("weight", sw))
                    else:
                        sw = float(val)
                    sta[kind] = (rv, sw)
                else:
                    raise ConfigError(f"unknown weight key {key!r}")
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"weights.{key}: {exc}") from None
        return Weights(dyn, sta).validate()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {c.value: v for c, v in self.dynamic.items()}
        for k, (rv, sw) in self.static.items():
            out[k.value] = {"risk_value": rv, "weight": sw}
        return out


def default_weights() -> Weights:
    """Default participant weights and static ``(risk_value, weight)`` pairs.

    Static products stay below a stationary small vehicle's 0.5 * 0.7, so a
    parked car always outranks road furniture.
    """
    P, S = ParticipantCategory, StaticKind
    return Weights(
        dynamic={
            P.PEDESTRIAN: 1.0,
            P.NON_MOTORIZED: 0.9,
            P.LARGE_VEHICLE: 0.8,
            P.SMALL_VEHICLE: 0.7,
        },
        static={
            S.CURB: (0.5, 0.5),
            S.GUARDRAIL: (0.5, 0.5),
            S.ROADBLOCK: (0.6, 0.5),
            S.POTHOLE: (0.6, 0.3),
            S.SOLID_LANE_LINE: (0.5, 0.3),
        },
    ).validate()


# -- map prior -----------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    col: int
    position: Point2
    risk: float | None = None


@dataclass(frozen=True)
class ManeuverNodeSet:
    maneuver: Maneuver
    rows: tuple[tuple[Node, ...], ...]
    dest: Point2 | None = None

    def __post_init__(self):
        if not self.rows:
            raise ValidationError(f"maneuver set {self.maneuver.value!r} has no rows")
        for i, row in enumerate(self.rows):
            cols = [n.col for n in row]
            if any(b <= a for a, b in zip(cols, cols[1:])):
                raise ValidationError(f"maneuver set {self.maneuver.value!r} row {i}: cols must be strictly increasing")

    def nodes(self) -> Iterable[tuple[int, Node]]:
        for r, row in enumerate(self.rows):
            for n in row:
                yield r, n

    def __len__(self) -> int:
        return sum(len(row) for row in self.rows)


@dataclass(frozen=True)
class SamplingSpec:
    centerline: str
    half_width: float
    resolution: float = 1.9


@dataclass(frozen=True)
class MapPrior:
    origin: tuple[float, float]
    centerlines: Mapping[str, Centerline]
    statics: tuple[StaticFactor, ...]
    maneuver_sets: Mapping[Maneuver, ManeuverNodeSet]
    road_polygon: tuple[Point2, ...]
    sampling: SamplingSpec | None = None
    units: Mapping[str, Point2] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def bbox(self, margin: float = 0.0) -> tuple[float, float, float, float] | None:
        if not self.road_polygon:
            return None
        xs = [p.x for p in self.road_polygon]
        ys = [p.y for p in self.road_polygon]
        return min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin


def _num(val: Any, path: str) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"{path}: expected a number, got {val!r}")
    v = float(val)
    if not math.isfinite(v):
        raise ValidationError(f"{path}: non-finite number")
    return v


class _PointReader:
    """Reads coordinates as ``[x, y]``, ``{"x","y"}`` or, in geodetic files,
    ``[lat, lon]`` / ``{"lat","lon"}``."""

    def __init__(self, geodetic: bool, origin: tuple[float, float]):
        self.geodetic = geodetic
        self.origin = origin

    def __call__(self, val: Any, path: str) -> Point2:
        if isinstance(val, Mapping):
            if "lat" in val and "lon" in val:
                return geodetic_to_local(_num(val["lat"], path + ".lat"), _num(val["lon"], path + ".lon"), self.origin)
            if "x" in val and "y" in val:
                return Point2(_num(val["x"], path + ".x"), _num(val["y"], path + ".y"))
            raise ValidationError(f"{path}: coordinate object needs x/y or lat/lon")
        if isinstance(val, (list, tuple)) and len(val) == 2:
            a, b = _num(val[0], path + "[0]"), _num(val[1], path + "[1]")
            if self.geodetic:
                return geodetic_to_local(a, b, self.origin)
            return Point2(a, b)
        raise ValidationError(f"{path}: malformed coordinate {val!r}")


def _enum(cls, val: Any, path: str):
    try:
        return cls(val)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ValidationError(f"{path}: {val!r} is not one of {choices}") from None


def map_prior_from_dict(doc: Mapping[str, Any], weights: Weights | None = None, source: str | None = None) -> MapPrior:
    weights = weights or default_weights()
    try:
        return _map_prior_from_dict(doc, weights)
    except ValidationError as exc:
        raise ValidationError(exc.detail, source=source) from None


def _map_prior_from_dict(doc: Mapping[str, Any], weights: Weights) -> MapPrior:
    if not isinstance(doc, Mapping):
        raise ValidationError("top level must be an object")
    coords = doc.get("coordinates", "local")
    if coords not in ("local", "geodetic"):
        raise ValidationError(f"coordinates: expected 'local' or 'geodetic', got {coords!r}")
    org = doc.get("origin")
    if not isinstance(org, Mapping) or "lat" not in org or "lon" not in org:
        raise ValidationError("origin: expected {lat, lon}")
    origin = (_num(org["lat"], "origin.lat"), _num(org["lon"], "origin.lon"))
    read = _PointReader(coords == "geodetic", origin)

    centerlines = {}
    for name, pts in dict(doc.get("centerlines", {})).items():
        path = f"centerlines.{name}"
        if not isinstance(pts, list):
            raise ValidationError(f"{path}: expected a list of coordinates")
        try:
            centerlines[name] = Centerline([read(p, f"{path}[{i}]") for i, p in enumerate(pts)])
        except ValidationError:
            raise
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from None

    statics = []
    for i, st in enumerate(doc.get("statics", [])):
        path = f"statics[{i}]"
        if not isinstance(st, Mapping):
            raise ValidationError(f"{path}: expected an object")
        kind = _enum(StaticKind, st.get("kind"), path + ".kind")
        geo = st.get("geometry")
        if not isinstance(geo, Mapping):
            raise ValidationError(f"{path}.geometry: expected {{type, coords}}")
        gtype = _enum(GeometryType, geo.get("type"), path + ".geometry.type")
        raw = geo.get("coords")
        if not isinstance(raw, list):
            raise ValidationError(f"{path}.geometry.coords: expected a list")
        if gtype is GeometryType.POINT and raw and not isinstance(raw[0], (list, Mapping)):
            raw = [raw]
        pts = tuple(read(p, f"{path}.geometry.coords[{j}]") for j, p in enumerate(raw))
        rv_default, w_default = weights.static[kind]
        rv = _num(st.get("risk_value", rv_default), path + ".risk_value")
        w = _num(st.get("weight", w_default), path + ".weight")
        try:
            statics.append(StaticFactor(kind, gtype, pts, rv, w))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc.detail}") from None

    sets_doc = doc.get("maneuver_sets")
    if not isinstance(sets_doc, Mapping) or not sets_doc:
        raise ValidationError("maneuver_sets: at least one maneuver set is required")
    maneuver_sets = {}
    for key, body in sets_doc.items():
        path = f"maneuver_sets.{key}"
        man = _enum(Maneuver, key, path)
        if not isinstance(body, Mapping) or not isinstance(body.get("rows"), list):
            raise ValidationError(f"{path}.rows: expected a list of rows")
        rows = []
        for r, row in enumerate(body["rows"]):
            nodes = []
            for c, nd in enumerate(row):
                npath = f"{path}.rows[{r}][{c}]"
                if not isinstance(nd, Mapping) or "col" not in nd:
                    raise ValidationError(f"{npath}: expected {{col, x, y}} or {{col, lat, lon}}")
                col = nd["col"]
                if isinstance(col, bool) or not isinstance(col, int):
                    raise ValidationError(f"{npath}.col: expected an integer")
                nodes.append(Node(col, read(nd, npath)))
            rows.append(tuple(nodes))
        dest = read(body["dest"], path + ".dest") if "dest" in body else None
        try:
            maneuver_sets[man] = ManeuverNodeSet(man, tuple(rows), dest)
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc.detail}") from None
        if not len(maneuver_sets[man]):
            raise ValidationError(f"{path}: maneuver set has no nodes")

    poly = tuple(read(p, f"road_polygon[{i}]") for i, p in enumerate(doc.get("road_polygon", [])))

    sampling = None
    if "sampling" in doc:
        sd = doc["sampling"]
        if not isinstance(sd, Mapping):
            raise ValidationError("sampling: expected an object")
        name = sd.get("centerline")
        if name not in centerlines:
            raise ValidationError(f"sampling.centerline: unknown centerline {name!r}")
        hw = _num(sd.get("half_width"), "sampling.half_width")
        res = _num(sd.get("resolution", 1.9), "sampling.resolution")
        if hw <= 0 or res <= 0:
            raise ValidationError("sampling: half_width and resolution must be > 0")
        sampling = SamplingSpec(name, hw, res)

    units = {name: read(p, f"units.{name}") for name, p in dict(doc.get("units", {})).items()}

    prior = MapPrior(origin, centerlines, tuple(statics), maneuver_sets, poly, sampling, units)
    return replace(prior, warnings=tuple(_bbox_warnings(prior)))


def _bbox_warnings(prior: MapPrior) -> list[str]:
    box = prior.bbox(BBOX_MARGIN)
    if box is None:
        return []
    x0, y0, x1, y1 = box

    def inside(p: Point2) -> bool:
        return x0 <= p.x <= x1 and y0 <= p.y <= y1

    out = []
    for name, cl in prior.centerlines.items():
        if not all(inside(p) for p in cl.points):
            out.append(f"centerline {name!r} leaves the road bounding box")
    for i, st in enumerate(prior.statics):
        if not all(inside(p) for p in st.points):
            out.append(f"statics[{i}] ({st.kind.value}) lies outside the road bounding box")
    for man, ns in prior.maneuver_sets.items():
        if not all(inside(n.position) for _, n in ns.nodes()):
            out.append(f"maneuver set {man.value!r} has nodes outside the road bounding box")
    return out


def load_map_prior(path: str | Path, weights: Weights | None = None) -> MapPrior:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", source=str(path), line=exc.lineno) from None
    return map_prior_from_dict(doc, weights, source=str(path))


def map_prior_to_dict(prior: MapPrior) -> dict[str, Any]:
    """Serialise in local coordinates; :func:`map_prior_from_dict` reads it back."""

    def xy(p: Point2) -> list[float]:
        return [p.x, p.y]

    doc: dict[str, Any] = {
        "coordinates": "local",
        "origin": {"lat": prior.origin[0], "lon": prior.origin[1]},
        "centerlines": {k: [xy(p) for p in cl.points] for k, cl in prior.centerlines.items()},
        "statics": [
            {
                "kind": st.kind.value,
                "geometry": {"type": st.geometry.value, "coords": [xy(p) for p in st.points]},
                "risk_value": st.risk_value,
                "weight": st.weight,
            }
            for st in prior.statics
        ],
        "maneuver_sets": {},
        "road_polygon": [xy(p) for p in prior.road_polygon],
    }
    for man, ns in prior.maneuver_sets.items():
        body: dict[str, Any] = {"rows": [[{"col": n.col, "x": n.position.x, "y": n.position.y} for n in row] for row in ns.rows]}
        if ns.dest is not None:
            body["dest"] = xy(ns.dest)
        doc["maneuver_sets"][man.value] = body
    if prior.sampling:
        doc["sampling"] = {
            "centerline": prior.sampling.centerline,
            "half_width": prior.sampling.half_width,
            "resolution": prior.sampling.resolution,
        }
    if prior.units:
        doc["units"] = {k: xy(p) for k, p in prior.units.items()}
    return doc


# -- frames ----------------------------------------------------------------------


def frame_from_dict(
    doc: Mapping[str, Any],
    degrees: bool = False,
    origin: tuple[float, float] | None = None,
) -> Frame:
    """Build a :class:`Frame` from one decoded line (``t`` or ``timestamp`` key)."""
    if not isinstance(doc, Mapping):
        raise ValidationError("frame must be a JSON object")
    t = doc.get("t", doc.get("timestamp"))
    if t is None:
        raise ValidationError("frame: missing 't'")
    t = _num(t, "t")
    dyns = doc.get("dynamics", [])
    if not isinstance(dyns, list):
        raise ValidationError("dynamics: expected a list")
    read = _PointReader(False, origin) if origin else None
    objs = []
    for i, d in enumerate(dyns):
        path = f"dynamics[{i}]"
        if not isinstance(d, Mapping):
            raise ValidationError(f"{path}: expected an object")
        if "id" not in d:
            raise ValidationError(f"{path}.id: missing")
        cat = _enum(ParticipantCategory, d.get("category"), path + ".category")
        if "lat" in d and "lon" in d:
            if read is None:
                raise ValidationError(f"{path}: geodetic position needs a map origin")
            pos = read(d, path)
        else:
            pos = Point2(_num(d.get("x"), path + ".x"), _num(d.get("y"), path + ".y"))
        speed = _num(d.get("speed"), path + ".speed")
        heading = _num(d.get("heading", 0.0), path + ".heading")
        if degrees:
            heading = math.radians(heading)
        try:
            objs.append(DynamicObject(str(d["id"]), cat, pos, speed, heading))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc.detail}") from None
    icv = None
    if isinstance(doc.get("icv"), Mapping):
        ic = doc["icv"]
        man = _enum(Maneuver, ic["maneuver"], "icv.maneuver") if "maneuver" in ic else None
        icv = IcvState(str(ic.get("id", "icv")), Point2(_num(ic.get("x"), "icv.x"), _num(ic.get("y"), "icv.y")), man)
    unit = doc.get("unit")
    return Frame(t, tuple(objs), None if unit is None else str(unit), icv)


def frame_to_dict(frame: Frame) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "t": frame.timestamp,
        "dynamics": [
            {
                "id": o.id,
                "category": o.category.value,
                "x": o.position.x,
                "y": o.position.y,
                "speed": o.speed,
                "heading": o.heading,
            }
            for o in frame.dynamics
        ],
    }
    if frame.unit is not None:
        doc["unit"] = frame.unit
    if frame.icv is not None:
        ic = {"id": frame.icv.id, "x": frame.icv.position.x, "y": frame.icv.position.y}
        if frame.icv.maneuver is not None:
            ic["maneuver"] = frame.icv.maneuver.value
        doc["icv"] = ic
    return doc


def load_frames(path: str | Path, origin: tuple[float, float] | None = None) -> list[Frame]:
    """Read a frame stream. An optional first line without ``t`` is a header;
    ``{"heading_units": "deg"}`` switches headings to degrees."""
    path = Path(path)
    frames: list[Frame] = []
    degrees = False
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON: {exc.msg}", source=str(path), line=lineno) from None
            if not frames and isinstance(doc, Mapping) and "t" not in doc and "timestamp" not in doc:
                units = doc.get("heading_units", "rad")
                if units not in ("rad", "deg"):
                    raise ValidationError(f"heading_units: expected 'rad' or 'deg'", source=str(path), line=lineno)
                degrees = units == "deg"
                continue
            try:
                frame = frame_from_dict(doc, degrees, origin)
            except ValidationError as exc:
                raise ValidationError(exc.detail, source=str(path), line=lineno) from None
            if frames and frame.timestamp <= frames[-1].timestamp:
                raise ValidationError(
                    f"timestamps must increase: {frame.timestamp} after {frames[-1].timestamp}",
                    source=str(path),
                    line=lineno,
                )
            frames.append(frame)
    return frames
