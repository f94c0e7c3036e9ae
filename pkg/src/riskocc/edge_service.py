"""Edge-cloud emulation: roadside frames in, plans and risk windows out.

State is an immutable :class:`ServiceState` snapshot. Frame ingestion is
serialised behind a lock and swaps in a new snapshot; plan requests read
whichever snapshot is current when they start and never see a partial
update.

Wire protocol (one JSON object per line)::

    -> {"type": "frame", "t": 12.0, "unit": "rsu-1", "dynamics": [...]}
    -> {"type": "plan_request", "icv_id": "ego", "x": 1.0, "y": 2.0, "maneuver": "left"}
    <- {"type": "plan_response", "icv_id": "ego", "grid_t": 12.0, "path": {...}, "risk_window": [...]}
    <- {"type": "error", "code": "NO_GRID", "detail": "..."}

A frame that is accepted produces no reply.
"""

from __future__ import annotations

import json
import logging
import math
import socketserver
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Any, Mapping

from .geometry import Point2, dist_point_point, geodetic_to_local
from .occupancy import RiskGrid, SamplePoint, compute_map, samples_for_prior
from .planner import PlannedPath, PlannerConfig, PlanningError, collision_free, plan
from .risk_model import RiskConfig
from .scenario import Frame, Maneuver, MapPrior, ScenarioError, frame_from_dict

log = logging.getLogger(__name__)

STALE_FRAME = "STALE_FRAME"
NO_GRID = "NO_GRID"
UNKNOWN_MANEUVER = "UNKNOWN_MANEUVER"
START_UNREACHABLE = "START_UNREACHABLE"
BAD_MESSAGE = "BAD_MESSAGE"

JSON_OPTS = {"separators": (",", ":"), "allow_nan": False}


class ServiceError(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail

    def to_message(self) -> dict[str, Any]:
        return {"type": "error", "code": self.code, "detail": self.detail}


@dataclass(frozen=True)
class ServiceConfig:
    window_radius: float = 30.0
    workers: int = 1


@dataclass(frozen=True)
class ServiceState:
    map_prior: MapPrior
    samples: tuple[SamplePoint, ...]
    risk_cfg: RiskConfig = field(default_factory=RiskConfig)
    planner_cfg: PlannerConfig = field(default_factory=PlannerConfig)
    service_cfg: ServiceConfig = field(default_factory=ServiceConfig)
    latest_frame: Frame | None = None
    latest_grid: RiskGrid | None = None
    # units already merged into latest_frame
    units_seen: frozenset = frozenset()
    # object id -> distance to the unit that reported it
    report_range: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.latest_grid is not None and self.latest_frame is not None:
            assert self.latest_grid.timestamp == self.latest_frame.timestamp


@dataclass(frozen=True)
class PlanRequest:
    icv_id: str
    position: Point2
    maneuver: str
    dest: Point2 | None = None


@dataclass(frozen=True)
class PlanResponse:
    icv_id: str
    path: PlannedPath
    risk_window: tuple[tuple[SamplePoint, float], ...]
    grid_timestamp: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "plan_response",
            "icv_id": self.icv_id,
            "grid_t": self.grid_timestamp,
            "path": self.path.to_dict(),
            "risk_window": [
                {"row": s.row, "col": s.col, "x": s.position.x, "y": s.position.y, "risk": r}
                for s, r in self.risk_window
            ],
        }


def initial_state(
    prior: MapPrior,
    risk_cfg: RiskConfig | None = None,
    planner_cfg: PlannerConfig | None = None,
    service_cfg: ServiceConfig | None = None,
) -> ServiceState:
    return ServiceState(
        prior,
        tuple(samples_for_prior(prior)),
        risk_cfg or RiskConfig(),
        planner_cfg or PlannerConfig(),
        service_cfg or ServiceConfig(),
    )


def _unit_range(state: ServiceState, unit: str | None, p: Point2) -> float:
    if unit is None or unit not in state.map_prior.units:
        return math.inf
    return dist_point_point(state.map_prior.units[unit], p)


def ingest_frame(state: ServiceState, frame: Frame) -> ServiceState:
    """Return the state after ``frame``.

    A frame at the current timestamp from a unit not yet merged is fused
    into the current frame: objects are unioned by id, and an id reported
    by several units keeps the report from the nearest unit (first report
    on ties or unknown unit positions).
    """
    latest = state.latest_frame
    if latest is not None and frame.timestamp <= latest.timestamp:
        same_t = frame.timestamp == latest.timestamp
        if not (same_t and frame.unit is not None and frame.unit not in state.units_seen):
            raise ServiceError(STALE_FRAME, f"frame t={frame.timestamp} is not newer than t={latest.timestamp}")
        merged = {o.id: o for o in latest.dynamics}
        ranges = dict(state.report_range)
        for o in frame.dynamics:
            rng = _unit_range(state, frame.unit, o.position)
            if o.id not in merged or rng < ranges.get(o.id, math.inf):
                merged[o.id] = o
                ranges[o.id] = rng
        new_frame = Frame(frame.timestamp, tuple(merged.values()), None, latest.icv or frame.icv)
        units = state.units_seen | {frame.unit}
    else:
        new_frame = frame
        ranges = {o.id: _unit_range(state, frame.unit, o.position) for o in frame.dynamics}
        units = frozenset() if frame.unit is None else frozenset({frame.unit})
    res = state.map_prior.sampling.resolution if state.map_prior.sampling else 1.9
    grid = compute_map(
        state.samples,
        new_frame,
        state.map_prior.statics,
        state.risk_cfg,
        resolution=res,
        workers=state.service_cfg.workers,
    )
    return replace(state, latest_frame=new_frame, latest_grid=grid, units_seen=units, report_range=ranges)


def handle_plan_request(state: ServiceState, req: PlanRequest) -> PlanResponse:
    grid = state.latest_grid
    if grid is None:
        raise ServiceError(NO_GRID, "no frame has been ingested yet")
    try:
        maneuver = Maneuver(req.maneuver)
    except ValueError:
        raise ServiceError(UNKNOWN_MANEUVER, f"unknown maneuver {req.maneuver!r}") from None
    nodes = state.map_prior.maneuver_sets.get(maneuver)
    if nodes is None:
        raise ServiceError(UNKNOWN_MANEUVER, f"map prior has no {maneuver.value!r} node set")
    cfg = state.planner_cfg
    try:
        free = collision_free(nodes, grid, cfg.risk_threshold)
        path = plan(free, req.position, req.dest, maneuver, cfg)
    except PlanningError as exc:
        raise ServiceError(exc.code, f"request from {req.icv_id!r}: {exc}") from None
    idx = grid.window(req.position, state.service_cfg.window_radius)
    window = tuple((grid.samples[i], float(grid.risks[i])) for i in idx)
    return PlanResponse(req.icv_id, path, window, grid.timestamp)


def request_from_dict(doc: Mapping[str, Any], origin: tuple[float, float]) -> PlanRequest:
    if "icv_id" not in doc or "maneuver" not in doc:
        raise ServiceError(BAD_MESSAGE, "plan_request needs icv_id and maneuver")
    try:
        if "lat" in doc and "lon" in doc:
            pos = geodetic_to_local(float(doc["lat"]), float(doc["lon"]), origin)
        else:
            pos = Point2(float(doc["x"]), float(doc["y"]))
        dest = None
        if doc.get("dest") is not None:
            dx, dy = doc["dest"]
            dest = Point2(float(dx), float(dy))
    except (KeyError, TypeError, ValueError) as exc:
        raise ServiceError(BAD_MESSAGE, f"bad plan_request position: {exc}") from None
    if not all(math.isfinite(v) for v in pos):
        raise ServiceError(BAD_MESSAGE, "plan_request position must be finite")
    return PlanRequest(str(doc["icv_id"]), pos, str(doc["maneuver"]), dest)


class EdgeService:
    """Single-writer, many-reader holder of the current :class:`ServiceState`."""

    def __init__(self, state: ServiceState):
        self._state = state
        self._write_lock = threading.Lock()
        self._log_lock = threading.Lock()
        self.session_log: list[dict[str, Any]] = []

    @property
    def state(self) -> ServiceState:
        return self._state

    def ingest(self, frame: Frame) -> ServiceState:
        with self._write_lock:
            try:
                new = ingest_frame(self._state, frame)
            except ServiceError as exc:
                log.warning("rejected frame t=%s: %s", frame.timestamp, exc.detail)
                raise
            self._state = new
            return new

    def plan(self, req: PlanRequest) -> PlanResponse:
        return handle_plan_request(self._state, req)

    def _record(self, entry: dict[str, Any]) -> None:
        with self._log_lock:
            entry["seq"] = len(self.session_log)
            self.session_log.append(entry)

    def handle_message(self, doc: Any) -> dict[str, Any] | None:
        try:
            if not isinstance(doc, Mapping):
                raise ServiceError(BAD_MESSAGE, "message must be a JSON object")
            kind = doc.get("type")
            if kind == "frame":
                try:
                    frame = frame_from_dict(doc, origin=self._state.map_prior.origin)
                except ScenarioError as exc:
                    raise ServiceError(BAD_MESSAGE, exc.detail) from None
                self.ingest(frame)
                self._record({"type": "frame", "t": frame.timestamp, "unit": frame.unit, "result": "ok"})
                return None
            if kind == "plan_request":
                req = request_from_dict(doc, self._state.map_prior.origin)
                resp = self.plan(req)
                self._record(
                    {"type": "plan_request", "icv_id": req.icv_id, "grid_t": resp.grid_timestamp, "result": resp.path.status}
                )
                return resp.to_dict()
            raise ServiceError(BAD_MESSAGE, f"unknown message type {kind!r}")
        except ServiceError as exc:
            self._record({"type": str(doc.get("type")) if isinstance(doc, Mapping) else None, "result": exc.code})
            return exc.to_message()

    def handle_line(self, line: str) -> str | None:
        if not line.strip():
            return None
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            out = ServiceError(BAD_MESSAGE, f"malformed JSON: {exc.msg}").to_message()
            self._record({"type": None, "result": BAD_MESSAGE})
        else:
            out = self.handle_message(doc)
        return None if out is None else json.dumps(out, **JSON_OPTS)

    def serve_pipe(self, stdin: IO[str], stdout: IO[str]) -> None:
        for line in stdin:
            reply = self.handle_line(line)
            if reply is not None:
                stdout.write(reply + "\n")
                stdout.flush()

    def write_session_log(self, path: str | Path) -> None:
        with self._log_lock:
            lines = [json.dumps(e, **JSON_OPTS) for e in self.session_log]
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        service: EdgeService = self.server.service  # type: ignore[attr-defined]
        for raw in self.rfile:
            reply = service.handle_line(raw.decode("utf-8", errors="replace"))
            if reply is not None:
                self.wfile.write((reply + "\n").encode("utf-8"))
                self.wfile.flush()


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def make_tcp_server(service: EdgeService, host: str, port: int) -> socketserver.ThreadingTCPServer:
    server = _Server((host, port), _LineHandler)
    server.service = service  # type: ignore[attr-defined]
    return server
