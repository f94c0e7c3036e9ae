import io
import json
import socket
import threading

import pytest

from riskocc.edge_service import (
    EdgeService,
    PlanRequest,
    ServiceError,
    handle_plan_request,
    ingest_frame,
    initial_state,
    make_tcp_server,
)
from riskocc.geometry import Point2, local_to_geodetic
from riskocc.scenario import DynamicObject, Frame, ParticipantCategory as P, frame_to_dict


def obj(oid, x, y, speed=0.0):
    return DynamicObject(oid, P.SMALL_VEHICLE, Point2(x, y), speed, 0.0)


@pytest.fixture()
def state(prior):
    return initial_state(prior)


def frame_line(frame):
    doc = frame_to_dict(frame)
    doc["type"] = "frame"
    return json.dumps(doc)


def test_first_frame_populates_state(state, frames):
    s1 = ingest_frame(state, frames[0])
    assert state.latest_grid is None
    assert s1.latest_frame == frames[0]
    assert s1.latest_grid.timestamp == 0.0 and len(s1.latest_grid) == len(state.samples)


def test_union_of_units(state):
    a = Frame(1.0, (obj("a", 0, 0),), unit="rsu-1")
    b = Frame(1.0, (obj("b", 5, 5),), unit="rsu-2")
    s = ingest_frame(ingest_frame(state, a), b)
    assert {o.id for o in s.latest_frame.dynamics} == {"a", "b"}


def test_duplicate_id_keeps_nearest_unit(state, prior):
    u1, u2 = prior.units["rsu-1"], prior.units["rsu-2"]
    near1 = Point2(u1.x + 1, u1.y)
    near2 = Point2(u2.x + 1, u2.y)
    # each unit reports the object near itself; rsu-2's report is nearer for rsu-2
    s = ingest_frame(state, Frame(1.0, (obj("x", *near2),), unit="rsu-1"))
    s = ingest_frame(s, Frame(1.0, (obj("x", *near2),), unit="rsu-2"))
    assert s.report_range["x"] == pytest.approx(1.0)
    s = ingest_frame(state, Frame(1.0, (obj("x", *near1),), unit="rsu-1"))
    s = ingest_frame(s, Frame(1.0, (obj("x", *near2),), unit="rsu-2"))
    (o,) = s.latest_frame.dynamics
    assert o.position == near1


def test_stale_frame_rejected(state):
    s = ingest_frame(state, Frame(2.0, ()))
    with pytest.raises(ServiceError) as ei:
        ingest_frame(s, Frame(1.5, ()))
    assert ei.value.code == "STALE_FRAME"
    svc = EdgeService(s)
    with pytest.raises(ServiceError):
        svc.ingest(Frame(2.0, ()))
    assert svc.state is s


def test_request_before_frame(state):
    with pytest.raises(ServiceError) as ei:
        handle_plan_request(state, PlanRequest("ego", Point2(0, 0), "left"))
    assert ei.value.code == "NO_GRID"


def test_left_request_end_to_end(state, frames, prior):
    s = ingest_frame(state, frames[0])
    resp = handle_plan_request(s, PlanRequest("ego", frames[0].icv.position, "left"))
    assert resp.path.status == "reached"
    assert all(n.risk < s.planner_cfg.risk_threshold for n in resp.path.raw_nodes)
    p = frames[0].icv.position
    assert resp.risk_window
    assert all(((sp.position.x - p.x) ** 2 + (sp.position.y - p.y) ** 2) ** 0.5 <= 30.0 for sp, _ in resp.risk_window)
    with pytest.raises(ServiceError) as ei:
        handle_plan_request(s, PlanRequest("ego", p, "u-turn"))
    assert ei.value.code == "UNKNOWN_MANEUVER"
    with pytest.raises(ServiceError) as ei:
        handle_plan_request(s, PlanRequest("ego", Point2(500, 500), "left"))
    assert ei.value.code == "START_UNREACHABLE"


def test_pipe_protocol(state, frames, prior):
    svc = EdgeService(state)
    lat, lon = local_to_geodetic(frames[0].icv.position, prior.origin)
    lines = [
        json.dumps({"type": "plan_request", "icv_id": "ego", "x": 0, "y": 0, "maneuver": "left"}),
        "{not json",
        frame_line(frames[0]),
        json.dumps({"type": "plan_request", "icv_id": "ego", "lat": lat, "lon": lon, "maneuver": "left"}),
        json.dumps({"type": "hello"}),
    ]
    out = io.StringIO()
    svc.serve_pipe(io.StringIO("\n".join(lines) + "\n"), out)
    replies = [json.loads(x) for x in out.getvalue().splitlines()]
    assert [r.get("code", r["type"]) for r in replies] == ["NO_GRID", "BAD_MESSAGE", "plan_response", "BAD_MESSAGE"]
    assert replies[2]["path"]["status"] == "reached"
    assert [e["result"] for e in svc.session_log] == ["NO_GRID", "BAD_MESSAGE", "ok", "reached", "BAD_MESSAGE"]


def test_session_log_and_determinism(state, frames, tmp_path):
    def run():
        svc = EdgeService(state)
        out = [svc.handle_line(frame_line(f)) for f in frames]
        out.append(svc.handle_line(json.dumps({"type": "plan_request", "icv_id": "e", "x": frames[3].icv.position.x, "y": frames[3].icv.position.y, "maneuver": "straight"})))
        svc.write_session_log(tmp_path / "log.jsonl")
        return out, (tmp_path / "log.jsonl").read_bytes()

    a, b = run(), run()
    assert a == b
    assert a[0][:4] == [None] * 4
    assert len(a[1].splitlines()) == 5


def test_readers_see_whole_snapshots(state, frames):
    svc = EdgeService(ingest_frame(state, frames[0]))
    seen = []
    stop = threading.Event()

    def reader():
        while not stop.is_set():
            s = svc.state
            seen.append(s.latest_frame.timestamp == s.latest_grid.timestamp)

    t = threading.Thread(target=reader)
    t.start()
    for f in frames[1:]:
        svc.ingest(f)
    stop.set()
    t.join()
    assert seen and all(seen)


def test_tcp_server(state, frames):
    svc = EdgeService(state)
    server = make_tcp_server(svc, "127.0.0.1", 0)
    th = threading.Thread(target=server.serve_forever, daemon=True)
    th.start()
    try:
        with socket.create_connection(server.server_address, timeout=5) as c:
            f = c.makefile("rw")
            f.write(frame_line(frames[0]) + "\n")
            f.write(json.dumps({"type": "plan_request", "icv_id": "e", "x": frames[0].icv.position.x, "y": frames[0].icv.position.y, "maneuver": "right"}) + "\n")
            f.flush()
            reply = json.loads(f.readline())
        assert reply["type"] == "plan_response" and reply["path"]["status"] == "reached"
    finally:
        server.shutdown()
        server.server_close()
