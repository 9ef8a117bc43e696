"""Wire API for the lab service.

Every module error maps to exactly one status code (see ERROR_STATUS);
bodies are JSON. Mutations require a bearer token — student credentials
for student operations, the admin token for /admin and inventory.
"""

from __future__ import annotations

import time
from dataclasses import asdict
from typing import Callable

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .. import errors as err
from ..model import (
    DriveCommand,
    PeerKind,
    Reservation,
    ReservationState,
    Telemetry,
    Tier,
    TimeSlot,
)
from ..service import Lab

ERROR_STATUS: dict[type, int] = {
    err.Unauthorized: 401,
    err.NotOwner: 403,
    err.TierDenied: 403,
    err.InvalidToken: 403,
    err.UnknownStudent: 404,
    err.UnknownRobot: 404,
    err.UnknownReservation: 404,
    err.UnknownWorkspace: 404,
    err.UnknownPeer: 404,
    err.UnknownCamera: 404,
    err.UnknownSession: 404,
    err.UnknownField: 404,
    err.UnknownNode: 404,
    err.Conflict: 409,
    err.NotCancellable: 409,
    err.AlreadyProvisioned: 409,
    err.AlreadyReleased: 409,
    err.Busy: 409,
    err.SessionNotActive: 409,
    err.NoWorkspace: 409,
    err.RobotFault: 409,
    err.NotReserved: 409,
    err.PeerEvicted: 410,
    err.SessionEnded: 410,
    err.TooLarge: 413,
    err.PastSlot: 422,
    err.BadSlot: 422,
    err.BadChecksum: 422,
    err.BadCommand: 422,
    err.BadRange: 422,
    err.QuotaExceeded: 429,
    err.QueueFull: 429,
    err.NoCapacity: 503,
    err.PoolExhausted: 503,
    err.StorageFull: 507,
}


def _status_for(exc: err.LabError) -> int:
    for cls in type(exc).__mro__:
        if cls in ERROR_STATUS:
            return ERROR_STATUS[cls]
    return 422 if isinstance(exc, err.ValidationRejected) else 500


def _error_body(exc: err.LabError) -> dict:
    body = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, err.Conflict):
        body["robot_id"] = exc.robot_id
    if isinstance(exc, err.QuotaExceeded):
        body["remaining_min"] = exc.remaining_min
    return body


def reservation_dict(res: Reservation) -> dict:
    return {
        "id": res.id,
        "student_id": res.student_id,
        "robot_ids": list(res.robot_ids),
        "start": res.slot.start,
        "duration_min": res.slot.duration_min,
        "end": res.slot.end,
        "field_layout_id": res.field_layout_id,
        "state": res.state.value,
        "workspace_id": res.workspace_id,
    }


def telemetry_line(t: Telemetry) -> str:
    return (f'{{"robot_id":"{t.robot_id}","tick":{t.tick},'
            f'"x":{t.x:.3f},"y":{t.y:.3f},"theta":{t.theta:.3f},'
            f'"battery":{t.battery_pct:.3f},"state":"{t.state}"}}')


def create_app(lab: Lab, clock: Callable[[], int] | None = None) -> FastAPI:
    app = FastAPI(title="remotelab gateway")
    now = clock or (lambda: int(time.time()))
    admin_token = lab.config.auth.admin_token

    @app.exception_handler(err.LabError)
    async def _lab_error(request: Request, exc: err.LabError):
        return JSONResponse(status_code=_status_for(exc),
                            content=_error_body(exc))

    def bearer(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise err.Unauthorized("missing bearer token")
        return authorization.removeprefix("Bearer ")

    def student_auth(token: str = Depends(bearer)) -> str:
        return lab.authenticate(token)

    def admin_auth(token: str = Depends(bearer)) -> str:
        if token != admin_token:
            raise err.Unauthorized("admin token required")
        return "admin"

    def actor_auth(token: str = Depends(bearer)) -> str:
        """Admin token or a student credential; used where both may act."""
        if token == admin_token:
            return "admin"
        return lab.authenticate(token)

    # --- reservations ----------------------------------------------------

    @app.post("/api/v1/reservations", status_code=201)
    def create_reservation(body: dict, student: str = Depends(student_auth)):
        res = lab.reserve(student, body["robot_ids"], int(body["start"]),
                          int(body["duration_min"]), body["field_layout_id"],
                          now())
        return reservation_dict(res)

    @app.delete("/api/v1/reservations/{reservation_id}")
    def delete_reservation(reservation_id: str,
                           actor: str = Depends(actor_auth)):
        res = lab.cancel(reservation_id, actor, now())
        return reservation_dict(res)

    @app.get("/api/v1/robots")
    def list_robots(capability: str = "", start: int | None = None,
                    duration: int = 60, _: str = Depends(actor_auth)):
        caps = frozenset(c for c in capability.split(",") if c)
        window = TimeSlot(start=start if start is not None else now(),
                          duration_min=duration)
        available = set(lab.available_robots(window, caps))
        robots = []
        for rid in sorted(lab.store.state.robots):
            r = lab.store.state.robots[rid]
            robots.append({
                "id": r.id, "model": r.model,
                "capabilities": sorted(r.capabilities),
                "location": r.location.value, "state": r.state.value,
                "battery_pct": r.battery_pct,
                "firmware_version": r.firmware_version,
                "available": rid in available,
            })
        return {"window": {"start": window.start,
                           "duration_min": window.duration_min},
                "robots": robots}

    @app.get("/api/v1/reservations")
    def my_reservations(student: str = Depends(actor_auth)):
        out = [reservation_dict(r)
               for r in lab.store.state.reservations.values()
               if student == "admin" or r.student_id == student]
        out.sort(key=lambda r: (r["start"], r["id"]))
        return {"reservations": out}

    # --- sessions --------------------------------------------------------

    def _session_for(session_id: str, actor: str) -> Reservation:
        res = lab.session(session_id)
        if actor != "admin" and res.student_id != actor:
            raise err.NotOwner(f"{actor} does not own session {session_id}")
        return res

    @app.get("/api/v1/sessions/{session_id}")
    def get_session(session_id: str, actor: str = Depends(actor_auth)):
        res = _session_for(session_id, actor)
        deploys = [asdict(d) for d in lab.store.state.deploys.values()
                   if d.session_id == res.id]
        deploys.sort(key=lambda d: d["id"])
        layout = lab.store.state.field_layouts.get(res.field_layout_id)
        return {"reservation": reservation_dict(res),
                "deploys": deploys,
                "field": {"id": layout.id, "rows": list(layout.rows),
                          "cell_size_m": layout.cell_size_m}
                if layout else None,
                "robots": {rid: {"state": lab.store.state.robots[rid].state.value}
                           for rid in res.robot_ids}}

    @app.get("/api/v1/sessions/{session_id}/telemetry")
    def session_telemetry(session_id: str, from_tick: int = 0,
                          follow: bool = False,
                          actor: str = Depends(actor_auth)):
        res = _session_for(session_id, actor)
        if res.state in (ReservationState.CANCELLED, ReservationState.NO_SHOW):
            raise err.SessionEnded(session_id)

        def stream():
            last = {rid: from_tick - 1 for rid in res.robot_ids}
            while True:
                for rid in sorted(res.robot_ids):
                    for t in lab.telemetry.get(rid, []):
                        if t.tick > last[rid]:
                            last[rid] = t.tick
                            yield telemetry_line(t) + "\n"
                current = lab.session(session_id)
                if current.state != ReservationState.ACTIVE:
                    yield '{"event":"SessionEnded"}\n'
                    return
                if not follow:
                    return
                time.sleep(0.05)

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.post("/api/v1/sessions/{session_id}/deploy", status_code=201)
    def deploy(session_id: str, body: dict,
               actor: str = Depends(student_auth)):
        res = _session_for(session_id, actor)
        import base64
        payload = base64.b64decode(body["payload_b64"])
        deploy_id = lab.deploy(res.id, body["name"], payload,
                               body["checksum"], now())
        return {"deploy_id": deploy_id}

    @app.post("/api/v1/sessions/{session_id}/commands", status_code=201)
    def send_command(session_id: str, body: dict,
                     actor: str = Depends(student_auth)):
        res = _session_for(session_id, actor)
        cmd = DriveCommand(v=float(body["v"]), omega=float(body["omega"]),
                           duration_ticks=int(body["duration_ticks"]))
        lab.dispatch(body["robot_id"], cmd, actor, now())
        return {"accepted": True}

    # --- cameras ---------------------------------------------------------

    @app.get("/api/v1/cameras/{camera_id}/frames")
    def camera_frames(camera_id: str, _: str = Depends(actor_auth)):
        frames = lab.camera_frames(camera_id)
        cam = lab.cameras[camera_id]
        return {"camera_id": camera_id, "fov": list(cam.fov),
                "frames": [asdict(f) for f in frames]}

    # --- overlay ---------------------------------------------------------

    @app.post("/api/v1/peers", status_code=201)
    def register_peer(body: dict):
        peer = lab.register_peer(PeerKind(body["kind"]),
                                 body["enrollment_token"], now())
        return {"peer_id": peer.peer_id, "addr": peer.addr,
                "status": peer.status.value}

    @app.post("/api/v1/peers/{addr}/heartbeat")
    def peer_heartbeat(addr: str):
        for peer in lab.store.state.peers.values():
            if peer.addr == addr and peer.status.value != "Evicted":
                status = lab.heartbeat(peer.peer_id, now())
                return {"peer_id": peer.peer_id, "status": status.value}
        raise err.UnknownPeer(addr)

    @app.get("/api/v1/peers", response_class=PlainTextResponse)
    def route_table(_: str = Depends(admin_auth)):
        from .. import overlay
        return overlay.route_table_text(lab.store.state)

    # --- admin -----------------------------------------------------------

    @app.post("/api/v1/admin/students", status_code=201)
    def add_student(body: dict, _: str = Depends(admin_auth)):
        sid, token = lab.add_student(
            body["name"], now(), max_tier=Tier(body.get("tier", 3)),
            weekly_quota_min=body.get("quota"),
            student_id=body.get("id", ""))
        return {"student_id": sid, "token": token}

    @app.post("/api/v1/admin/robots", status_code=201)
    def add_robot(body: dict, _: str = Depends(admin_auth)):
        robot = lab.add_robot(
            body["model"], body.get("capabilities", ["diff_drive"]), now(),
            robot_id=body.get("id", ""),
            firmware_size_mb=body.get("firmware_mb", 4000),
            wheel_bias=body.get("wheel_bias", 0.0))
        return {"robot_id": robot.id}

    @app.post("/api/v1/admin/nodes", status_code=201)
    def add_node(body: dict, _: str = Depends(admin_auth)):
        node_id = lab.add_node(body["cpu_cores"], body["ram_mb"],
                               body.get("has_gpu", False),
                               body.get("hourly_rate_cents", 90), now(),
                               node_id=body.get("id", ""))
        return {"node_id": node_id}

    @app.post("/api/v1/admin/fields", status_code=201)
    def add_field(body: dict, _: str = Depends(admin_auth)):
        fid = lab.add_field(body.get("name", ""), body["rows"], now(),
                            field_id=body.get("id", ""))
        return {"field_id": fid}

    @app.post("/api/v1/admin/enroll-tokens", status_code=201)
    def enroll_token(_: str = Depends(admin_auth)):
        return {"enrollment_token": lab.issue_enroll_token(now())}

    @app.get("/api/v1/admin/cost")
    def cost(from_ts: int = Query(alias="from"), to: int = Query(),
             _: str = Depends(admin_auth)):
        total, breakdown = lab.cost_report(from_ts, to)
        return {"from": from_ts, "to": to, "total_cents": total,
                "per_node": dict(sorted(breakdown.items()))}

    return app
