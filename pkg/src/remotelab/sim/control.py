"""In-lab control server: the single mediator between student sessions
and robot agents. Students never address robots directly; every command
comes through here and is checked against the live reservation calendar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import errors as err
from ..model import (
    DriveCommand,
    ReservationState,
    RobotState,
    Telemetry,
)
from . import wire


@dataclass
class Connection:
    conn_id: str
    student_id: str = ""
    robot_id: str = ""
    in_buffer: bytes = b""
    out_buffer: bytes = b""
    msg_seq: int = 0
    closed: bool = False

    def take_output(self) -> bytes:
        out, self.out_buffer = self.out_buffer, b""
        return out


class ControlServer:
    """Transport-agnostic: callers feed raw bytes per connection and drain
    the reply buffer; a socket front-end is just a pump around this."""

    def __init__(self, lab):
        self.lab = lab
        self.connections: dict[str, Connection] = {}

    def connect(self, conn_id: str) -> Connection:
        conn = Connection(conn_id=conn_id)
        self.connections[conn_id] = conn
        return conn

    def dispatch(self, robot_id: str, command: DriveCommand,
                 student_id: str, now: int) -> None:
        """Accept a drive command iff the sender holds the Active
        reservation covering this robot right now."""
        cfg = self.lab.config.sim
        robot = self.lab.store.state.robots.get(robot_id)
        if robot is None:
            raise err.UnknownRobot(robot_id)
        if robot.state == RobotState.FAULT:
            raise err.RobotFault(robot_id)
        if abs(command.v) > cfg.v_max or abs(command.omega) > cfg.omega_max:
            raise err.BadCommand(
                f"bounds |v|<={cfg.v_max} |omega|<={cfg.omega_max}")
        if command.duration_ticks <= 0:
            raise err.BadCommand("duration_ticks must be positive")
        if not self._holds_reservation(student_id, robot_id, now):
            raise err.NotReserved(
                f"{student_id} holds no active session on {robot_id}")
        agent = self.lab.agents.get(robot_id)
        if agent is None:
            raise err.UnknownRobot(f"{robot_id} has no agent on the field")
        agent.enqueue(command)

    def _holds_reservation(self, student_id: str, robot_id: str,
                           now: int) -> bool:
        for res in self.lab.store.state.reservations.values():
            if (res.state == ReservationState.ACTIVE
                    and res.student_id == student_id
                    and robot_id in res.robot_ids
                    and res.slot.start <= now < res.slot.end):
                return True
        return False

    def feed(self, conn_id: str, data: bytes, now: int) -> bytes:
        """Process inbound bytes for a connection; returns reply bytes."""
        conn = self.connections[conn_id]
        conn.in_buffer += data
        payloads, conn.in_buffer = wire.decode_frames(conn.in_buffer)
        for payload in payloads:
            conn.msg_seq += 1
            self._handle(conn, payload, now)
        return conn.take_output()

    def _handle(self, conn: Connection, payload: str, now: int) -> None:
        seq = conn.msg_seq
        try:
            msg = wire.parse(payload)
        except err.BadCommand as exc:
            conn.out_buffer += wire.encode_frame(wire.rej(seq, "BadCommand"))
            return
        kind = msg[0]
        if kind == "HELLO":
            _, robot_id, token = msg
            try:
                conn.student_id = self.lab.authenticate(token)
            except err.Unauthorized:
                conn.out_buffer += wire.encode_frame(
                    wire.rej(seq, "Unauthorized"))
                conn.closed = True
                return
            conn.robot_id = robot_id
            conn.out_buffer += wire.encode_frame(wire.ack(seq))
        elif kind == "CMD":
            if not conn.student_id:
                conn.out_buffer += wire.encode_frame(
                    wire.rej(seq, "Unauthorized"))
                return
            try:
                self.dispatch(conn.robot_id, msg[1], conn.student_id, now)
                conn.out_buffer += wire.encode_frame(wire.ack(seq))
            except (err.NotReserved, err.QueueFull, err.RobotFault,
                    err.BadCommand, err.UnknownRobot) as exc:
                conn.out_buffer += wire.encode_frame(
                    wire.rej(seq, type(exc).__name__))
        elif kind == "BYE":
            conn.closed = True
        # ACK/REJ/TEL are server-to-client only; ignore if echoed back

    def broadcast(self, telemetry: Telemetry) -> None:
        frame = wire.encode_frame(wire.tel(telemetry))
        for conn in self.connections.values():
            if conn.robot_id == telemetry.robot_id and not conn.closed:
                conn.out_buffer += frame


@dataclass(frozen=True)
class Camera:
    camera_id: str
    field_layout_id: str
    fov: tuple[float, float, float, float]  # x0, y0, x1, y1

    def sees(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.fov
        return x0 <= x <= x1 and y0 <= y <= y1


@dataclass(frozen=True)
class CameraFrame:
    camera_id: str
    tick: int
    robot_id: str
    x: float
    y: float
    theta: float
