"""Control-server wire protocol: length-prefixed text frames.

A frame is `<decimal byte length>:<payload>\n`. Payloads are single-line
text messages; numeric fields are fixed-point with 3 decimals so golden
transcripts are byte-stable.

Message kinds:
    HELLO <robot_id> <token>
    CMD <v> <omega> <duration_ticks>
    ACK <seq>
    REJ <seq> <reason>
    TEL <tick> <x> <y> <theta> <battery> <state>
    BYE
"""

from __future__ import annotations

from ..errors import BadCommand, CorruptRecord
from ..model import DriveCommand, Telemetry

KINDS = {"HELLO", "CMD", "ACK", "REJ", "TEL", "BYE"}


def fp3(x: float) -> str:
    return f"{x:.3f}"


def encode_frame(payload: str) -> bytes:
    data = payload.encode()
    return str(len(data)).encode() + b":" + data + b"\n"


def decode_frames(buffer: bytes) -> tuple[list[str], bytes]:
    """Extract complete frames; returns (payloads, unconsumed remainder)."""
    out: list[str] = []
    while True:
        sep = buffer.find(b":")
        if sep < 0:
            if len(buffer) > 12:
                raise CorruptRecord("frame header too long")
            return out, buffer
        try:
            length = int(buffer[:sep])
        except ValueError as exc:
            raise CorruptRecord(f"bad frame length {buffer[:sep]!r}") from exc
        end = sep + 1 + length
        if len(buffer) < end + 1:
            return out, buffer
        if buffer[end:end + 1] != b"\n":
            raise CorruptRecord("missing frame terminator")
        out.append(buffer[sep + 1:end].decode())
        buffer = buffer[end + 1:]


def hello(robot_id: str, token: str) -> str:
    return f"HELLO {robot_id} {token}"


def cmd(command: DriveCommand) -> str:
    return (f"CMD {fp3(command.v)} {fp3(command.omega)} "
            f"{command.duration_ticks}")


def ack(seq: int) -> str:
    return f"ACK {seq}"


def rej(seq: int, reason: str) -> str:
    return f"REJ {seq} {reason}"


def tel(t: Telemetry) -> str:
    return (f"TEL {t.tick} {fp3(t.x)} {fp3(t.y)} {fp3(t.theta)} "
            f"{fp3(t.battery_pct)} {t.state}")


BYE = "BYE"


def parse(payload: str) -> tuple:
    """Parse one message payload into (kind, *fields)."""
    parts = payload.split(" ")
    kind = parts[0]
    if kind not in KINDS:
        raise BadCommand(f"unknown message kind {kind!r}")
    try:
        if kind == "HELLO":
            _, robot_id, token = parts
            return ("HELLO", robot_id, token)
        if kind == "CMD":
            _, v, omega, ticks = parts
            return ("CMD", DriveCommand(v=float(v), omega=float(omega),
                                        duration_ticks=int(ticks)))
        if kind == "ACK":
            return ("ACK", int(parts[1]))
        if kind == "REJ":
            return ("REJ", int(parts[1]), " ".join(parts[2:]))
        if kind == "TEL":
            _, tick, x, y, theta, battery, rstate = parts
            return ("TEL", Telemetry(robot_id="", tick=int(tick), x=float(x),
                                     y=float(y), theta=float(theta),
                                     battery_pct=float(battery), state=rstate))
        return ("BYE",)
    except ValueError as exc:
        raise BadCommand(f"malformed {kind} message: {payload!r}") from exc
