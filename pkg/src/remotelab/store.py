"""Append-only event log, snapshots, and the single-writer store.

Log format: one record per line, tab-separated
    seq \t ts \t kind \t canonical-json-payload
Payload JSON is emitted with sorted keys and no whitespace so the same
inputs always produce the same bytes.

Snapshot format: two lines —
    header: {"checksum": sha256-of-body, "format_version": 1, "last_seq": n}
    body:   canonical JSON of the full system state
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict
from pathlib import Path

from . import errors as err
from .model import (
    CostLedgerEntry,
    Credential,
    DeployBundle,
    Event,
    FieldLayout,
    Node,
    NodeState,
    OverlayPeer,
    PeerKind,
    PeerStatus,
    ReprovisionJob,
    Reservation,
    ReservationState,
    Robot,
    RobotLocation,
    RobotState,
    Student,
    Tier,
    TimeSlot,
    Workspace,
    WorkspaceDemand,
    WorkspaceState,
)
from .state import SystemState, apply_event

FORMAT_VERSION = 1


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def encode_event(ev: Event) -> str:
    return f"{ev.seq}\t{ev.ts}\t{ev.kind}\t{_canon(ev.payload)}\n"


def decode_event(line: str) -> Event:
    try:
        seq_s, ts_s, kind, payload_s = line.rstrip("\n").split("\t", 3)
        return Event(seq=int(seq_s), ts=int(ts_s), kind=kind,
                     payload=json.loads(payload_s))
    except (ValueError, json.JSONDecodeError) as exc:
        raise err.CorruptRecord(f"bad log line: {line!r}") from exc


# --- state <-> plain dicts ------------------------------------------------

def state_to_dict(state: SystemState) -> dict:
    def robot(r: Robot) -> dict:
        d = asdict(r)
        d["capabilities"] = sorted(r.capabilities)
        d["location"] = r.location.value
        d["state"] = r.state.value
        d["pose"] = list(r.pose)
        return d

    def reservation(r: Reservation) -> dict:
        d = asdict(r)
        d["robot_ids"] = list(r.robot_ids)
        d["state"] = r.state.value
        return d

    def workspace(w: Workspace) -> dict:
        d = asdict(w)
        d["state"] = w.state.value
        return d

    def peer(p: OverlayPeer) -> dict:
        d = asdict(p)
        d["kind"] = p.kind.value
        d["status"] = p.status.value
        return d

    def node(n: Node) -> dict:
        d = asdict(n)
        d["state"] = n.state.value
        return d

    def student(s: Student) -> dict:
        d = asdict(s)
        d["max_tier"] = int(s.max_tier)
        return d

    def layout(f: FieldLayout) -> dict:
        d = asdict(f)
        d["rows"] = list(f.rows)
        return d

    return {
        "last_seq": state.last_seq,
        "students": {k: student(v) for k, v in state.students.items()},
        "credentials": {k: asdict(v) for k, v in state.credentials.items()},
        "robots": {k: robot(v) for k, v in state.robots.items()},
        "field_layouts": {k: layout(v) for k, v in state.field_layouts.items()},
        "reservations": {k: reservation(v) for k, v in state.reservations.items()},
        "nodes": {k: node(v) for k, v in state.nodes.items()},
        "workspaces": {k: workspace(v) for k, v in state.workspaces.items()},
        "peers": {k: peer(v) for k, v in state.peers.items()},
        "jobs": {k: asdict(v) for k, v in state.jobs.items()},
        "ledger": [asdict(e) for e in state.ledger],
        "deploys": {k: asdict(v) for k, v in state.deploys.items()},
        "enroll_tokens": dict(state.enroll_tokens),
    }


def state_from_dict(d: dict) -> SystemState:
    return SystemState(
        last_seq=d["last_seq"],
        students={k: Student(id=v["id"], display_name=v["display_name"],
                             max_tier=Tier(v["max_tier"]),
                             weekly_quota_min=v["weekly_quota_min"],
                             credential_hash=v["credential_hash"])
                  for k, v in d["students"].items()},
        credentials={k: Credential(**v) for k, v in d["credentials"].items()},
        robots={k: Robot(
            id=v["id"], model=v["model"],
            capabilities=frozenset(v["capabilities"]),
            location=RobotLocation(v["location"]),
            state=RobotState(v["state"]),
            firmware_version=v["firmware_version"],
            firmware_size_mb=v["firmware_size_mb"],
            battery_pct=v["battery_pct"], pose=tuple(v["pose"]),
            wheel_bias=v["wheel_bias"], unit_cost_cents=v["unit_cost_cents"],
            last_flash_seq=v["last_flash_seq"],
            flash_failure_pending=v["flash_failure_pending"],
        ) for k, v in d["robots"].items()},
        field_layouts={k: FieldLayout(id=v["id"], name=v["name"],
                                      rows=tuple(v["rows"]),
                                      cell_size_m=v["cell_size_m"])
                       for k, v in d["field_layouts"].items()},
        reservations={k: Reservation(
            id=v["id"], student_id=v["student_id"],
            robot_ids=tuple(v["robot_ids"]),
            slot=TimeSlot(**v["slot"]),
            field_layout_id=v["field_layout_id"],
            state=ReservationState(v["state"]),
            created_seq=v["created_seq"],
            activation_seq=v["activation_seq"],
            workspace_id=v["workspace_id"],
        ) for k, v in d["reservations"].items()},
        nodes={k: Node(
            id=v["id"], cpu_cores=v["cpu_cores"], ram_mb=v["ram_mb"],
            has_gpu=v["has_gpu"], hourly_rate_cents=v["hourly_rate_cents"],
            state=NodeState(v["state"]), provisioned_at=v["provisioned_at"],
            state_since=v["state_since"], idle_since=v["idle_since"],
        ) for k, v in d["nodes"].items()},
        workspaces={k: Workspace(
            id=v["id"], student_id=v["student_id"],
            state=WorkspaceState(v["state"]), node_id=v["node_id"],
            image_version=v["image_version"], overlay_addr=v["overlay_addr"],
            demand=WorkspaceDemand(**v["demand"]),
            state_since=v["state_since"],
        ) for k, v in d["workspaces"].items()},
        peers={k: OverlayPeer(
            peer_id=v["peer_id"], kind=PeerKind(v["kind"]), addr=v["addr"],
            enrolled_at=v["enrolled_at"], last_heartbeat=v["last_heartbeat"],
            status=PeerStatus(v["status"]),
        ) for k, v in d["peers"].items()},
        jobs={k: ReprovisionJob(**v) for k, v in d["jobs"].items()},
        ledger=tuple(CostLedgerEntry(**e) for e in d["ledger"]),
        deploys={k: DeployBundle(**v) for k, v in d["deploys"].items()},
        enroll_tokens=dict(d["enroll_tokens"]),
    )


def snapshot_write(state: SystemState, path: Path) -> str:
    """Write a checksummed snapshot; returns the body checksum."""
    body = _canon(state_to_dict(state))
    checksum = hashlib.sha256(body.encode()).hexdigest()
    header = _canon({"checksum": checksum, "format_version": FORMAT_VERSION,
                     "last_seq": state.last_seq})
    try:
        Path(path).write_text(header + "\n" + body + "\n")
    except OSError as exc:
        raise err.IoFailure(str(exc)) from exc
    return checksum


def snapshot_load(path: Path) -> SystemState:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise err.IoFailure(str(exc)) from exc
    lines = text.split("\n")
    if len(lines) < 2:
        raise err.ChecksumMismatch("snapshot truncated")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise err.CorruptRecord("snapshot header unreadable") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise err.CorruptRecord(
            f"unsupported snapshot format {header.get('format_version')}")
    body = lines[1]
    if hashlib.sha256(body.encode()).hexdigest() != header.get("checksum"):
        raise err.ChecksumMismatch("snapshot body does not match checksum")
    return state_from_dict(json.loads(body))


class EventStore:
    """Single-writer store: appends are serialized, readers get immutable
    state snapshots. With a directory it persists the log (and periodic
    snapshots); without one it is purely in memory."""

    def __init__(self, directory: str | Path | None = None,
                 snapshot_every: int = 1000,
                 max_events: int | None = None):
        self._lock = threading.Lock()
        self.snapshot_every = snapshot_every
        self.max_events = max_events
        self.directory = Path(directory) if directory is not None else None
        self._events: list[Event] = []
        self._state = SystemState()
        self._fh = None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            self._recover()
            self._fh = open(self.log_path, "a", encoding="utf-8")

    @property
    def log_path(self) -> Path:
        assert self.directory is not None
        return self.directory / "events.log"

    @property
    def snapshot_path(self) -> Path:
        assert self.directory is not None
        return self.directory / "snapshot.dat"

    def _recover(self) -> None:
        state = SystemState()
        if self.snapshot_path.exists():
            try:
                state = snapshot_load(self.snapshot_path)
            except (err.ChecksumMismatch, err.CorruptRecord):
                state = SystemState()  # fall back to full replay
        events: list[Event] = []
        if self.log_path.exists():
            with open(self.log_path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.endswith("\n"):
                        break  # torn tail write; ignore the partial record
                    events.append(decode_event(line))
        for ev in events:
            if ev.seq > state.last_seq:
                state = apply_event(state, ev)
        self._events = events
        self._state = state

    @property
    def state(self) -> SystemState:
        return self._state

    @property
    def last_seq(self) -> int:
        return self._state.last_seq

    @property
    def next_seq(self) -> int:
        return self._state.last_seq + 1

    def events(self) -> list[Event]:
        return list(self._events)

    def append(self, kind: str, payload: dict, now: int) -> Event:
        with self._lock:
            if self.max_events is not None and len(self._events) >= self.max_events:
                raise err.StorageFull(f"log capped at {self.max_events} events")
            ev = Event(seq=self._state.last_seq + 1, ts=now, kind=kind,
                       payload=payload)
            new_state = apply_event(self._state, ev)  # raises on rejection
            if self._fh is not None:
                try:
                    self._fh.write(encode_event(ev))
                    self._fh.flush()
                except OSError as exc:
                    raise err.IoFailure(str(exc)) from exc
            self._events.append(ev)
            self._state = new_state
            if (self.directory is not None
                    and ev.seq % self.snapshot_every == 0):
                snapshot_write(self._state, self.snapshot_path)
            return ev

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
