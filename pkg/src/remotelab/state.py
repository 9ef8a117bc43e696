"""Event-sourced system state.

`apply_event` is the single authority on what the system may do: it is a
pure function from (state, event) to a new state, and it rejects any
transition that is absent from the lifecycle graphs. Because every
mutation is serialized through one append path, invariants like
"no double-booking" hold by construction — the conflict check runs inside
the transition function, so a conflicting event is never admitted to the
log in the first place.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from . import errors as err
from .model import (
    CostLedgerEntry,
    Credential,
    DeployBundle,
    Event,
    FieldLayout,
    FaultKind,
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
    WS_LIVE,
    iso_week,
)

BOOKED_STATES = (ReservationState.CONFIRMED, ReservationState.ACTIVE)
QUOTA_STATES = (
    ReservationState.CONFIRMED,
    ReservationState.ACTIVE,
    ReservationState.COMPLETED,
    ReservationState.NO_SHOW,
)

_ROBOT_GRAPH = {
    RobotState.IDLE: {RobotState.RESERVED, RobotState.ACTIVE, RobotState.FAULT},
    RobotState.RESERVED: {RobotState.IDLE, RobotState.FAULT},
    RobotState.REPROVISIONING: {RobotState.IDLE, RobotState.FAULT},
    RobotState.ACTIVE: {RobotState.IDLE, RobotState.FAULT},
    RobotState.FAULT: set(),  # leaves Fault only through reprovision_started
}

_RESERVATION_GRAPH = {
    ReservationState.CONFIRMED: {
        ReservationState.ACTIVE,
        ReservationState.CANCELLED,
        ReservationState.NO_SHOW,
    },
    ReservationState.ACTIVE: {ReservationState.COMPLETED},
}

_NODE_GRAPH = {
    NodeState.PROVISIONING: {NodeState.READY},
    NodeState.READY: {NodeState.DRAINING},
    NodeState.DRAINING: {NodeState.RELEASED},
}

_WORKSPACE_GRAPH = {
    WorkspaceState.REQUESTED: {WorkspaceState.PLACING, WorkspaceState.FAULT},
    WorkspaceState.PLACING: {WorkspaceState.PULLING, WorkspaceState.FAULT},
    WorkspaceState.PULLING: {WorkspaceState.STARTING, WorkspaceState.FAULT},
    WorkspaceState.STARTING: {WorkspaceState.READY, WorkspaceState.FAULT},
    WorkspaceState.READY: {WorkspaceState.IN_USE, WorkspaceState.STOPPING,
                           WorkspaceState.FAULT},
    WorkspaceState.IN_USE: {WorkspaceState.READY, WorkspaceState.STOPPING,
                            WorkspaceState.FAULT},
    WorkspaceState.STOPPING: {WorkspaceState.RELEASED},
    WorkspaceState.FAULT: {WorkspaceState.RELEASED},
}


@dataclass(frozen=True)
class SystemState:
    last_seq: int = 0
    students: dict[str, Student] = field(default_factory=dict)
    credentials: dict[str, Credential] = field(default_factory=dict)
    robots: dict[str, Robot] = field(default_factory=dict)
    field_layouts: dict[str, FieldLayout] = field(default_factory=dict)
    reservations: dict[str, Reservation] = field(default_factory=dict)
    nodes: dict[str, Node] = field(default_factory=dict)
    workspaces: dict[str, Workspace] = field(default_factory=dict)
    peers: dict[str, OverlayPeer] = field(default_factory=dict)
    jobs: dict[str, ReprovisionJob] = field(default_factory=dict)
    ledger: tuple[CostLedgerEntry, ...] = ()
    deploys: dict[str, DeployBundle] = field(default_factory=dict)
    enroll_tokens: dict[str, bool] = field(default_factory=dict)  # hash -> used

    # --- read helpers (no mutation) ---

    def live_workspace_of(self, student_id: str) -> Workspace | None:
        for ws in self.workspaces.values():
            if ws.student_id == student_id and ws.state in WS_LIVE:
                return ws
        return None

    def workspaces_on(self, node_id: str) -> list[Workspace]:
        return [w for w in self.workspaces.values()
                if w.node_id == node_id and w.state in WS_LIVE
                and w.state != WorkspaceState.REQUESTED]

    def node_free(self, node: Node) -> tuple[int, int]:
        hosted = self.workspaces_on(node.id)
        cpu = node.cpu_cores - sum(w.demand.cpu_cores for w in hosted)
        ram = node.ram_mb - sum(w.demand.ram_mb for w in hosted)
        return cpu, ram

    def bookings_for(self, robot_id: str) -> list[Reservation]:
        return [r for r in self.reservations.values()
                if r.state in BOOKED_STATES and robot_id in r.robot_ids]

    def booked_minutes(self, student_id: str, week: tuple[int, int]) -> int:
        return sum(
            r.slot.duration_min for r in self.reservations.values()
            if r.student_id == student_id and r.state in QUOTA_STATES
            and iso_week(r.slot.start) == week
        )

    def used_addrs(self) -> set[str]:
        return {p.addr for p in self.peers.values()
                if p.status != PeerStatus.EVICTED}


def _put(d: dict, key, value) -> dict:
    out = dict(d)
    out[key] = value
    return out


def apply_event(state: SystemState, event: Event) -> SystemState:
    """Fold one event into the state; raises instead of admitting bad input."""
    if event.seq != state.last_seq + 1:
        raise err.SequenceGap(
            f"event seq {event.seq} after state seq {state.last_seq}")
    handler = _HANDLERS.get(event.kind)
    if handler is None:
        raise err.ValidationRejected(f"unknown event kind {event.kind!r}")
    new = handler(state, event)
    return replace(new, last_seq=event.seq)


def replay(events: Iterable[Event]) -> SystemState:
    state = SystemState()
    for ev in events:
        state = apply_event(state, ev)
    return state


# --- handlers -------------------------------------------------------------

def _student_added(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    if p["id"] in state.students:
        raise err.ValidationRejected(f"duplicate student id {p['id']}")
    if p["weekly_quota_min"] <= 0:
        raise err.ValidationRejected("weekly quota must be positive")
    student = Student(
        id=p["id"],
        display_name=p["display_name"],
        max_tier=Tier(p["max_tier"]),
        weekly_quota_min=p["weekly_quota_min"],
    )
    return replace(state, students=_put(state.students, student.id, student))


def _credential_issued(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    student = state.students.get(p["student_id"])
    if student is None:
        raise err.UnknownStudent(p["student_id"])
    cred = Credential(student_id=student.id, token_hash=p["token_hash"],
                      issued_at=ev.ts)
    return replace(
        state,
        credentials=_put(state.credentials, cred.token_hash, cred),
        students=_put(state.students, student.id,
                      replace(student, credential_hash=cred.token_hash)),
    )


def _credential_revoked(state: SystemState, ev: Event) -> SystemState:
    h = ev.payload["token_hash"]
    cred = state.credentials.get(h)
    if cred is None:
        raise err.ValidationRejected("unknown credential")
    return replace(state,
                   credentials=_put(state.credentials, h,
                                    replace(cred, revoked=True)))


def _robot_added(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    if p["id"] in state.robots:
        raise err.ValidationRejected(f"duplicate robot id {p['id']}")
    robot = Robot(
        id=p["id"],
        model=p["model"],
        capabilities=frozenset(p["capabilities"]),
        location=RobotLocation(p["location"]),
        firmware_size_mb=p.get("firmware_size_mb", 4000),
        wheel_bias=p.get("wheel_bias", 0.0),
        unit_cost_cents=p.get("unit_cost_cents", 27000),
    )
    return replace(state, robots=_put(state.robots, robot.id, robot))


def _field_added(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    layout = FieldLayout(id=p["id"], name=p["name"], rows=tuple(p["rows"]),
                         cell_size_m=p.get("cell_size_m", 1.0))
    if not layout.valid():
        raise err.ValidationRejected("malformed field layout grid")
    return replace(state,
                   field_layouts=_put(state.field_layouts, layout.id, layout))


def _node_added(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    if p["id"] in state.nodes:
        raise err.ValidationRejected(f"duplicate node id {p['id']}")
    if p["hourly_rate_cents"] < 0:
        raise err.ValidationRejected("negative hourly rate")
    node = Node(
        id=p["id"], cpu_cores=p["cpu_cores"], ram_mb=p["ram_mb"],
        has_gpu=p["has_gpu"], hourly_rate_cents=p["hourly_rate_cents"],
        provisioned_at=ev.ts, state_since=ev.ts,
    )
    return replace(state, nodes=_put(state.nodes, node.id, node))


def _node_state(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    node = state.nodes.get(p["id"])
    if node is None:
        raise err.UnknownNode(p["id"])
    to = NodeState(p["to"])
    if to not in _NODE_GRAPH.get(node.state, set()):
        raise err.IllegalTransition(f"node {node.state.value} -> {to.value}")
    ledger = state.ledger
    idle_since = node.idle_since
    if to == NodeState.READY and not state.workspaces_on(node.id):
        idle_since = ev.ts
    if to in (NodeState.DRAINING, NodeState.RELEASED) and state.workspaces_on(node.id):
        raise err.IllegalTransition("node still hosts workspaces")
    if to == NodeState.RELEASED:
        ledger = ledger + (CostLedgerEntry(
            node_id=node.id, start=node.provisioned_at, end=ev.ts,
            rate_cents_per_hour=node.hourly_rate_cents),)
    node = replace(node, state=to, state_since=ev.ts, idle_since=idle_since)
    return replace(state, nodes=_put(state.nodes, node.id, node), ledger=ledger)


def _reservation_requested(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    rid = p["id"]
    if rid in state.reservations:
        raise err.ValidationRejected(f"duplicate reservation id {rid}")
    student = state.students.get(p["student_id"])
    if student is None:
        raise err.UnknownStudent(p["student_id"])
    if student.max_tier < Tier.REMOTE_LAB:
        raise err.TierDenied(
            f"student {student.id} tier {student.max_tier} below RemoteLab")
    robot_ids = tuple(p["robot_ids"])
    if not robot_ids:
        raise err.ValidationRejected("reservation needs at least one robot")
    slot = TimeSlot(start=p["start"], duration_min=p["duration_min"])
    if not slot.valid():
        raise err.BadSlot(f"slot off grid: start={slot.start} "
                          f"duration={slot.duration_min}")
    if slot.start < ev.ts:
        raise err.PastSlot(f"slot starts at {slot.start}, now is {ev.ts}")
    if p["field_layout_id"] not in state.field_layouts:
        raise err.UnknownField(p["field_layout_id"])
    for robot_id in robot_ids:
        robot = state.robots.get(robot_id)
        if robot is None or robot.location != RobotLocation.LAB_FIELD:
            raise err.UnknownRobot(robot_id)
        for other in state.bookings_for(robot_id):
            if other.slot.overlaps(slot):
                raise err.Conflict(robot_id)
    week = iso_week(slot.start)
    used = state.booked_minutes(student.id, week)
    if used + slot.duration_min > student.weekly_quota_min:
        raise err.QuotaExceeded(max(student.weekly_quota_min - used, 0))
    res = Reservation(
        id=rid, student_id=student.id, robot_ids=robot_ids, slot=slot,
        field_layout_id=p["field_layout_id"], created_seq=ev.seq,
    )
    return replace(state, reservations=_put(state.reservations, rid, res))


def _activation_ordered(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    res = state.reservations.get(p["reservation_id"])
    if res is None:
        raise err.UnknownReservation(p["reservation_id"])
    if res.state != ReservationState.CONFIRMED:
        raise err.IllegalTransition(
            f"activation order for {res.state.value} reservation")
    if res.activation_seq:
        raise err.IllegalTransition("reservation already ordered for activation")
    res = replace(res, activation_seq=ev.seq,
                  workspace_id=p.get("workspace_id", ""))
    return replace(state, reservations=_put(state.reservations, res.id, res))


def _reservation_state(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    res = state.reservations.get(p["id"])
    if res is None:
        raise err.UnknownReservation(p["id"])
    to = ReservationState(p["to"])
    if to not in _RESERVATION_GRAPH.get(res.state, set()):
        raise err.IllegalTransition(
            f"reservation {res.state.value} -> {to.value}")
    if to == ReservationState.ACTIVE:
        if not res.activation_seq:
            raise err.IllegalTransition("activation without prior order")
        for robot_id in res.robot_ids:
            robot = state.robots[robot_id]
            if robot.state != RobotState.ACTIVE:
                raise err.IllegalTransition(
                    f"robot {robot_id} not Active at session activation")
    return replace(state,
                   reservations=_put(state.reservations, res.id,
                                     replace(res, state=to)))


def _robot_state(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    robot = state.robots.get(p["robot_id"])
    if robot is None:
        raise err.UnknownRobot(p["robot_id"])
    to = RobotState(p["to"])
    if to not in _ROBOT_GRAPH.get(robot.state, set()):
        raise err.IllegalTransition(f"robot {robot.state.value} -> {to.value}")
    jobs = state.jobs
    if robot.state == RobotState.REPROVISIONING:
        # factory reset: the only way firmware advances and battery refills
        job = jobs.get(robot.id)
        if job is None:
            raise err.UnknownJob(robot.id)
        jobs = {k: v for k, v in jobs.items() if k != robot.id}
        if to == RobotState.IDLE:
            if robot.flash_failure_pending:
                raise err.IllegalTransition(
                    "flash failure pending; completion must fault")
            robot = replace(
                robot, state=to,
                firmware_version=job.target_firmware_version,
                battery_pct=100.0, pose=(0.0, 0.0, 0.0),
                last_flash_seq=ev.seq,
            )
        else:  # Fault; the injected failure is consumed
            robot = replace(robot, state=to, flash_failure_pending=False)
        return replace(state, robots=_put(state.robots, robot.id, robot),
                       jobs=jobs)
    if to == RobotState.ACTIVE:
        res = state.reservations.get(p.get("reservation_id", ""))
        if (res is None or res.state != ReservationState.CONFIRMED
                or not res.activation_seq or robot.id not in res.robot_ids):
            raise err.ValidationRejected(
                f"robot {robot.id} Active without a reservation being activated")
        if robot.last_flash_seq <= res.activation_seq:
            raise err.ValidationRejected(
                f"robot {robot.id} not reprovisioned since activation order")
    updates: dict = {"state": to}
    if "battery_pct" in p:
        updates["battery_pct"] = p["battery_pct"]
    if "pose" in p:
        updates["pose"] = tuple(p["pose"])
    robot = replace(robot, **updates)
    return replace(state, robots=_put(state.robots, robot.id, robot))


def _reprovision_started(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    robot = state.robots.get(p["robot_id"])
    if robot is None:
        raise err.UnknownRobot(p["robot_id"])
    if robot.state not in (RobotState.IDLE, RobotState.RESERVED,
                           RobotState.FAULT):
        raise err.Busy(f"robot {robot.id} is {robot.state.value}")
    job = ReprovisionJob(
        robot_id=robot.id, started_at=ev.ts,
        expected_duration_s=p["expected_duration_s"],
        target_firmware_version=p["target_firmware_version"],
        reservation_id=p.get("reservation_id", ""),
    )
    if job.target_firmware_version != robot.firmware_version + 1:
        raise err.ValidationRejected("firmware version must advance by one")
    robot = replace(robot, state=RobotState.REPROVISIONING)
    return replace(state, robots=_put(state.robots, robot.id, robot),
                   jobs=_put(state.jobs, robot.id, job))


def _workspace_requested(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    if p["id"] in state.workspaces:
        raise err.ValidationRejected(f"duplicate workspace id {p['id']}")
    student = state.students.get(p["student_id"])
    if student is None:
        raise err.UnknownStudent(p["student_id"])
    if state.live_workspace_of(student.id) is not None:
        raise err.AlreadyProvisioned(student.id)
    ws = Workspace(
        id=p["id"], student_id=student.id, state_since=ev.ts,
        demand=WorkspaceDemand(cpu_cores=p.get("cpu_cores", 2),
                               ram_mb=p.get("ram_mb", 4096),
                               needs_gpu=p.get("needs_gpu", False)),
    )
    return replace(state, workspaces=_put(state.workspaces, ws.id, ws))


def _workspace_state(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    ws = state.workspaces.get(p["id"])
    if ws is None:
        raise err.UnknownWorkspace(p["id"])
    to = WorkspaceState(p["to"])
    if to not in _WORKSPACE_GRAPH.get(ws.state, set()):
        raise err.IllegalTransition(f"workspace {ws.state.value} -> {to.value}")
    nodes = state.nodes
    if to == WorkspaceState.PLACING:
        node = state.nodes.get(p.get("node_id", ""))
        if node is None or node.state != NodeState.READY:
            raise err.NoCapacity(f"node {p.get('node_id')!r} not Ready")
        if ws.demand.needs_gpu and not node.has_gpu:
            raise err.NoCapacity(f"node {node.id} lacks a GPU")
        free_cpu, free_ram = state.node_free(node)
        if ws.demand.cpu_cores > free_cpu or ws.demand.ram_mb > free_ram:
            raise err.NoCapacity(f"node {node.id} is full")
        ws = replace(ws, node_id=node.id)
        nodes = _put(nodes, node.id, replace(node, idle_since=0))
    elif to == WorkspaceState.READY:
        addr = p.get("overlay_addr", ws.overlay_addr)
        if not addr:
            raise err.ValidationRejected("Ready workspace needs an overlay address")
        ws = replace(ws, overlay_addr=addr)
    elif to == WorkspaceState.RELEASED:
        node = state.nodes.get(ws.node_id)
        if node is not None:
            others = [w for w in state.workspaces_on(node.id) if w.id != ws.id]
            if not others:
                nodes = _put(nodes, node.id, replace(node, idle_since=ev.ts))
        ws = replace(ws, overlay_addr="")
    ws = replace(ws, state=to, state_since=ev.ts)
    return replace(state, workspaces=_put(state.workspaces, ws.id, ws),
                   nodes=nodes)


def _enroll_token_issued(state: SystemState, ev: Event) -> SystemState:
    h = ev.payload["token_hash"]
    if h in state.enroll_tokens:
        raise err.ValidationRejected("duplicate enrollment token")
    return replace(state, enroll_tokens=_put(state.enroll_tokens, h, False))


def _peer_registered(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    h = p["token_hash"]
    if h not in state.enroll_tokens or state.enroll_tokens[h]:
        raise err.InvalidToken("enrollment token unknown or already used")
    if p["peer_id"] in state.peers:
        raise err.ValidationRejected(f"duplicate peer id {p['peer_id']}")
    if p["addr"] in state.used_addrs():
        raise err.ValidationRejected(f"address {p['addr']} already allocated")
    peer = OverlayPeer(peer_id=p["peer_id"], kind=PeerKind(p["kind"]),
                       addr=p["addr"], enrolled_at=ev.ts, last_heartbeat=ev.ts)
    return replace(
        state,
        peers=_put(state.peers, peer.peer_id, peer),
        enroll_tokens=_put(state.enroll_tokens, h, True),
    )


def _peer_heartbeat(state: SystemState, ev: Event) -> SystemState:
    peer = state.peers.get(ev.payload["peer_id"])
    if peer is None:
        raise err.UnknownPeer(ev.payload["peer_id"])
    if peer.status == PeerStatus.EVICTED:
        raise err.PeerEvicted(peer.peer_id)
    peer = replace(peer, last_heartbeat=ev.ts, status=PeerStatus.LIVE)
    return replace(state, peers=_put(state.peers, peer.peer_id, peer))


def _peer_status(state: SystemState, ev: Event) -> SystemState:
    peer = state.peers.get(ev.payload["peer_id"])
    if peer is None:
        raise err.UnknownPeer(ev.payload["peer_id"])
    to = PeerStatus(ev.payload["to"])
    if peer.status == PeerStatus.EVICTED:
        raise err.IllegalTransition("peer already evicted")
    peer = replace(peer, status=to)
    return replace(state, peers=_put(state.peers, peer.peer_id, peer))


def _fault_injected(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    robot = state.robots.get(p["robot_id"])
    if robot is None:
        raise err.UnknownRobot(p["robot_id"])
    kind = FaultKind(p["kind"])
    jobs = state.jobs
    if kind == FaultKind.BATTERY_DRAIN:
        if robot.id in jobs:
            jobs = {k: v for k, v in jobs.items() if k != robot.id}
        robot = replace(robot, battery_pct=9.0, state=RobotState.FAULT)
    elif kind == FaultKind.FLASH_FAILURE:
        robot = replace(robot, flash_failure_pending=True)
    # Disconnect leaves authoritative state alone; the agent stops heartbeating
    return replace(state, robots=_put(state.robots, robot.id, robot), jobs=jobs)


def _deploy_stored(state: SystemState, ev: Event) -> SystemState:
    p = ev.payload
    res = state.reservations.get(p["session_id"])
    if res is None:
        raise err.UnknownReservation(p["session_id"])
    if res.state != ReservationState.ACTIVE:
        raise err.SessionNotActive(res.id)
    ws = state.live_workspace_of(res.student_id)
    if ws is None or ws.state not in (WorkspaceState.READY,
                                      WorkspaceState.IN_USE):
        raise err.NoWorkspace(res.student_id)
    bundle = DeployBundle(id=p["id"], session_id=res.id, name=p["name"],
                          size_bytes=p["size_bytes"], checksum=p["checksum"],
                          stored_at=ev.ts)
    workspaces = state.workspaces
    if ws.state == WorkspaceState.READY:
        workspaces = _put(workspaces, ws.id,
                          replace(ws, state=WorkspaceState.IN_USE,
                                  state_since=ev.ts))
    return replace(state, deploys=_put(state.deploys, bundle.id, bundle),
                   workspaces=workspaces)


_HANDLERS = {
    "student_added": _student_added,
    "credential_issued": _credential_issued,
    "credential_revoked": _credential_revoked,
    "robot_added": _robot_added,
    "field_added": _field_added,
    "node_added": _node_added,
    "node_state": _node_state,
    "reservation_requested": _reservation_requested,
    "activation_ordered": _activation_ordered,
    "reservation_state": _reservation_state,
    "robot_state": _robot_state,
    "reprovision_started": _reprovision_started,
    "workspace_requested": _workspace_requested,
    "workspace_state": _workspace_state,
    "enroll_token_issued": _enroll_token_issued,
    "peer_registered": _peer_registered,
    "peer_heartbeat": _peer_heartbeat,
    "peer_status": _peer_status,
    "fault_injected": _fault_injected,
    "deploy_stored": _deploy_stored,
}


def validate_state(state: SystemState) -> list[str]:
    """Full invariant sweep; returns human-readable violations (empty = ok)."""
    bad: list[str] = []
    for robot in state.robots.values():
        if not 0.0 <= robot.battery_pct <= 100.0:
            bad.append(f"robot {robot.id} battery {robot.battery_pct} out of range")
    # no two booked reservations overlap on a shared robot
    booked = [r for r in state.reservations.values() if r.state in BOOKED_STATES]
    for i, a in enumerate(booked):
        for b in booked[i + 1:]:
            if set(a.robot_ids) & set(b.robot_ids) and a.slot.overlaps(b.slot):
                bad.append(f"reservations {a.id}/{b.id} double-book a robot")
    # node capacity, both axes, and the GPU placement rule
    for node in state.nodes.values():
        hosted = state.workspaces_on(node.id)
        if sum(w.demand.cpu_cores for w in hosted) > node.cpu_cores:
            bad.append(f"node {node.id} cpu over capacity")
        if sum(w.demand.ram_mb for w in hosted) > node.ram_mb:
            bad.append(f"node {node.id} ram over capacity")
        if node.state == NodeState.RELEASED and hosted:
            bad.append(f"released node {node.id} still hosts workspaces")
        for w in hosted:
            if w.demand.needs_gpu and not node.has_gpu:
                bad.append(f"gpu workspace {w.id} on non-gpu node {node.id}")
    # one live workspace per student
    live_by_student: dict[str, int] = {}
    for ws in state.workspaces.values():
        if ws.state in WS_LIVE:
            live_by_student[ws.student_id] = live_by_student.get(ws.student_id, 0) + 1
    for sid, n in live_by_student.items():
        if n > 1:
            bad.append(f"student {sid} holds {n} live workspaces")
    # overlay address uniqueness among non-evicted peers
    seen: set[str] = set()
    for peer in state.peers.values():
        if peer.status == PeerStatus.EVICTED:
            continue
        if peer.addr in seen:
            bad.append(f"duplicate overlay address {peer.addr}")
        seen.add(peer.addr)
    # every released node has a closed ledger entry
    closed = {e.node_id for e in state.ledger}
    for node in state.nodes.values():
        if node.state == NodeState.RELEASED and node.id not in closed:
            bad.append(f"released node {node.id} missing a ledger entry")
    for student in state.students.values():
        if student.weekly_quota_min <= 0:
            bad.append(f"student {student.id} has nonpositive quota")
    return bad
