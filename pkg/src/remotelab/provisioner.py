"""Workspace and robot lifecycle driver: container placement on billed
nodes, elastic scale-up/down, robot factory resets, and cost accounting.

Nothing here uses background timers. Timed transitions (node boot, image
pull, container start, firmware flash, idle drain) are materialized by
`advance`, which a single clock owner calls with an injected `now`.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import errors as err
from . import overlay
from .config import ProvisionerConfig
from .model import (
    CostLedgerEntry,
    Node,
    NodeState,
    PeerKind,
    ReprovisionJob,
    Reservation,
    ReservationState,
    Robot,
    RobotState,
    Workspace,
    WorkspaceDemand,
    WorkspaceState,
    reprovision_duration_s,
)
from .state import SystemState
from .store import EventStore


@dataclass(frozen=True)
class PlacementRequest:
    workspace_id: str
    demand: WorkspaceDemand


def node_free_slots(state: SystemState, node: Node,
                    demand: WorkspaceDemand) -> int:
    """How many more workspaces of `demand` the node can hold."""
    free_cpu, free_ram = state.node_free(node)
    return min(free_cpu // demand.cpu_cores, free_ram // demand.ram_mb)


def place_workspace(state: SystemState, request: PlacementRequest) -> str:
    """First-fit over Ready nodes, widest free capacity first; GPU demands
    only land on GPU nodes. Deterministic: ties break on ascending id."""
    candidates = [n for n in state.nodes.values()
                  if n.state == NodeState.READY
                  and (not request.demand.needs_gpu or n.has_gpu)]
    candidates.sort(key=lambda n: (-node_free_slots(state, n, request.demand),
                                   n.id))
    for node in candidates:
        if node_free_slots(state, node, request.demand) >= 1:
            return node.id
    raise err.NoCapacity("no node can hold the workspace")


def provision_workspace(store: EventStore, cfg: ProvisionerConfig,
                        student_id: str, needs_gpu: bool,
                        now: int) -> Workspace:
    """Request a workspace; placement and the timed Requested->...->Ready
    walk happen on subsequent `advance` calls."""
    ws_id = f"ws-{store.next_seq:06d}"
    store.append("workspace_requested", {
        "id": ws_id, "student_id": student_id, "needs_gpu": needs_gpu,
        "cpu_cores": cfg.workspace_cpu, "ram_mb": cfg.workspace_ram_mb,
    }, now)
    return store.state.workspaces[ws_id]


def deprovision_workspace(store: EventStore, workspace_id: str,
                          now: int) -> Workspace:
    ws = store.state.workspaces.get(workspace_id)
    if ws is None:
        raise err.UnknownWorkspace(workspace_id)
    if ws.state in (WorkspaceState.RELEASED, WorkspaceState.STOPPING):
        raise err.AlreadyReleased(workspace_id)
    if ws.state not in (WorkspaceState.READY, WorkspaceState.IN_USE):
        raise err.ValidationRejected(
            f"workspace is {ws.state.value}; only Ready/InUse deprovision")
    if ws.overlay_addr:
        overlay.evict_addr(store, ws.overlay_addr, now)
    store.append("workspace_state",
                 {"id": ws.id, "to": WorkspaceState.STOPPING.value}, now)
    store.append("workspace_state",
                 {"id": ws.id, "to": WorkspaceState.RELEASED.value}, now)
    return store.state.workspaces[ws.id]


def start_reprovision(store: EventStore, cfg: ProvisionerConfig,
                      robot_id: str, now: int,
                      reservation_id: str = "") -> ReprovisionJob:
    robot = store.state.robots.get(robot_id)
    if robot is None:
        raise err.UnknownRobot(robot_id)
    store.append("reprovision_started", {
        "robot_id": robot_id,
        "expected_duration_s": reprovision_duration_s(
            robot.firmware_size_mb, cfg.flash_base_s, cfg.flash_rate_mb_s),
        "target_firmware_version": robot.firmware_version + 1,
        "reservation_id": reservation_id,
    }, now)
    return store.state.jobs[robot_id]


def complete_reprovision(store: EventStore, job: ReprovisionJob,
                         now: int) -> Robot:
    current = store.state.jobs.get(job.robot_id)
    if current is None or current.started_at != job.started_at:
        raise err.UnknownJob(job.robot_id)
    if now < job.started_at + job.expected_duration_s:
        raise err.TooEarly(
            f"flash finishes at {job.started_at + job.expected_duration_s}")
    robot = store.state.robots[job.robot_id]
    to = (RobotState.FAULT if robot.flash_failure_pending
          else RobotState.IDLE)
    store.append("robot_state", {"robot_id": job.robot_id, "to": to.value},
                 now)
    return store.state.robots[job.robot_id]


def scale_nodes(store: EventStore, cfg: ProvisionerConfig,
                pending_demand: int, now: int) -> list[str]:
    """Provision template nodes to cover `pending_demand` workspaces (up to
    max_nodes) and drain nodes idle past the grace period."""
    provisioned: list[str] = []
    demand = WorkspaceDemand(cpu_cores=cfg.workspace_cpu,
                             ram_mb=cfg.workspace_ram_mb)
    per_node = min(cfg.node_template_cpu // demand.cpu_cores,
                   cfg.node_template_ram_mb // demand.ram_mb)
    state = store.state
    # capacity already booting or free counts against the unmet demand
    headroom = sum(
        node_free_slots(state, n, demand) if n.state == NodeState.READY
        else per_node
        for n in state.nodes.values()
        if n.state in (NodeState.READY, NodeState.PROVISIONING))
    unmet = pending_demand - headroom
    while unmet > 0:
        live = [n for n in store.state.nodes.values()
                if n.state != NodeState.RELEASED]
        if len(live) >= cfg.max_nodes:
            break
        node_id = f"node-{store.next_seq:06d}"
        store.append("node_added", {
            "id": node_id, "cpu_cores": cfg.node_template_cpu,
            "ram_mb": cfg.node_template_ram_mb,
            "has_gpu": cfg.node_template_gpu,
            "hourly_rate_cents": cfg.node_template_rate_cents,
        }, now)
        provisioned.append(node_id)
        unmet -= per_node
    drain_idle_nodes(store, cfg, now)
    return provisioned


def drain_idle_nodes(store: EventStore, cfg: ProvisionerConfig,
                     now: int) -> list[str]:
    drained: list[str] = []
    for node_id in sorted(store.state.nodes):
        node = store.state.nodes[node_id]
        if (node.state == NodeState.READY and node.idle_since
                and now - node.idle_since > cfg.idle_grace_s):
            store.append("node_state",
                         {"id": node.id, "to": NodeState.DRAINING.value}, now)
            store.append("node_state",
                         {"id": node.id, "to": NodeState.RELEASED.value}, now)
            drained.append(node.id)
    return drained


def advance(store: EventStore, cfg: ProvisionerConfig, now: int) -> None:
    """Materialize every timed transition due at `now`."""
    # node boots
    for node_id in sorted(store.state.nodes):
        node = store.state.nodes[node_id]
        if (node.state == NodeState.PROVISIONING
                and now - node.state_since >= cfg.node_boot_s):
            store.append("node_state",
                         {"id": node.id, "to": NodeState.READY.value}, now)
    # firmware flashes
    for robot_id in sorted(store.state.jobs):
        job = store.state.jobs[robot_id]
        if now >= job.started_at + job.expected_duration_s:
            complete_reprovision(store, job, now)
    # workspace pipeline
    pending = 0
    for ws_id in sorted(store.state.workspaces):
        ws = store.state.workspaces[ws_id]
        if ws.state == WorkspaceState.REQUESTED:
            try:
                node_id = place_workspace(
                    store.state, PlacementRequest(ws.id, ws.demand))
            except err.NoCapacity:
                pending += 1
                continue
            store.append("workspace_state",
                         {"id": ws.id, "to": WorkspaceState.PLACING.value,
                          "node_id": node_id}, now)
            store.append("workspace_state",
                         {"id": ws.id, "to": WorkspaceState.PULLING.value},
                         now)
        elif ws.state == WorkspaceState.PLACING:
            store.append("workspace_state",
                         {"id": ws.id, "to": WorkspaceState.PULLING.value},
                         now)
        elif ws.state == WorkspaceState.PULLING:
            if now - ws.state_since >= cfg.image_pull_s:
                store.append("workspace_state",
                             {"id": ws.id, "to": WorkspaceState.STARTING.value},
                             now)
        elif ws.state == WorkspaceState.STARTING:
            if now - ws.state_since >= cfg.container_start_s:
                peer = overlay.register_internal(
                    store, PeerKind.CLOUD_WORKSPACE, now)
                store.append("workspace_state",
                             {"id": ws.id, "to": WorkspaceState.READY.value,
                              "overlay_addr": peer.addr}, now)
    if pending:
        scale_nodes(store, cfg, pending, now)
    else:
        drain_idle_nodes(store, cfg, now)


def next_due(state: SystemState, cfg: ProvisionerConfig) -> int | None:
    """Earliest future timestamp at which `advance` has work to do."""
    dues: list[int] = []
    for node in state.nodes.values():
        if node.state == NodeState.PROVISIONING:
            dues.append(node.state_since + cfg.node_boot_s)
        elif node.state == NodeState.READY and node.idle_since:
            dues.append(node.idle_since + cfg.idle_grace_s + 1)
    for job in state.jobs.values():
        dues.append(job.started_at + job.expected_duration_s)
    for ws in state.workspaces.values():
        if ws.state == WorkspaceState.PULLING:
            dues.append(ws.state_since + cfg.image_pull_s)
        elif ws.state == WorkspaceState.STARTING:
            dues.append(ws.state_since + cfg.container_start_s)
    return min(dues) if dues else None


def _billed_minutes(entry_start: int, entry_end: int,
                    window_start: int, window_end: int) -> int:
    """Minute slots of the entry (grid anchored at entry start, partial
    final minute billed whole) whose occupancy intersects the window."""
    if entry_end <= window_start or entry_start >= window_end:
        return 0
    n_slots = -((entry_start - entry_end) // 60)
    k_lo = max(0, (window_start - entry_start) // 60)
    k_hi = min(n_slots - 1, (window_end - entry_start - 1) // 60)
    return max(0, k_hi - k_lo + 1)


def cost_report(state: SystemState, from_ts: int, to_ts: int,
                ) -> tuple[int, dict[str, int]]:
    """Total cents and per-node breakdown for [from_ts, to_ts); nodes still
    running are billed up to the end of the window."""
    if from_ts >= to_ts:
        raise err.BadRange(f"empty window [{from_ts}, {to_ts})")
    entries = list(state.ledger)
    closed = {e.node_id for e in state.ledger}
    for node in state.nodes.values():
        if node.state != NodeState.RELEASED and node.id not in closed:
            if node.provisioned_at < to_ts:
                entries.append(CostLedgerEntry(
                    node_id=node.id, start=node.provisioned_at, end=to_ts,
                    rate_cents_per_hour=node.hourly_rate_cents))
    breakdown: dict[str, int] = {}
    for e in entries:
        minutes = _billed_minutes(e.start, e.end, from_ts, to_ts)
        if minutes:
            cents = (minutes * e.rate_cents_per_hour + 59) // 60
            breakdown[e.node_id] = breakdown.get(e.node_id, 0) + cents
    return sum(breakdown.values()), breakdown


def active_session_deploy_target(state: SystemState,
                                 res: Reservation) -> Workspace:
    """The workspace a deploy for this session lands in, or NoWorkspace."""
    if res.state != ReservationState.ACTIVE:
        raise err.SessionNotActive(res.id)
    ws = state.live_workspace_of(res.student_id)
    if ws is None or ws.state not in (WorkspaceState.READY,
                                      WorkspaceState.IN_USE):
        raise err.NoWorkspace(res.student_id)
    return ws
