"""The Lab facade: one object wiring the store, scheduler, provisioner,
overlay, and fleet simulator together.

Owns the clock discipline: callers inject `now` (integer UTC seconds) and
either call `tick` at moments of their choosing or `advance_to`, which
jumps between due timestamps instead of polling, so simulating a week
costs milliseconds.
"""

from __future__ import annotations

import hashlib
import random
import secrets

from . import errors as err
from . import overlay, provisioner, scheduler
from .config import LabConfig
from .model import (
    DriveCommand,
    FaultKind,
    MAX_BUNDLE_BYTES,
    PeerKind,
    Reservation,
    ReservationState,
    Robot,
    RobotLocation,
    RobotState,
    Telemetry,
    Tier,
    TimeSlot,
    NodeState,
    Workspace,
)
from .sim.agent import RobotAgent
from .sim.control import Camera, CameraFrame, ControlServer
from .state import replay, validate_state
from .store import EventStore


class Lab:
    def __init__(self, config: LabConfig | None = None,
                 token_rng: random.Random | None = None):
        self.config = config or LabConfig()
        directory = self.config.store.directory or None
        self.store = EventStore(directory,
                                snapshot_every=self.config.store.snapshot_every)
        self.control = ControlServer(self)
        self.agents: dict[str, RobotAgent] = {}
        self.cameras: dict[str, Camera] = {}
        self.telemetry: dict[str, list[Telemetry]] = {}
        self.bundles: dict[str, bytes] = {}
        self.now = 0
        self._token_rng = token_rng
        self._agent_flash_seq: dict[str, int] = {}

    # --- tokens / auth ----------------------------------------------------

    def _new_token(self) -> str:
        if self._token_rng is not None:
            return "".join(f"{self._token_rng.getrandbits(8):02x}"
                           for _ in range(32))
        return secrets.token_hex(32)

    def authenticate(self, token: str) -> str:
        cred = self.store.state.credentials.get(overlay.hash_token(token))
        if cred is None or cred.revoked:
            raise err.Unauthorized("bad or revoked token")
        return cred.student_id

    def issue_credential(self, student_id: str, now: int) -> str:
        token = self._new_token()
        self.store.append("credential_issued", {
            "student_id": student_id,
            "token_hash": overlay.hash_token(token),
        }, now)
        return token

    def revoke_credential(self, token: str, now: int) -> None:
        self.store.append("credential_revoked",
                          {"token_hash": overlay.hash_token(token)}, now)

    # --- admin / inventory ------------------------------------------------

    def add_student(self, display_name: str, now: int, *,
                    max_tier: Tier = Tier.REMOTE_LAB,
                    weekly_quota_min: int | None = None,
                    student_id: str = "") -> tuple[str, str]:
        """Returns (student_id, bearer token)."""
        sid = student_id or f"stu-{self.store.next_seq:04d}"
        quota = (weekly_quota_min if weekly_quota_min is not None
                 else self.config.scheduler.default_quota_min)
        self.store.append("student_added", {
            "id": sid, "display_name": display_name,
            "max_tier": int(max_tier), "weekly_quota_min": quota,
        }, now)
        token = self.issue_credential(sid, now)
        return sid, token

    def add_robot(self, model: str, capabilities: list[str], now: int, *,
                  robot_id: str = "", firmware_size_mb: int = 4000,
                  location: RobotLocation = RobotLocation.LAB_FIELD,
                  wheel_bias: float = 0.0,
                  unit_cost_cents: int = 27000) -> Robot:
        rid = robot_id or f"rob-{self.store.next_seq:04d}"
        self.store.append("robot_added", {
            "id": rid, "model": model, "capabilities": sorted(capabilities),
            "location": location.value, "firmware_size_mb": firmware_size_mb,
            "wheel_bias": wheel_bias, "unit_cost_cents": unit_cost_cents,
        }, now)
        return self.store.state.robots[rid]

    def add_field(self, name: str, rows: list[str], now: int, *,
                  field_id: str = "", cell_size_m: float = 1.0) -> str:
        fid = field_id or f"field-{self.store.next_seq:04d}"
        self.store.append("field_added", {
            "id": fid, "name": name, "rows": list(rows),
            "cell_size_m": cell_size_m,
        }, now)
        return fid

    def add_node(self, cpu_cores: int, ram_mb: int, has_gpu: bool,
                 hourly_rate_cents: int, now: int, *,
                 node_id: str = "") -> str:
        nid = node_id or f"node-{self.store.next_seq:06d}"
        self.store.append("node_added", {
            "id": nid, "cpu_cores": cpu_cores, "ram_mb": ram_mb,
            "has_gpu": has_gpu, "hourly_rate_cents": hourly_rate_cents,
        }, now)
        return nid

    def add_camera(self, camera_id: str, field_layout_id: str,
                   fov: tuple[float, float, float, float]) -> Camera:
        cam = Camera(camera_id=camera_id, field_layout_id=field_layout_id,
                     fov=fov)
        self.cameras[camera_id] = cam
        return cam

    # --- scheduling -------------------------------------------------------

    def reserve(self, student_id: str, robot_ids: list[str], start: int,
                duration_min: int, field_layout_id: str,
                now: int) -> Reservation:
        return scheduler.request_reservation(
            self.store, student_id, robot_ids,
            TimeSlot(start=start, duration_min=duration_min),
            field_layout_id, now)

    def cancel(self, reservation_id: str, actor: str, now: int) -> Reservation:
        return scheduler.cancel_reservation(self.store, reservation_id, actor,
                                            now)

    def available_robots(self, window: TimeSlot,
                         capabilities: frozenset[str] = frozenset()) -> list[str]:
        return scheduler.find_available_robots(
            self.store.state,
            scheduler.ScheduleQuery(window=window,
                                    required_capabilities=capabilities))

    def quota_remaining(self, student_id: str, week_of: int) -> int:
        return scheduler.quota_remaining(self.store.state, student_id, week_of)

    # --- provisioning -----------------------------------------------------

    def provision_workspace(self, student_id: str, needs_gpu: bool,
                            now: int) -> Workspace:
        pcfg = self.config.provisioner
        if not self._can_ever_place(needs_gpu):
            raise err.NoCapacity("no node can ever satisfy this demand")
        ws = provisioner.provision_workspace(self.store, pcfg, student_id,
                                             needs_gpu, now)
        self.tick(now)
        return self.store.state.workspaces[ws.id]

    def _can_ever_place(self, needs_gpu: bool) -> bool:
        pcfg = self.config.provisioner
        state = self.store.state
        for node in state.nodes.values():
            if node.state not in (NodeState.READY, NodeState.PROVISIONING):
                continue
            if needs_gpu and not node.has_gpu:
                continue
            from .model import WorkspaceDemand
            demand = WorkspaceDemand(cpu_cores=pcfg.workspace_cpu,
                                     ram_mb=pcfg.workspace_ram_mb,
                                     needs_gpu=needs_gpu)
            if node.state == NodeState.PROVISIONING or \
                    provisioner.node_free_slots(state, node, demand) >= 1:
                return True
        live = [n for n in state.nodes.values()
                if n.state != NodeState.RELEASED]
        if len(live) >= pcfg.max_nodes:
            return False
        return pcfg.node_template_gpu or not needs_gpu

    def deprovision_workspace(self, workspace_id: str, now: int) -> Workspace:
        return provisioner.deprovision_workspace(self.store, workspace_id, now)

    def start_reprovision(self, robot_id: str, now: int):
        return provisioner.start_reprovision(self.store,
                                             self.config.provisioner,
                                             robot_id, now)

    def cost_report(self, from_ts: int, to_ts: int):
        return provisioner.cost_report(self.store.state, from_ts, to_ts)

    # --- overlay ----------------------------------------------------------

    def issue_enroll_token(self, now: int) -> str:
        token = self._new_token()
        overlay.issue_enroll_token(self.store, token, now)
        return token

    def register_peer(self, kind: PeerKind, enrollment_token: str, now: int):
        return overlay.register_peer(self.store, kind, enrollment_token, now,
                                     self.config.overlay.subnet)

    def heartbeat(self, peer_id: str, now: int):
        return overlay.heartbeat(self.store, peer_id, now)

    def sweep(self, now: int):
        return overlay.sweep(self.store, self.config.overlay, now)

    def heartbeat_agents(self, now: int) -> None:
        for robot_id in sorted(self.agents):
            agent = self.agents[robot_id]
            if agent.connected and agent.peer_id:
                overlay.heartbeat(self.store, agent.peer_id, now)

    # --- fleet sim --------------------------------------------------------

    def spawn_agent(self, robot_id: str, field_layout_id: str, seed: int,
                    now: int) -> RobotAgent:
        robot = self.store.state.robots.get(robot_id)
        if robot is None:
            raise err.UnknownRobot(robot_id)
        layout = self.store.state.field_layouts.get(field_layout_id)
        if layout is None:
            raise err.UnknownField(field_layout_id)
        if robot_id in self.agents:
            raise err.AlreadySpawned(robot_id)
        peer = overlay.register_internal(
            self.store, PeerKind.LAB_ROBOT, now,
            self.config.overlay.subnet, peer_id=f"robot-{robot_id}")
        agent = RobotAgent(robot_id, layout, seed,
                           wheel_bias=robot.wheel_bias, cfg=self.config.sim)
        agent.peer_id = peer.peer_id
        self.agents[robot_id] = agent
        self.telemetry.setdefault(robot_id, [])
        self._agent_flash_seq[robot_id] = robot.last_flash_seq
        return agent

    def step_sim(self, n: int, now: int) -> list[Telemetry]:
        """Advance every agent n ticks; returns the telemetry emitted."""
        out: list[Telemetry] = []
        for _ in range(n):
            for robot_id in sorted(self.agents):
                agent = self.agents[robot_id]
                robot = self.store.state.robots[robot_id]
                t = agent.step(robot.state)
                self.telemetry[robot_id].append(t)
                self.control.broadcast(t)
                out.append(t)
                if (agent.battery < self.config.sim.battery_fault_pct
                        and robot.state in (RobotState.IDLE,
                                            RobotState.RESERVED,
                                            RobotState.ACTIVE)):
                    self.store.append("robot_state", {
                        "robot_id": robot_id, "to": RobotState.FAULT.value,
                        "battery_pct": agent.battery,
                    }, now)
        return out

    def inject_fault(self, robot_id: str, kind: FaultKind, now: int) -> None:
        self.store.append("fault_injected",
                          {"robot_id": robot_id, "kind": kind.value}, now)
        agent = self.agents.get(robot_id)
        if agent is not None:
            if kind == FaultKind.DISCONNECT:
                agent.connected = False
            elif kind == FaultKind.BATTERY_DRAIN:
                agent.battery = 9.0

    def dispatch(self, robot_id: str, command: DriveCommand,
                 student_id: str, now: int) -> None:
        self.control.dispatch(robot_id, command, student_id, now)

    def camera_frames(self, camera_id: str) -> list[CameraFrame]:
        cam = self.cameras.get(camera_id)
        if cam is None:
            raise err.UnknownCamera(camera_id)
        frames = []
        for robot_id in sorted(self.agents):
            agent = self.agents[robot_id]
            if agent.layout.id != cam.field_layout_id:
                continue
            if cam.sees(agent.x, agent.y):
                frames.append(CameraFrame(
                    camera_id=camera_id, tick=agent.tick, robot_id=robot_id,
                    x=agent.x, y=agent.y, theta=agent.theta))
        return frames

    # --- sessions / deploys ----------------------------------------------

    def session(self, session_id: str) -> Reservation:
        res = self.store.state.reservations.get(session_id)
        if res is None:
            raise err.UnknownSession(session_id)
        return res

    def deploy(self, session_id: str, name: str, payload: bytes,
               checksum: str, now: int) -> str:
        if len(payload) > MAX_BUNDLE_BYTES:
            raise err.TooLarge(f"bundle is {len(payload)} bytes")
        digest = hashlib.sha256(payload).hexdigest()
        if checksum != digest:
            raise err.BadChecksum("bundle checksum mismatch")
        deploy_id = f"dep-{self.store.next_seq:06d}"
        self.store.append("deploy_stored", {
            "id": deploy_id, "session_id": session_id, "name": name,
            "size_bytes": len(payload), "checksum": digest,
        }, now)
        self.bundles[deploy_id] = payload
        return deploy_id

    def telemetry_for_session(self, session_id: str,
                              from_tick: int = 0) -> list[Telemetry]:
        res = self.session(session_id)
        out: list[Telemetry] = []
        for robot_id in sorted(res.robot_ids):
            out.extend(t for t in self.telemetry.get(robot_id, [])
                       if t.tick >= from_tick)
        return out

    # --- clock ------------------------------------------------------------

    def tick(self, now: int) -> None:
        """Materialize everything due at `now`, in a fixed order: timed
        lifecycle progress, then session expiry, then activation. Expiry
        runs first so a slot starting the moment another ends sees its
        robots already back in Idle and gets a fresh factory reset."""
        self.now = max(self.now, now)
        pcfg = self.config.provisioner
        provisioner.advance(self.store, pcfg, now)
        self._sync_agents()
        readback = {rid: a.battery for rid, a in self.agents.items()}
        scheduler.tick_expire(self.store, now, battery_readback=readback)
        scheduler.tick_activate(self.store, now,
                                flash_base_s=pcfg.flash_base_s,
                                flash_rate_mb_s=pcfg.flash_rate_mb_s)
        self._sync_agents()

    def _sync_agents(self) -> None:
        # a completed factory reset in the store resets the live agent too
        for robot_id, agent in self.agents.items():
            robot = self.store.state.robots.get(robot_id)
            if robot is None:
                continue
            if robot.last_flash_seq > self._agent_flash_seq.get(robot_id, 0):
                agent.factory_reset()
                self._agent_flash_seq[robot_id] = robot.last_flash_seq

    def next_due(self) -> int | None:
        dues = []
        d = provisioner.next_due(self.store.state, self.config.provisioner)
        if d is not None:
            dues.append(d)
        for res in self.store.state.reservations.values():
            if res.state == ReservationState.CONFIRMED:
                if not res.activation_seq:
                    dues.append(res.slot.start)
                dues.append(res.slot.end)
            elif res.state == ReservationState.ACTIVE:
                dues.append(res.slot.end)
        return min(dues) if dues else None

    def advance_to(self, now: int) -> None:
        """Jump the clock forward, ticking at every due timestamp."""
        for _ in range(1_000_000):
            due = self.next_due()
            if due is None or due > now or due <= self.now:
                break
            self.tick(due)
        self.tick(now)

    # --- verification hooks ----------------------------------------------

    def replay_matches_live(self) -> bool:
        return replay(self.store.events()) == self.store.state

    def invariant_violations(self) -> list[str]:
        return validate_state(self.store.state)
