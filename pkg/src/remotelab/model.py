"""Domain types: students, robots, reservations, nodes, workspaces, peers.

All records are frozen dataclasses; the state store never mutates one in
place, it swaps in a `dataclasses.replace`d copy. Timestamps are integer
UTC seconds throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum, IntEnum

SLOT_GRID_S = 15 * 60
MAX_SLOT_MIN = 120
DEFAULT_ROBOT_COST_CENTS = 27000  # classroom reference robot, USD $270

CAPABILITIES = {"diff_drive", "lidar", "camera", "wifi"}


class Tier(IntEnum):
    SIMULATED = 1
    PERSONAL_ROBOT = 2
    REMOTE_LAB = 3


class RobotLocation(str, Enum):
    LAB_FIELD = "LabField"
    STUDENT_HOME = "StudentHome"


class RobotState(str, Enum):
    IDLE = "Idle"
    REPROVISIONING = "Reprovisioning"
    RESERVED = "Reserved"
    ACTIVE = "Active"
    FAULT = "Fault"


class ReservationState(str, Enum):
    CONFIRMED = "Confirmed"
    ACTIVE = "Active"
    COMPLETED = "Completed"
    CANCELLED = "Cancelled"
    NO_SHOW = "NoShow"


class NodeState(str, Enum):
    PROVISIONING = "Provisioning"
    READY = "Ready"
    DRAINING = "Draining"
    RELEASED = "Released"


class WorkspaceState(str, Enum):
    REQUESTED = "Requested"
    PLACING = "Placing"
    PULLING = "Pulling"
    STARTING = "Starting"
    READY = "Ready"
    IN_USE = "InUse"
    STOPPING = "Stopping"
    RELEASED = "Released"
    FAULT = "Fault"


# ordinal used for the "node_id set iff state >= Placing" invariant
_WS_ORDER = {s: i for i, s in enumerate(WorkspaceState)}

WS_LIVE = frozenset(WorkspaceState) - {WorkspaceState.RELEASED}


class PeerKind(str, Enum):
    CLOUD_WORKSPACE = "CloudWorkspace"
    STUDENT_DESKTOP = "StudentDesktop"
    STUDENT_ROBOT = "StudentRobot"
    LAB_ROBOT = "LabRobot"


class PeerStatus(str, Enum):
    LIVE = "Live"
    STALE = "Stale"
    EVICTED = "Evicted"


class FaultKind(str, Enum):
    DISCONNECT = "Disconnect"
    BATTERY_DRAIN = "BatteryDrain"
    FLASH_FAILURE = "FlashFailure"


def iso_week(ts: int) -> tuple[int, int]:
    """(ISO year, ISO week) of a UTC timestamp; the quota bucket key."""
    d = datetime.fromtimestamp(ts, tz=timezone.utc)
    y, w, _ = d.isocalendar()
    return (y, w)


@dataclass(frozen=True)
class TimeSlot:
    start: int            # UTC seconds, on the 15-minute grid
    duration_min: int     # 15..120 in steps of 15

    @property
    def end(self) -> int:
        return self.start + self.duration_min * 60

    def overlaps(self, other: "TimeSlot") -> bool:
        return self.start < other.end and other.start < self.end

    def valid(self) -> bool:
        return (
            self.start % SLOT_GRID_S == 0
            and 0 < self.duration_min <= MAX_SLOT_MIN
            and self.duration_min % 15 == 0
        )


@dataclass(frozen=True)
class Student:
    id: str
    display_name: str
    max_tier: Tier
    weekly_quota_min: int
    credential_hash: str = ""


@dataclass(frozen=True)
class Credential:
    student_id: str
    token_hash: str
    issued_at: int
    revoked: bool = False


@dataclass(frozen=True)
class Robot:
    id: str
    model: str
    capabilities: frozenset[str]
    location: RobotLocation
    state: RobotState = RobotState.IDLE
    firmware_version: int = 1
    firmware_size_mb: int = 4000
    battery_pct: float = 100.0
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    wheel_bias: float = 0.0       # rad of heading drift per meter driven
    unit_cost_cents: int = DEFAULT_ROBOT_COST_CENTS
    # bookkeeping for activation ordering and fault injection
    last_flash_seq: int = 0
    flash_failure_pending: bool = False


@dataclass(frozen=True)
class Reservation:
    id: str
    student_id: str
    robot_ids: tuple[str, ...]
    slot: TimeSlot
    field_layout_id: str
    state: ReservationState = ReservationState.CONFIRMED
    created_seq: int = 0
    activation_seq: int = 0      # seq of the activation order event, 0 = none yet
    workspace_id: str = ""


@dataclass(frozen=True)
class FieldLayout:
    """Rectangular lab floor; rows are strings of '.' (free) and '#' (obstacle)."""

    id: str
    name: str
    rows: tuple[str, ...]
    cell_size_m: float = 1.0

    @property
    def width_m(self) -> float:
        return len(self.rows[0]) * self.cell_size_m

    @property
    def height_m(self) -> float:
        return len(self.rows) * self.cell_size_m

    def is_obstacle(self, x: float, y: float) -> bool:
        col = int(x / self.cell_size_m)
        row = int(y / self.cell_size_m)
        col = min(max(col, 0), len(self.rows[0]) - 1)
        row = min(max(row, 0), len(self.rows) - 1)
        return self.rows[row][col] == "#"

    def valid(self) -> bool:
        return (
            len(self.rows) > 0
            and len(self.rows[0]) > 0
            and all(len(r) == len(self.rows[0]) for r in self.rows)
            and all(set(r) <= {".", "#"} for r in self.rows)
        )


@dataclass(frozen=True)
class Node:
    id: str
    cpu_cores: int
    ram_mb: int
    has_gpu: bool
    hourly_rate_cents: int
    state: NodeState = NodeState.PROVISIONING
    provisioned_at: int = 0
    state_since: int = 0
    idle_since: int = 0          # ts the node last became empty (while Ready)


@dataclass(frozen=True)
class WorkspaceDemand:
    cpu_cores: int = 2
    ram_mb: int = 4096
    needs_gpu: bool = False


@dataclass(frozen=True)
class Workspace:
    id: str
    student_id: str
    state: WorkspaceState = WorkspaceState.REQUESTED
    node_id: str = ""
    image_version: int = 1
    overlay_addr: str = ""
    demand: WorkspaceDemand = field(default_factory=WorkspaceDemand)
    state_since: int = 0

    @property
    def placed(self) -> bool:
        return _WS_ORDER[self.state] >= _WS_ORDER[WorkspaceState.PLACING] and \
            self.state != WorkspaceState.FAULT


@dataclass(frozen=True)
class OverlayPeer:
    peer_id: str
    kind: PeerKind
    addr: str
    enrolled_at: int
    last_heartbeat: int
    status: PeerStatus = PeerStatus.LIVE


@dataclass(frozen=True)
class ReprovisionJob:
    robot_id: str
    started_at: int
    expected_duration_s: int
    target_firmware_version: int
    reservation_id: str = ""     # set when the job is part of a session activation


def reprovision_duration_s(firmware_size_mb: int, base_s: int = 120,
                           flash_rate_mb_s: int = 40) -> int:
    """Simulated flash time: fixed reboot/setup floor plus image transfer."""
    return base_s + firmware_size_mb // flash_rate_mb_s


@dataclass(frozen=True)
class CostLedgerEntry:
    node_id: str
    start: int
    end: int
    rate_cents_per_hour: int

    @property
    def minutes(self) -> int:
        return -((self.start - self.end) // 60)  # ceil((end-start)/60)

    @property
    def amount_cents(self) -> int:
        return (self.minutes * self.rate_cents_per_hour + 59) // 60


@dataclass(frozen=True)
class DeployBundle:
    id: str
    session_id: str
    name: str
    size_bytes: int
    checksum: str
    stored_at: int


MAX_BUNDLE_BYTES = 16 * 1024 * 1024


@dataclass(frozen=True)
class Event:
    seq: int
    ts: int
    kind: str
    payload: dict


@dataclass(frozen=True)
class Telemetry:
    robot_id: str
    tick: int
    x: float
    y: float
    theta: float
    battery_pct: float
    state: str


@dataclass(frozen=True)
class DriveCommand:
    v: float
    omega: float
    duration_ticks: int


@dataclass(frozen=True)
class ActivationOrder:
    reservation_id: str
    robot_ids: tuple[str, ...]
    workspace_id: str
    due: int
