"""Exception hierarchy shared by every subsystem.

Store-level failures (sequence gaps, corrupt records) are distinct from
domain validation failures so callers can map them to wire statuses
without string matching.
"""


class LabError(Exception):
    """Base class for everything this package raises on purpose."""


# --- store / log ---

class StorageFull(LabError):
    pass


class SequenceGap(LabError):
    pass


class CorruptRecord(LabError):
    pass


class IoFailure(LabError):
    pass


class ChecksumMismatch(LabError):
    pass


class ValidationRejected(LabError):
    """An append was refused by the state-transition function."""


class IllegalTransition(ValidationRejected):
    pass


# --- lookup failures ---

class UnknownStudent(ValidationRejected):
    pass


class UnknownRobot(ValidationRejected):
    pass


class UnknownReservation(ValidationRejected):
    pass


class UnknownWorkspace(ValidationRejected):
    pass


class UnknownPeer(ValidationRejected):
    pass


class UnknownCamera(LabError):
    pass


class UnknownJob(ValidationRejected):
    pass


class UnknownSession(LabError):
    pass


class UnknownField(ValidationRejected):
    pass


class UnknownNode(ValidationRejected):
    pass


# --- scheduler ---

class Conflict(ValidationRejected):
    def __init__(self, robot_id: str):
        super().__init__(f"robot {robot_id} already reserved for an overlapping slot")
        self.robot_id = robot_id


class QuotaExceeded(ValidationRejected):
    def __init__(self, remaining_min: int):
        super().__init__(f"weekly quota exceeded; {remaining_min} minutes remaining")
        self.remaining_min = remaining_min


class TierDenied(ValidationRejected):
    pass


class PastSlot(ValidationRejected):
    pass


class BadSlot(ValidationRejected):
    pass


class NotCancellable(ValidationRejected):
    pass


class NotOwner(ValidationRejected):
    pass


# --- provisioner ---

class AlreadyProvisioned(ValidationRejected):
    pass


class NoCapacity(ValidationRejected):
    pass


class AlreadyReleased(ValidationRejected):
    pass


class Busy(ValidationRejected):
    pass


class TooEarly(ValidationRejected):
    pass


class BadRange(LabError):
    pass


# --- overlay ---

class InvalidToken(ValidationRejected):
    pass


class PoolExhausted(ValidationRejected):
    pass


class PeerEvicted(ValidationRejected):
    pass


# --- fleet sim / control server ---

class AlreadySpawned(LabError):
    pass


class NotReserved(LabError):
    pass


class QueueFull(LabError):
    pass


class RobotFault(LabError):
    pass


class BadCommand(LabError):
    pass


# --- gateway ---

class Unauthorized(LabError):
    pass


class NoWorkspace(ValidationRejected):
    pass


class SessionNotActive(ValidationRejected):
    pass


class SessionEnded(LabError):
    pass


class BadChecksum(LabError):
    pass


class TooLarge(LabError):
    pass


class ScenarioParseError(LabError):
    def __init__(self, line, msg):
        super().__init__(f"step {line}: {msg}")
        self.line = line


class ScenarioAssertionFailed(LabError):
    def __init__(self, step, msg):
        super().__init__(f"step {step}: {msg}")
        self.step = step
