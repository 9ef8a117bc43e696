"""Time-shared robot access: reservations, quota, and clock-driven
session activation/expiry.

All logic here is stateless over store snapshots; every mutation goes
through the store's serialized append path, so first-come-first-served
by event sequence falls out for free. No function reads the wall clock —
`now` is always injected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import errors as err
from .model import (
    ActivationOrder,
    Reservation,
    ReservationState,
    RobotLocation,
    RobotState,
    Tier,
    TimeSlot,
    iso_week,
    reprovision_duration_s,
)
from .state import SystemState
from .store import EventStore

ADMIN_ACTOR = "admin"


@dataclass(frozen=True)
class ScheduleQuery:
    window: TimeSlot
    required_capabilities: frozenset[str] = field(default_factory=frozenset)
    tier: Tier = Tier.REMOTE_LAB


def request_reservation(store: EventStore, student_id: str,
                        robot_ids: list[str], slot: TimeSlot,
                        field_layout_id: str, now: int) -> Reservation:
    rid = f"res-{store.next_seq:06d}"
    store.append("reservation_requested", {
        "id": rid,
        "student_id": student_id,
        "robot_ids": sorted(robot_ids),
        "start": slot.start,
        "duration_min": slot.duration_min,
        "field_layout_id": field_layout_id,
    }, now)
    return store.state.reservations[rid]


def find_available_robots(state: SystemState, query: ScheduleQuery) -> list[str]:
    """LabField robots with the required capabilities and no booked overlap,
    in ascending id order."""
    out = []
    for robot_id in sorted(state.robots):
        robot = state.robots[robot_id]
        if robot.location != RobotLocation.LAB_FIELD:
            continue
        if not query.required_capabilities <= robot.capabilities:
            continue
        if any(r.slot.overlaps(query.window)
               for r in state.bookings_for(robot_id)):
            continue
        out.append(robot_id)
    return out


def cancel_reservation(store: EventStore, reservation_id: str, actor: str,
                       now: int) -> Reservation:
    res = store.state.reservations.get(reservation_id)
    if res is None:
        raise err.UnknownReservation(reservation_id)
    if actor not in (res.student_id, ADMIN_ACTOR):
        raise err.NotOwner(f"{actor} does not own {reservation_id}")
    if res.state != ReservationState.CONFIRMED:
        raise err.NotCancellable(
            f"reservation is {res.state.value}, only Confirmed cancels")
    store.append("reservation_state",
                 {"id": reservation_id, "to": ReservationState.CANCELLED.value,
                  "actor": actor}, now)
    return store.state.reservations[reservation_id]


def quota_remaining(state: SystemState, student_id: str,
                    week_of: int) -> int:
    student = state.students.get(student_id)
    if student is None:
        raise err.UnknownStudent(student_id)
    used = state.booked_minutes(student_id, iso_week(week_of))
    return max(student.weekly_quota_min - used, 0)


def tick_activate(store: EventStore, now: int, *,
                  flash_base_s: int = 120,
                  flash_rate_mb_s: int = 40) -> list[ActivationOrder]:
    """Order activation for due reservations (robots reserved + sent to
    reprovision), and flip reservations whose robots have all completed
    their factory reset to Active. Idempotent at a fixed `now`."""
    orders: list[ActivationOrder] = []
    due = [r for r in store.state.reservations.values()
           if r.state == ReservationState.CONFIRMED
           and r.slot.start <= now < r.slot.end]
    for res in sorted(due, key=lambda r: r.created_seq):
        if not res.activation_seq:
            ws = store.state.live_workspace_of(res.student_id)
            store.append("activation_ordered", {
                "reservation_id": res.id,
                "workspace_id": ws.id if ws is not None else "",
            }, now)
            for robot_id in res.robot_ids:
                robot = store.state.robots[robot_id]
                if robot.state == RobotState.IDLE:
                    store.append("robot_state",
                                 {"robot_id": robot_id,
                                  "to": RobotState.RESERVED.value,
                                  "reservation_id": res.id}, now)
                    robot = store.state.robots[robot_id]
                if robot.state in (RobotState.RESERVED, RobotState.FAULT):
                    store.append("reprovision_started", {
                        "robot_id": robot_id,
                        "expected_duration_s": reprovision_duration_s(
                            robot.firmware_size_mb, flash_base_s,
                            flash_rate_mb_s),
                        "target_firmware_version": robot.firmware_version + 1,
                        "reservation_id": res.id,
                    }, now)
            res = store.state.reservations[res.id]
            orders.append(ActivationOrder(
                reservation_id=res.id, robot_ids=res.robot_ids,
                workspace_id=res.workspace_id, due=res.slot.start))
        _maybe_activate(store, res.id, now)
    return orders


def _maybe_activate(store: EventStore, reservation_id: str, now: int) -> bool:
    res = store.state.reservations[reservation_id]
    if res.state != ReservationState.CONFIRMED or not res.activation_seq:
        return False
    for robot_id in res.robot_ids:
        robot = store.state.robots[robot_id]
        if (robot.state != RobotState.IDLE
                or robot.last_flash_seq <= res.activation_seq):
            return False
    for robot_id in res.robot_ids:
        store.append("robot_state",
                     {"robot_id": robot_id, "to": RobotState.ACTIVE.value,
                      "reservation_id": res.id}, now)
    store.append("reservation_state",
                 {"id": res.id, "to": ReservationState.ACTIVE.value}, now)
    return True


def tick_expire(store: EventStore, now: int,
                battery_readback=None) -> list[str]:
    """Close out sessions whose slot has elapsed. `battery_readback` maps
    robot_id -> battery percentage observed by the simulator, written back
    when the robot returns to Idle."""
    expired: list[str] = []
    for res in sorted(store.state.reservations.values(),
                      key=lambda r: r.created_seq):
        if res.slot.end > now:
            continue
        if res.state == ReservationState.ACTIVE:
            for robot_id in res.robot_ids:
                payload = {"robot_id": robot_id, "to": RobotState.IDLE.value}
                if battery_readback and robot_id in battery_readback:
                    payload["battery_pct"] = battery_readback[robot_id]
                if store.state.robots[robot_id].state == RobotState.ACTIVE:
                    store.append("robot_state", payload, now)
            store.append("reservation_state",
                         {"id": res.id,
                          "to": ReservationState.COMPLETED.value}, now)
            expired.append(res.id)
        elif res.state == ReservationState.CONFIRMED:
            for robot_id in res.robot_ids:
                if store.state.robots[robot_id].state == RobotState.RESERVED:
                    store.append("robot_state",
                                 {"robot_id": robot_id,
                                  "to": RobotState.IDLE.value}, now)
            store.append("reservation_state",
                         {"id": res.id, "to": ReservationState.NO_SHOW.value},
                         now)
            expired.append(res.id)
    return expired
