"""Scheduling behavior above the store: availability, cancellation,
quota arithmetic, and the clock-driven activate/expire ticks."""

import pytest

from remotelab import errors as err, scheduler
from remotelab.model import FaultKind, ReservationState, RobotState, TimeSlot

from conftest import T0, stock


def test_availability_reflects_overlapping_bookings(lab):
    sid, _, (r1, r2), fid = stock(lab)
    window = TimeSlot(T0 + 900, 60)
    assert lab.available_robots(window) == [r1, r2]
    lab.reserve(sid, [r1], T0 + 900, 60, fid, T0)
    assert lab.available_robots(window) == [r2]
    assert lab.available_robots(TimeSlot(T0 + 4500, 60)) == [r1, r2]


def test_capability_filter(lab):
    sid, _, (r1, r2), fid = stock(lab)
    lab.add_robot("labbot", ["diff_drive", "lidar"], T0, robot_id="r99")
    assert lab.available_robots(TimeSlot(T0 + 900, 15),
                                frozenset(["lidar"])) == ["r99"]
    assert lab.available_robots(TimeSlot(T0 + 900, 15),
                                frozenset(["sonar"])) == []


def test_cancel_rules(lab):
    sid, _, (r1, _), fid = stock(lab)
    res = lab.reserve(sid, [r1], T0 + 900, 60, fid, T0)
    other, _ = lab.add_student("Riley", T0, student_id="s02")
    with pytest.raises(err.NotOwner):
        lab.cancel(res.id, other, T0)
    with pytest.raises(err.UnknownReservation):
        lab.cancel("res-999999", sid, T0)
    lab.cancel(res.id, "admin", T0)     # staff may always cancel
    with pytest.raises(err.NotCancellable):
        lab.cancel(res.id, sid, T0)     # already cancelled


def test_quota_remaining_counts_no_shows(lab):
    sid, _, (r1, _), fid = stock(lab)
    assert lab.quota_remaining(sid, T0) == 240
    res = lab.reserve(sid, [r1], T0 + 900, 60, fid, T0)
    assert lab.quota_remaining(sid, T0) == 180
    # the pre-session reset fails, so the session never starts
    lab.inject_fault(r1, FaultKind.FLASH_FAILURE, T0)
    lab.advance_to(T0 + 5000)
    assert lab.store.state.reservations[res.id].state == ReservationState.NO_SHOW
    assert lab.quota_remaining(sid, T0) == 180   # a no-show still spends quota
    with pytest.raises(err.UnknownStudent):
        lab.quota_remaining("ghost", T0)


def test_session_lifecycle_through_the_clock(lab):
    sid, _, (r1, _), fid = stock(lab)
    res = lab.reserve(sid, [r1], T0 + 900, 60, fid, T0)
    assert res.state == ReservationState.CONFIRMED

    lab.advance_to(T0 + 900)            # slot opens: robots sent to reflash
    state = lab.store.state
    assert state.robots[r1].state == RobotState.REPROVISIONING
    assert state.reservations[res.id].activation_seq > 0

    lab.advance_to(T0 + 900 + 130)      # 120 + 400/40 seconds of flashing
    state = lab.store.state
    assert state.robots[r1].state == RobotState.ACTIVE
    assert state.robots[r1].firmware_version == 2
    assert state.reservations[res.id].state == ReservationState.ACTIVE

    lab.advance_to(T0 + 900 + 3600)     # slot closes
    state = lab.store.state
    assert state.reservations[res.id].state == ReservationState.COMPLETED
    assert state.robots[r1].state == RobotState.IDLE


def test_activation_tick_is_idempotent(lab):
    sid, _, (r1, _), fid = stock(lab)
    lab.reserve(sid, [r1], T0 + 900, 60, fid, T0)
    lab.advance_to(T0 + 900)
    seq = lab.store.last_seq
    scheduler.tick_activate(lab.store, T0 + 900)
    scheduler.tick_activate(lab.store, T0 + 900)
    assert lab.store.last_seq == seq


def test_expire_writes_battery_readback(lab):
    sid, _, (r1, _), fid = stock(lab)
    lab.spawn_agent(r1, fid, seed=1, now=T0)
    lab.reserve(sid, [r1], T0 + 900, 15, fid, T0)
    lab.advance_to(T0 + 1100)
    lab.step_sim(100, T0 + 1100)        # ten seconds of idle drain
    lab.advance_to(T0 + 1800)
    robot = lab.store.state.robots[r1]
    assert robot.state == RobotState.IDLE
    assert robot.battery_pct == pytest.approx(lab.agents[r1].battery)
    assert robot.battery_pct < 100.0


def test_back_to_back_sessions_each_get_a_fresh_reset(lab):
    sid, _, (r1, _), fid = stock(lab)
    a = lab.reserve(sid, [r1], T0 + 900, 15, fid, T0)
    b = lab.reserve(sid, [r1], T0 + 1800, 15, fid, T0)  # starts as `a` ends
    lab.advance_to(T0 + 2700)
    state = lab.store.state
    assert state.reservations[a.id].state == ReservationState.COMPLETED
    assert state.reservations[b.id].state == ReservationState.COMPLETED
    assert state.robots[r1].firmware_version == 3       # two resets


def test_multi_robot_sessions_activate_together(lab):
    sid, _, (r1, r2), fid = stock(lab)
    res = lab.reserve(sid, [r1, r2], T0 + 900, 60, fid, T0)
    lab.advance_to(T0 + 1030)
    state = lab.store.state
    assert state.reservations[res.id].state == ReservationState.ACTIVE
    assert state.robots[r1].state == RobotState.ACTIVE
    assert state.robots[r2].state == RobotState.ACTIVE


def test_faulted_robot_recovers_through_session_activation(lab):
    sid, _, (r1, _), fid = stock(lab)
    lab.inject_fault(r1, FaultKind.BATTERY_DRAIN, T0)
    assert lab.store.state.robots[r1].state == RobotState.FAULT
    res = lab.reserve(sid, [r1], T0 + 900, 60, fid, T0)
    lab.advance_to(T0 + 1030)
    state = lab.store.state
    assert state.robots[r1].state == RobotState.ACTIVE
    assert state.robots[r1].battery_pct == 100.0
    assert state.reservations[res.id].state == ReservationState.ACTIVE
