"""Domain-type unit tests: slots, layouts, billing arithmetic."""

import math
from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from remotelab.model import (
    CostLedgerEntry,
    FieldLayout,
    TimeSlot,
    iso_week,
    reprovision_duration_s,
)

from conftest import T0, DAY


# --- TimeSlot -------------------------------------------------------------

def test_slot_grid_and_duration_rules():
    assert TimeSlot(T0, 15).valid()
    assert TimeSlot(T0, 120).valid()
    assert not TimeSlot(T0 + 1, 15).valid()        # off the 15-minute grid
    assert not TimeSlot(T0, 0).valid()
    assert not TimeSlot(T0, 125).valid()           # not a multiple of 15
    assert not TimeSlot(T0, 135).valid()           # longer than two hours
    assert not TimeSlot(T0, -15).valid()


def test_slot_end_and_adjacency():
    a = TimeSlot(T0, 60)
    assert a.end == T0 + 3600
    # half-open intervals: touching slots do not overlap
    assert not a.overlaps(TimeSlot(T0 + 3600, 60))
    assert not TimeSlot(T0 + 3600, 60).overlaps(a)
    assert a.overlaps(TimeSlot(T0 + 900, 15))      # containment
    assert a.overlaps(TimeSlot(T0 - 900, 30))      # straddles the start


slots = st.builds(TimeSlot,
                  start=st.integers(0, 10**6).map(lambda k: T0 + 900 * k),
                  duration_min=st.integers(1, 8).map(lambda k: 15 * k))


@given(slots, slots)
def test_overlap_is_symmetric_and_matches_interval_math(a, b):
    brute = max(a.start, b.start) < min(a.end, b.end)
    assert a.overlaps(b) == brute
    assert b.overlaps(a) == brute


# --- iso_week -------------------------------------------------------------

def test_iso_week_buckets_match_the_calendar():
    # oracle: Python's own ISO calendar
    y, w, _ = datetime.fromtimestamp(T0, tz=timezone.utc).isocalendar()
    assert iso_week(T0) == (y, w)
    assert iso_week(T0) == iso_week(T0 + 6 * DAY + 86399)  # Sunday night
    assert iso_week(T0) != iso_week(T0 + 7 * DAY)          # next Monday


# --- factory-reset duration ----------------------------------------------

def test_reprovision_duration_formula():
    # 120 s floor plus transfer at 40 MB/s
    assert reprovision_duration_s(0) == 120
    assert reprovision_duration_s(39) == 120
    assert reprovision_duration_s(400) == 130
    assert reprovision_duration_s(4000) == 220


# --- cost ledger ----------------------------------------------------------

def test_two_hours_at_ninety_cents_costs_180():
    entry = CostLedgerEntry(node_id="n1", start=T0, end=T0 + 7200,
                            rate_cents_per_hour=90)
    assert entry.minutes == 120
    assert entry.amount_cents == 180


@pytest.mark.parametrize("seconds,rate,want_minutes", [
    (1, 90, 1),        # any sliver of a minute bills the whole minute
    (59, 90, 1),
    (60, 90, 1),
    (61, 90, 2),
    (3600, 90, 60),
])
def test_partial_minutes_round_up(seconds, rate, want_minutes):
    entry = CostLedgerEntry(node_id="n1", start=T0, end=T0 + seconds,
                            rate_cents_per_hour=rate)
    assert entry.minutes == want_minutes
    # cents round up too: oracle via exact rational arithmetic
    assert entry.amount_cents == math.ceil(want_minutes * rate / 60)


# --- field layouts --------------------------------------------------------

def test_layout_geometry_and_obstacles():
    layout = FieldLayout(id="f", name="f", rows=("..#", "...",), cell_size_m=2.0)
    assert layout.valid()
    assert layout.width_m == 6.0
    assert layout.height_m == 4.0
    assert layout.is_obstacle(5.0, 1.0)        # inside the '#' cell
    assert not layout.is_obstacle(1.0, 1.0)


def test_layout_validation_rejects_ragged_or_bad_cells():
    assert not FieldLayout(id="f", name="f", rows=("..", ".",)).valid()
    assert not FieldLayout(id="f", name="f", rows=("x.",)).valid()
    assert not FieldLayout(id="f", name="f", rows=()).valid()
