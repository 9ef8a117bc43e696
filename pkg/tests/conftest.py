"""Shared fixtures and small builders used across the suite."""

from __future__ import annotations

import random

import pytest

from remotelab.config import LabConfig
from remotelab.service import Lab

# Monday 2021-05-03 00:00 UTC. Midnight of any UTC day sits on the
# 15-minute reservation grid (86400 % 900 == 0), and starting on a Monday
# keeps a simulated week inside a single ISO quota bucket.
T0 = 1_620_000_000
DAY = 86_400

OPEN_FIELD = ["....." for _ in range(5)]


def fresh_lab(seed: int = 7, config: LabConfig | None = None) -> Lab:
    return Lab(config, token_rng=random.Random(seed))


@pytest.fixture
def lab() -> Lab:
    return fresh_lab()


def stock(lab: Lab, *, robots: int = 2, firmware_mb: int = 400):
    """One student, `robots` robots, and an open 5x5 field.

    Small firmware keeps the simulated factory reset short
    (120 + 400/40 = 130 seconds), so sessions activate well inside a
    15-minute slot. Returns (student_id, token, robot_ids, field_id).
    """
    sid, token = lab.add_student("Casey", T0, student_id="s01")
    rids = []
    for i in range(robots):
        rid = f"r{i + 1:02d}"
        lab.add_robot("labbot", ["diff_drive", "camera"], T0,
                      robot_id=rid, firmware_size_mb=firmware_mb)
        rids.append(rid)
    fid = lab.add_field("open", OPEN_FIELD, T0, field_id="open")
    return sid, token, rids, fid


def activate_session(lab: Lab, sid: str, robot_ids: list[str], fid: str,
                     start: int, duration_min: int = 60):
    """Reserve and advance the clock until the session is Active."""
    res = lab.reserve(sid, robot_ids, start, duration_min, fid, T0)
    lab.advance_to(start + 300)
    return lab.store.state.reservations[res.id]
