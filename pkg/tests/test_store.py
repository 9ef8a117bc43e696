"""Log encoding, snapshots, and store recovery."""

import json

import pytest
from hypothesis import given, strategies as st

from remotelab import errors as err
from remotelab.model import Event
from remotelab.store import (
    EventStore,
    decode_event,
    encode_event,
    snapshot_load,
    snapshot_write,
    state_from_dict,
    state_to_dict,
)

from conftest import T0


def populated_store(directory=None, **kwargs) -> EventStore:
    s = EventStore(directory, **kwargs)
    s.append("student_added", {"id": "s1", "display_name": "S",
                               "max_tier": 3, "weekly_quota_min": 240}, T0)
    s.append("robot_added", {"id": "r1", "model": "m",
                             "capabilities": ["diff_drive"],
                             "location": "LabField"}, T0)
    s.append("field_added", {"id": "f1", "name": "f", "rows": ["..", ".."]}, T0)
    s.append("reservation_requested", {
        "id": "res1", "student_id": "s1", "robot_ids": ["r1"],
        "start": T0 + 900, "duration_min": 60, "field_layout_id": "f1"}, T0)
    s.append("node_added", {"id": "n1", "cpu_cores": 16, "ram_mb": 32768,
                            "has_gpu": True, "hourly_rate_cents": 90}, T0)
    return s


# --- line encoding --------------------------------------------------------

def test_encode_is_canonical_and_round_trips():
    ev = Event(seq=3, ts=T0, kind="robot_added",
               payload={"b": 1, "a": {"z": [1, 2], "y": "x"}})
    line = encode_event(ev)
    assert line == f'3\t{T0}\trobot_added\t{{"a":{{"y":"x","z":[1,2]}},"b":1}}\n'
    assert decode_event(line) == ev


@pytest.mark.parametrize("line", [
    "not a record\n",
    "1\t2\n",
    "x\t2\tkind\t{}\n",
    "1\t2\tkind\tnot-json\n",
])
def test_corrupt_lines_raise(line):
    with pytest.raises(err.CorruptRecord):
        decode_event(line)


payloads = st.dictionaries(
    st.text(st.characters(codec="utf-8", exclude_characters="\t\n"),
            min_size=1, max_size=8),
    st.one_of(st.integers(), st.booleans(),
              st.text(st.characters(codec="utf-8"), max_size=20),
              st.lists(st.integers(), max_size=3)),
    max_size=5)


@given(st.integers(1, 10**9), st.integers(0, 2**40), payloads)
def test_any_json_payload_round_trips(seq, ts, payload):
    ev = Event(seq=seq, ts=ts, kind="k", payload=payload)
    assert decode_event(encode_event(ev)) == ev


# --- state serialization --------------------------------------------------

def test_state_survives_a_dict_round_trip():
    s = populated_store()
    d = state_to_dict(s.state)
    assert state_from_dict(json.loads(json.dumps(d))) == s.state


def test_snapshot_round_trip_and_checksum(tmp_path):
    s = populated_store()
    path = tmp_path / "snap.dat"
    snapshot_write(s.state, path)
    assert snapshot_load(path) == s.state
    # a single flipped byte in the body must be caught
    header, body = path.read_text().split("\n")[:2]
    path.write_text(header + "\n" + body.replace("s1", "sX") + "\n")
    with pytest.raises(err.ChecksumMismatch):
        snapshot_load(path)


def test_snapshot_rejects_truncation_and_bad_header(tmp_path):
    path = tmp_path / "snap.dat"
    path.write_text("{}")
    with pytest.raises(err.ChecksumMismatch):
        snapshot_load(path)
    path.write_text("not json\n{}\n")
    with pytest.raises(err.CorruptRecord):
        snapshot_load(path)
    path.write_text('{"format_version": 99, "checksum": "x"}\n{}\n')
    with pytest.raises(err.CorruptRecord):
        snapshot_load(path)


# --- persistence and recovery ---------------------------------------------

def test_store_recovers_from_its_log(tmp_path):
    with populated_store(tmp_path) as s:
        want = s.state
    with EventStore(tmp_path) as again:
        assert again.state == want
        assert len(again.events()) == 5


def test_torn_tail_write_is_ignored(tmp_path):
    with populated_store(tmp_path) as s:
        want_seq = s.last_seq
    with open(tmp_path / "events.log", "a", encoding="utf-8") as fh:
        fh.write(f"{want_seq + 1}\t{T0}\treservation_requ")  # crash mid-write
    with EventStore(tmp_path) as again:
        assert again.last_seq == want_seq


def test_periodic_snapshot_speeds_recovery(tmp_path):
    with populated_store(tmp_path, snapshot_every=5) as s:
        want = s.state
    assert (tmp_path / "snapshot.dat").exists()
    with EventStore(tmp_path, snapshot_every=5) as again:
        assert again.state == want
    # a corrupt snapshot falls back to a full log replay
    (tmp_path / "snapshot.dat").write_text("garbage\n")
    with EventStore(tmp_path, snapshot_every=5) as again:
        assert again.state == want


def test_storage_cap(tmp_path):
    s = EventStore(max_events=2)
    s.append("student_added", {"id": "a", "display_name": "A",
                               "max_tier": 3, "weekly_quota_min": 240}, T0)
    s.append("student_added", {"id": "b", "display_name": "B",
                               "max_tier": 3, "weekly_quota_min": 240}, T0)
    with pytest.raises(err.StorageFull):
        s.append("student_added", {"id": "c", "display_name": "C",
                                   "max_tier": 3, "weekly_quota_min": 240}, T0)
