"""Peer registry: address allocation, liveness thresholds, routing."""

import pytest

from remotelab import errors as err, overlay
from remotelab.config import OverlayConfig
from remotelab.model import OverlayPeer, PeerKind, PeerStatus
from remotelab.store import EventStore

from conftest import T0

CFG = OverlayConfig()  # stale > 90 s silent, evicted > 300 s


def register(store, now=T0, kind=PeerKind.STUDENT_DESKTOP, peer_id=""):
    token = f"tok-{store.next_seq}"
    overlay.issue_enroll_token(store, token, now)
    return overlay.register_peer(store, kind, token, now, peer_id=peer_id)


def test_addresses_allocate_lowest_free_first():
    s = EventStore()
    assert register(s).addr == "10.80.0.1"
    assert register(s).addr == "10.80.0.2"
    assert register(s).addr == "10.80.0.3"


def test_evicted_address_is_reissued_lowest_first():
    s = EventStore()
    a = register(s)
    register(s)
    s.append("peer_status", {"peer_id": a.peer_id, "to": "Evicted"}, T0)
    assert register(s).addr == a.addr   # the hole is filled before .3


def test_enrollment_token_cannot_be_reused():
    s = EventStore()
    overlay.issue_enroll_token(s, "once", T0)
    overlay.register_peer(s, PeerKind.STUDENT_ROBOT, "once", T0)
    with pytest.raises(err.InvalidToken):
        overlay.register_peer(s, PeerKind.STUDENT_ROBOT, "once", T0)


def test_pool_exhaustion_reported_before_the_token_burns():
    s = EventStore()
    # a /30 has exactly two usable host addresses
    for _ in range(2):
        token = f"t-{s.next_seq}"
        overlay.issue_enroll_token(s, token, T0)
        overlay.register_peer(s, PeerKind.LAB_ROBOT, token, T0,
                              subnet="10.80.0.0/30")
    overlay.issue_enroll_token(s, "spare", T0)
    with pytest.raises(err.PoolExhausted):
        overlay.register_peer(s, PeerKind.LAB_ROBOT, "spare", T0,
                              subnet="10.80.0.0/30")
    # the token survived the failure and still works once room appears
    overlay.evict_addr(s, "10.80.0.1", T0)
    peer = overlay.register_peer(s, PeerKind.LAB_ROBOT, "spare", T0,
                                 subnet="10.80.0.0/30")
    assert peer.addr == "10.80.0.1"


@pytest.mark.parametrize("silent,want", [
    (0, PeerStatus.LIVE),
    (90, PeerStatus.LIVE),      # exactly the threshold is still fine
    (91, PeerStatus.STALE),
    (300, PeerStatus.STALE),
    (301, PeerStatus.EVICTED),
])
def test_liveness_thresholds(silent, want):
    peer = OverlayPeer(peer_id="p", kind=PeerKind.LAB_ROBOT,
                       addr="10.80.0.1", enrolled_at=T0, last_heartbeat=T0)
    assert overlay.status_for(peer, T0 + silent, CFG) == want


def test_sweep_materializes_transitions_and_frees_addresses():
    s = EventStore()
    a = register(s, now=T0)
    b = register(s, now=T0)
    overlay.heartbeat(s, b.peer_id, T0 + 250)
    moves = overlay.sweep(s, CFG, T0 + 350)
    assert (a.peer_id, PeerStatus.LIVE, PeerStatus.EVICTED) in moves
    assert (b.peer_id, PeerStatus.LIVE, PeerStatus.STALE) in moves
    assert overlay.sweep(s, CFG, T0 + 350) == []    # idempotent
    # the evicted address is back in the pool
    assert register(s, now=T0 + 350).addr == a.addr


def test_heartbeat_revives_a_stale_peer():
    s = EventStore()
    p = register(s)
    overlay.sweep(s, CFG, T0 + 200)
    assert s.state.peers[p.peer_id].status == PeerStatus.STALE
    assert overlay.heartbeat(s, p.peer_id, T0 + 210) == PeerStatus.LIVE


def test_route_table_sorted_and_excludes_evicted():
    s = EventStore()
    a = register(s, peer_id="pa")
    b = register(s, peer_id="pb", kind=PeerKind.CLOUD_WORKSPACE)
    c = register(s, peer_id="pc")
    s.append("peer_status", {"peer_id": b.peer_id, "to": "Evicted"}, T0)
    table = overlay.route_table(s.state)
    assert list(table) == [a.addr, c.addr]
    text = overlay.route_table_text(s.state)
    assert text.splitlines() == [
        "10.80.0.1\tStudentDesktop\tpa\tLive",
        "10.80.0.3\tStudentDesktop\tpc\tLive",
    ]


def test_wide_subnet_wraps_the_third_octet():
    s = EventStore()
    for _ in range(255):
        register(s)
    assert register(s).addr == "10.80.1.0"  # host 256 of the /16
