"""Peer registry and address allocator for the lab-spanning private
network. Registry and routing table only — no packets are forwarded.
"""

from __future__ import annotations

import hashlib
import ipaddress

from . import errors as err
from .config import OverlayConfig
from .model import OverlayPeer, PeerKind, PeerStatus
from .state import SystemState
from .store import EventStore

DEFAULT_SUBNET = "10.80.0.0/16"


def hash_token(token: str) -> str:
    return hashlib.sha256(token.encode()).hexdigest()


def _addr_index(subnet: str, addr: str) -> int:
    net = ipaddress.ip_network(subnet)
    return int(ipaddress.ip_address(addr)) - int(net.network_address)


def lowest_free_addr(state: SystemState, subnet: str = DEFAULT_SUBNET) -> str:
    """Lowest unallocated host address; host part 0 and broadcast excluded."""
    net = ipaddress.ip_network(subnet)
    used = {_addr_index(subnet, a) for a in state.used_addrs()}
    last_host = net.num_addresses - 2
    i = 1
    while i in used:
        i += 1
    if i > last_host:
        raise err.PoolExhausted(f"subnet {subnet} has no free addresses")
    return str(net.network_address + i)


def issue_enroll_token(store: EventStore, token: str, now: int) -> str:
    """Record a gateway-issued enrollment token (hash only); returns the hash."""
    h = hash_token(token)
    store.append("enroll_token_issued", {"token_hash": h}, now)
    return h


def register_peer(store: EventStore, kind: PeerKind, enrollment_token: str,
                  now: int, subnet: str = DEFAULT_SUBNET,
                  peer_id: str = "") -> OverlayPeer:
    addr = lowest_free_addr(store.state, subnet)  # PoolExhausted before token burn
    pid = peer_id or f"peer-{store.next_seq:06d}"
    store.append("peer_registered", {
        "peer_id": pid, "kind": kind.value, "addr": addr,
        "token_hash": hash_token(enrollment_token),
    }, now)
    return store.state.peers[pid]


def register_internal(store: EventStore, kind: PeerKind, now: int,
                      subnet: str = DEFAULT_SUBNET,
                      peer_id: str = "") -> OverlayPeer:
    """Self-enrollment for platform-owned peers (workspaces, lab robots);
    the token round-trip is kept so the log shows the same shape."""
    token = f"internal-{store.next_seq:06d}"
    issue_enroll_token(store, token, now)
    return register_peer(store, kind, token, now, subnet, peer_id)


def heartbeat(store: EventStore, peer_id: str, now: int) -> PeerStatus:
    store.append("peer_heartbeat", {"peer_id": peer_id}, now)
    return store.state.peers[peer_id].status


def status_for(peer: OverlayPeer, now: int, cfg: OverlayConfig) -> PeerStatus:
    """Status as a pure function of silence; Evicted is sticky."""
    if peer.status == PeerStatus.EVICTED:
        return PeerStatus.EVICTED
    silent = now - peer.last_heartbeat
    if silent > cfg.evict_after_s:
        return PeerStatus.EVICTED
    if silent > cfg.stale_after_s:
        return PeerStatus.STALE
    return PeerStatus.LIVE


def sweep(store: EventStore, cfg: OverlayConfig,
          now: int) -> list[tuple[str, PeerStatus, PeerStatus]]:
    """Materialize staleness/eviction; evicted addresses return to the pool."""
    transitions = []
    for peer_id in sorted(store.state.peers):
        peer = store.state.peers[peer_id]
        target = status_for(peer, now, cfg)
        if target != peer.status:
            store.append("peer_status",
                         {"peer_id": peer_id, "to": target.value}, now)
            transitions.append((peer_id, peer.status, target))
    return transitions


def route_table(state: SystemState) -> dict[str, tuple[str, PeerKind, PeerStatus]]:
    """addr -> (peer_id, kind, status) for all non-Evicted peers, in
    ascending address order."""
    live = [p for p in state.peers.values() if p.status != PeerStatus.EVICTED]
    live.sort(key=lambda p: int(ipaddress.ip_address(p.addr)))
    return {p.addr: (p.peer_id, p.kind, p.status) for p in live}


def route_table_text(state: SystemState) -> str:
    lines = [f"{addr}\t{kind.value}\t{pid}\t{status.value}"
             for addr, (pid, kind, status) in route_table(state).items()]
    return "\n".join(lines) + ("\n" if lines else "")


def evict_addr(store: EventStore, addr: str, now: int) -> None:
    """Force-evict whichever peer holds `addr` (workspace teardown path)."""
    for peer in store.state.peers.values():
        if peer.addr == addr and peer.status != PeerStatus.EVICTED:
            store.append("peer_status",
                         {"peer_id": peer.peer_id,
                          "to": PeerStatus.EVICTED.value}, now)
            return
