"""Beacon-fed neighbor tables, on-demand route discovery state, route ranking.

Routes are discovered by flooding route requests and returning unicast
replies along the reverse path.  Among candidate routes collected in the
reply window the choice is lexicographic: highest bottleneck residual
energy, then fewest hops, then lowest next-hop id.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .mobility import Position

ROUTE_TTL_S = 30.0           # active routes refresh on use; idle ones expire
MAX_RREQ_HOPS = 16
RING_HOPS = (4, 8, MAX_RREQ_HOPS)    # expanding-ring flood radii per attempt
DISCOVERY_COOLDOWN_S = 8.0   # base pause between failed discovery rounds
DISCOVERY_COOLDOWN_CAP = 4   # cooldown doubles per consecutive failure, capped


@dataclass(slots=True)
class NeighborEntry:
    id: int
    pos: Position
    residual_energy: float
    last_heard: float
    speed: float = 0.0      # advertised speed; bounds position drift since heard


@dataclass(slots=True)
class RouteEntry:
    dest: int
    next_hop: int
    hop_count: int
    bottleneck_energy: float      # minimum residual along the path
    dest_seq: int = 0
    expires_at: float = float("inf")


class RreqCache:
    """At-most-once forwarding guard for (origin, request id) pairs."""

    def __init__(self):
        self.seen: set = set()

    def check_and_add(self, origin: int, rreq_id: int) -> bool:
        key = (origin, rreq_id)
        if key in self.seen:
            return False
        self.seen.add(key)
        return True


def select_route(candidates) -> RouteEntry:
    """Best of several candidate routes: energy first, then hops, then id."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate route set must be non-empty")
    return min(candidates,
               key=lambda r: (-r.bottleneck_energy, r.hop_count, r.next_hop))


@dataclass(slots=True)
class Discovery:
    """State of one in-flight route discovery at its origin."""

    dest: int
    attempt: int = 0
    token: int = 0
    window_open: bool = False
    candidates: list = field(default_factory=list)


class RoutingState:
    """Per-node tables: neighbors, routes, request cache, pending packets."""

    def __init__(self, neighbor_ttl: float, buffer_pkts: int):
        self.neighbor_ttl = neighbor_ttl
        self.buffer_pkts = buffer_pkts
        self.neighbors: dict[int, NeighborEntry] = {}
        self.routes: dict[int, RouteEntry] = {}
        self.cache = RreqCache()
        self.pending: deque = deque()
        self.discovery: Optional[Discovery] = None
        self.cooldown_until = 0.0
        self.fail_streak = 0
        self.next_rreq_id = 0
        self.seq = 0

    def failure_cooldown(self) -> float:
        """Failed discoveries back off exponentially so floods cannot storm."""
        return DISCOVERY_COOLDOWN_S * (2 ** min(self.fail_streak,
                                                DISCOVERY_COOLDOWN_CAP))

    def update_neighbor(self, nid: int, pos: Position, energy: float,
                        now: float, speed: float = 0.0) -> None:
        self.neighbors[nid] = NeighborEntry(nid, pos, energy, now, speed)

    def touch_neighbor(self, nid: int, now: float) -> None:
        entry = self.neighbors.get(nid)
        if entry is not None:
            entry.last_heard = now

    def fresh_neighbor(self, nid: int, now: float) -> Optional[NeighborEntry]:
        entry = self.neighbors.get(nid)
        if entry is None:
            return None
        if now - entry.last_heard > self.neighbor_ttl:
            del self.neighbors[nid]
            return None
        return entry

    def usable_neighbor(self, nid: int, now: float, my_pos: Position,
                        range_m: float) -> Optional[NeighborEntry]:
        """Fresh entry whose worst-case drift still leaves it in range.

        A static neighbor stays usable from one old beacon; a mover is only
        trusted while last-heard distance plus age*speed fits the range.
        """
        entry = self.fresh_neighbor(nid, now)
        if entry is None:
            return None
        drift = (now - entry.last_heard) * entry.speed
        if entry.pos.distance_to(my_pos) + drift > range_m:
            return None
        return entry

    def drop_neighbor(self, nid: int) -> None:
        self.neighbors.pop(nid, None)

    def route_for(self, dest: int, now: float) -> Optional[RouteEntry]:
        route = self.routes.get(dest)
        if route is None:
            return None
        if now > route.expires_at:
            del self.routes[dest]
            return None
        return route

    def install_route(self, dest: int, next_hop: int, hop_count: int,
                      bottleneck: float, now: float, dest_seq: int = 0) -> RouteEntry:
        entry = RouteEntry(dest, next_hop, hop_count, bottleneck, dest_seq,
                           now + ROUTE_TTL_S)
        self.routes[dest] = entry
        return entry

    def refresh_route(self, entry: RouteEntry, now: float) -> None:
        """Active routes stay alive: every use pushes the expiry out."""
        entry.expires_at = now + ROUTE_TTL_S

    def invalidate_via(self, next_hop: int) -> list:
        """Drop every route through a broken hop; returns affected dests."""
        gone = [d for d, r in self.routes.items() if r.next_hop == next_hop]
        for d in gone:
            del self.routes[d]
        return gone
