"""Per-node simulation state: position, history, ledger, queue, roles, tables."""

from __future__ import annotations

from typing import Optional

from . import energy
from .clustering import ElectionParams
from .mac import Frame, MacParams, TxQueue
from .mobility import MepHistory, Position, WaypointState
from .routing import RoutingState

ROLE_NONE = "none"
ROLE_CH = "ch"
ROLE_MEMBER = "member"

PHASE_IDLE = "idle"
PHASE_BACKOFF = "backoff"
PHASE_AIRING = "airing"
PHASE_WAIT_ACK = "wait_ack"


class Node:
    """All state owned by one simulated device; the network mutates it."""

    def __init__(self, nid: int, pos: Position, ledger: energy.EnergyLedger,
                 mac_params: MacParams, neighbor_ttl: float,
                 buffer_pkts: int, mep_window: int, mep_interval: float,
                 sleep_after_s: float):
        self.id = nid
        self.pos = pos
        self.alive = True
        self.waypoint = WaypointState(destination=pos)
        self.mep = MepHistory(window=mep_window, nominal_dt=mep_interval)
        self.ledger = ledger
        self.sleep_after_s = sleep_after_s

        # MAC state machine
        self.queue = TxQueue(mac_params.queue_len)
        self.current: Optional[Frame] = None
        self.phase = PHASE_IDLE
        self.be = mac_params.min_be
        self.nb = 0
        self.retries = 0
        self.tx_token = 0            # staleness guard for backoff/ack events
        self.next_mac_seq = 0
        self.last_seq_from: dict = {}  # src -> last mac_seq (duplicate filter)
        self.slot_wake_pending = False

        # energy timeline (lazy idle/sleep split)
        self.energy_synced_at = 0.0
        self.activity_until = 0.0

        # routing
        self.routing = RoutingState(neighbor_ttl, buffer_pkts)

        # clustering: active plan view
        self.role = ROLE_NONE
        self.ch_id: Optional[int] = None
        self.slots: Optional[tuple] = None   # (cycle_start, cycle_len, offset, slot_len)
        self.relay_next: Optional[int] = None
        # clustering: state of the round currently forming
        self.rnd_token = -1
        self.rnd_suppressed = False
        self.rnd_role = ROLE_NONE
        self.rnd_ch: Optional[int] = None
        self.rnd_roi = 0.0
        self.rnd_heard: dict = {}            # sender -> (pos, energy, roi, dist)
        self.rnd_join_order: list = []
        self.rnd_slots: Optional[tuple] = None
        self.rnd_relay: Optional[int] = None

    # -- energy timeline -------------------------------------------------

    def has_pending_work(self) -> bool:
        """Anything queued, buffered or in flight keeps the radio on."""
        return (self.phase != PHASE_IDLE or len(self.queue) > 0
                or bool(self.routing.pending)
                or self.routing.discovery is not None)

    def sync_energy(self, now: float) -> None:
        """Split elapsed time into idle and sleep and charge the ledger.

        Pending work of the node's own (MAC activity, queued frames,
        buffered packets waiting for a route) counts as idle listening; a
        node falls asleep `sleep_after_s` after its last work and wakes on
        the next.
        """
        t0 = self.energy_synced_at
        if now <= t0:
            return
        if self.has_pending_work():
            energy.accrue_state(self.ledger, energy.IDLE, now - t0)
        else:
            awake_until = self.activity_until + self.sleep_after_s
            boundary = min(max(t0, awake_until), now)
            if boundary > t0:
                energy.accrue_state(self.ledger, energy.IDLE, boundary - t0)
            if now > boundary:
                energy.accrue_state(self.ledger, energy.SLEEP, now - boundary)
        self.energy_synced_at = now

    def note_activity(self, now: float) -> None:
        self.sync_energy(now)
        if now > self.activity_until:
            self.activity_until = now

    # -- MAC helpers -----------------------------------------------------

    def assign_mac_seq(self, frame: Frame) -> None:
        frame.mac_seq = self.next_mac_seq
        self.next_mac_seq += 1

    def in_slot(self, now: float, needed: float) -> bool:
        """True when a member may start a data transmission now."""
        if self.slots is None:
            return True
        cycle_start, cycle_len, offset, slot_len = self.slots
        if now < cycle_start - 1e-9:
            return False
        phase = (now - cycle_start) % cycle_len
        return (offset - 1e-9 <= phase
                and phase + needed <= offset + slot_len + 1e-9)

    def next_slot_start(self, now: float) -> float:
        """Start of the next slot, strictly after now (float-boundary safe)."""
        cycle_start, cycle_len, offset, _ = self.slots
        if now < cycle_start + offset:
            return cycle_start + offset
        k = max(int((now - cycle_start - offset) // cycle_len), 0) + 1
        t = cycle_start + offset + k * cycle_len
        while t <= now + 1e-9:
            k += 1
            t = cycle_start + offset + k * cycle_len
        return t

    def residual(self) -> float:
        return energy.remaining(self.ledger)
