"""Full network simulation: ties radio, MAC, mobility, energy, clustering and
routing together inside one deterministic event-driven run.

Data plane composition: a cluster member sends within its schedule slot to
its head, heads relay sink-ward along the head chain, and on-demand route
discovery takes over for unclustered nodes, for broken chains and for the
pure-routing ablation mode.  The sink (node 0) is a stationary collector at
the region center whose location every node knows a priori.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import clustering, energy, metrics, radio
from . import routing as routing_mod
from .engine import Simulator
from .mac import (BROADCAST, DATA_BYTES, Frame, FrameKind, MacParams, airtime,
                  backoff_delay, make_frame)
from .mobility import Position, should_beacon, step_waypoint
from .node import (Node, PHASE_AIRING, PHASE_BACKOFF, PHASE_IDLE,
                   PHASE_WAIT_ACK, ROLE_CH, ROLE_MEMBER, ROLE_NONE)
from .routing import MAX_RREQ_HOPS, RouteEntry, select_route
from .scenario import REGION_M, SINK_XY, Scenario
from .traffic import PacketRecord

SINK = 0

RREQ_TIMEOUT_S = 0.25
RREQ_FORWARD_JITTER_S = 0.025  # de-synchronize flood rebroadcasts
RREP_REPLY_JITTER_S = 0.03     # spread replies across the collection window
PENDING_HOLD_S = 20.0          # buffered packets expire instead of straggling
ADV_MARGIN_S = 0.2       # MAC drain slack after the election waiting window
JOIN_WINDOW_S = 0.3      # members join during this span
SCHED_MARGIN_S = 0.3     # schedules propagate, then the plan goes live
SAMPLE_PERIOD_S = 5.0
INITIAL_BEACON_SPREAD_S = 2.0
SLOT_GUARD_S = 1e-3
OVERHEAR_HEADER_BYTES = 16     # address filter aborts the rest of the frame
GREEDY_MARGIN_M = 5.0          # stay clear of range-edge links when forwarding


@dataclass(slots=True)
class Airing:
    frame: Frame
    sender: int
    pos: Position
    start: float
    end: float


class Network:
    """One simulation instance; build, call run(), inspect table/recorder."""

    def __init__(self, scenario: Scenario, positions: Optional[dict] = None,
                 trace=None):
        self.sc = scenario
        self.sim = Simulator(scenario.seed)
        self._trace_sink = trace
        if trace is not None:
            self.sim.trace = trace
        self.radio = radio.calibrated(
            pt_mw=scenario.radio_pt_mw, ht=scenario.radio_ht_m,
            hr=scenario.radio_hr_m, range_m=scenario.radio_range_m,
            cs_range_m=scenario.radio_cs_range_m)
        self.mac = MacParams(
            min_be=scenario.mac_min_be, max_be=scenario.mac_max_be,
            max_csma_backoffs=scenario.mac_max_csma_backoffs,
            max_retries=scenario.mac_max_retries,
            queue_len=scenario.mac_queue_len,
            phy_overhead_bits=scenario.mac_phy_overhead_bits)
        self.grid = clustering.grid_partition(REGION_M, scenario.radio_range_m)
        self.sink_pos = Position(*SINK_XY)
        self.recorder = metrics.MetricsRecorder()
        self.table: Optional[metrics.MetricsTable] = None
        self.airings: list[Airing] = []
        self.round_token = 0
        self.round_start = 0.0
        self._next_pkt_id = 0

        # one ACK exchange must fit the tail of a slot
        self.slot_need = (airtime(DATA_BYTES, self.mac) + self.mac.turnaround_s
                          + airtime(16, self.mac))
        max_backoff0 = ((1 << scenario.mac_min_be) - 1) * self.mac.unit_backoff_s
        self.slot_len = self.slot_need + max_backoff0 + SLOT_GUARD_S

        self.nodes: dict[int, Node] = {}
        self.nodes[SINK] = self._make_node(SINK, self.sink_pos)
        mob = self.sim.stream("mobility")
        for nid in range(1, scenario.nodes + 1):
            if positions is not None and nid in positions:
                pos = Position(*positions[nid])
            else:
                pos = Position(mob.uniform(0.0, REGION_M), mob.uniform(0.0, REGION_M))
            self.nodes[nid] = self._make_node(nid, pos)
        self._setup_events()

    # -- construction ------------------------------------------------------

    def _make_node(self, nid: int, pos: Position) -> Node:
        sc = self.sc
        ledger = energy.EnergyLedger(
            e0=sc.energy_e0_j, e_txn=sc.energy_e_txn_mj * 1e-3,
            e_rxn=sc.energy_e_rxn_mj * 1e-3, p_idle=sc.energy_p_idle_mw * 1e-3,
            p_sleep=sc.energy_p_sleep_uw * 1e-6)
        return Node(nid, pos, ledger, self.mac,
                    neighbor_ttl=sc.route_neighbor_ttl_s,
                    buffer_pkts=sc.route_buffer_pkts,
                    mep_window=sc.mep_window,
                    mep_interval=sc.mep_check_interval_s,
                    sleep_after_s=sc.energy_sleep_after_ms * 1e-3)

    def _setup_events(self) -> None:
        sc = self.sc
        beacon_rng = self.sim.stream("beacon")
        for nid in self.sensor_ids():
            t0 = beacon_rng.uniform(0.0, INITIAL_BEACON_SPREAD_S)
            self.sim.schedule(t0, "beacon0", self._ev_initial_beacon, node=nid)
            self.sim.schedule(sc.mep_check_interval_s, "mep",
                              self._ev_mep_check, node=nid)
        if sc.traffic_load_kbps > 0 and sc.nodes > 0:
            per_source_bps = sc.traffic_load_kbps * 1000.0 / sc.nodes
            interval = DATA_BYTES * 8 / per_source_bps
            traf = self.sim.stream("traffic")
            for nid in self.sensor_ids():
                first = sc.traffic_start_s + traf.uniform(0.0, interval)
                if first < sc.traffic_stop_s:
                    self.sim.schedule(first, "cbr", self._ev_cbr, node=nid,
                                      payload=interval)
        if sc.mode != "aodv_only":
            self.sim.schedule(0.0, "election", self._ev_election_round)
        t = SAMPLE_PERIOD_S
        while t <= sc.sim_time + 1e-9:
            self.sim.schedule(t, "sample", self._ev_sample)
            t += SAMPLE_PERIOD_S

    # -- small helpers -------------------------------------------------------

    def sensor_ids(self):
        return range(1, self.sc.nodes + 1)

    def alive_sensors(self):
        return [self.nodes[nid] for nid in self.sensor_ids() if self.nodes[nid].alive]

    def trace(self, msg: str) -> None:
        if self._trace_sink is not None:
            self._trace_sink(f"t={self.sim.now:.9f} {msg}")

    def _can_receive(self, d: float) -> bool:
        return d <= 1e-9 or radio.can_receive(self.radio, d)

    def _tx_distance(self, node: Node, frame: Frame) -> float:
        if frame.is_broadcast():
            return self.sc.radio_range_m
        target = self.nodes.get(frame.dst)
        if target is None:
            return self.sc.radio_range_m
        return max(node.pos.distance_to(target.pos), 0.1)

    def _post_charge(self, node: Node) -> None:
        if energy.check_death(node.ledger):
            node.alive = False
            node.sync_energy(self.sim.now)
            self.trace(f"death node={node.id}")
            pkts = [f.payload["pkt"] for f in node.queue.drain()
                    if f.kind is FrameKind.DATA]
            if node.current is not None and node.current.kind is FrameKind.DATA:
                pkts.append(node.current.payload["pkt"])
            node.current = None
            node.phase = PHASE_IDLE
            for pkt in pkts:
                self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_DEAD)
            while node.routing.pending:
                pkt = node.routing.pending.popleft()
                self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_DEAD)

    # -- beaconing and mobility ----------------------------------------------

    def _emit_beacon(self, node: Node) -> None:
        frame = make_frame(FrameKind.BEACON, node.id, BROADCAST, self.sim.now,
                           {"pos": node.pos, "energy": node.residual(),
                            "speed": node.waypoint.speed})
        self.recorder.beacons_sent += 1
        self._offer(node, frame)

    def _ev_initial_beacon(self, ev) -> None:
        node = self.nodes[ev.node]
        if not node.alive:
            return
        node.mep.last_beacon_pos = node.pos
        self._emit_beacon(node)
        if self.sc.beaconing_mode == "periodic":
            self.sim.schedule_in(self.sc.beaconing_period_s, "pbeacon",
                                 self._ev_periodic_beacon, node=node.id)

    def _ev_periodic_beacon(self, ev) -> None:
        node = self.nodes[ev.node]
        if not node.alive:
            return
        self._emit_beacon(node)
        self.sim.schedule_in(self.sc.beaconing_period_s, "pbeacon",
                             self._ev_periodic_beacon, node=node.id)

    def _ev_mep_check(self, ev) -> None:
        node = self.nodes[ev.node]
        if not node.alive:
            return
        sc = self.sc
        node.pos = step_waypoint(node.pos, node.waypoint, sc.mep_check_interval_s,
                                 self.sim.stream("mobility"), REGION_M,
                                 sc.mobility_v_min, sc.mobility_v_max)
        node.mep.record(node.pos.x, node.pos.y, self.sim.now)
        if sc.beaconing_mode == "adaptive" and should_beacon(
                node.mep, node.pos, sc.mep_threshold_m):
            self._emit_beacon(node)
        self.sim.schedule_in(sc.mep_check_interval_s, "mep",
                             self._ev_mep_check, node=node.id)

    # -- traffic ---------------------------------------------------------------

    def _ev_cbr(self, ev) -> None:
        node = self.nodes[ev.node]
        interval = ev.payload
        if node.alive:
            pkt_id = self._next_pkt_id
            self._next_pkt_id += 1
            self.recorder.on_generated(PacketRecord(pkt_id, node.id, self.sim.now))
            pkt = {"pkt_id": pkt_id, "origin": node.id, "path": [node.id],
                   "repaired": False}
            self.trace(f"gen pkt={pkt_id} src={node.id}")
            self._dispatch_data(node, pkt)
        nxt = self.sim.now + interval
        if nxt < self.sc.traffic_stop_s:
            self.sim.schedule(nxt, "cbr", self._ev_cbr, node=ev.node,
                              payload=interval)

    def _ev_sample(self, ev) -> None:
        now = self.sim.now
        kbps = self.recorder.delivered_bits / now / 1000.0 if now > 0 else 0.0
        self.recorder.samples.append((now, kbps))

    # -- data plane --------------------------------------------------------------

    def _dispatch_data(self, node: Node, pkt: dict) -> None:
        """Pick the packet's next hop according to role, mode and routes."""
        if not node.alive:
            self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_DEAD)
            return
        now = self.sim.now
        path = pkt["path"]
        mode = self.sc.mode
        if mode != "aodv_only":
            if (node.role == ROLE_MEMBER and node.ch_id is not None
                    and node.slots is not None and node.ch_id not in path):
                self._offer_data(node, node.ch_id, pkt)
                return
            if node.role == ROLE_CH:
                up = self._ch_upward(node, exclude=path)
                if up is not None:
                    self._offer_data(node, up, pkt)
                    return
                if mode == "cluster_only":
                    self._buffer_pending(node, pkt)
                    return
            elif mode == "cluster_only":
                self._buffer_pending(node, pkt)
                return
        route = node.routing.route_for(SINK, now)
        if route is not None and route.next_hop in path:
            route = None
        if route is not None and route.next_hop != SINK:
            if node.routing.usable_neighbor(route.next_hop, now, node.pos,
                                            self.sc.radio_range_m) is None:
                node.routing.invalidate_via(route.next_hop)
                route = None
        if route is not None:
            node.routing.refresh_route(route, now)
            self._offer_data(node, route.next_hop, pkt)
            return
        if mode == "hybrid":
            # cross-layer shortcut: the fresh neighbor list carries positions,
            # so forward to a usable neighbor strictly closer to the sink and
            # fall back to discovery only at a void
            nh = self._greedy_next_hop(node, path)
            if nh is not None:
                self._offer_data(node, nh, pkt)
                return
        self._buffer_pending(node, pkt)
        if node.routing.discovery is None and now >= node.routing.cooldown_until:
            self._start_discovery(node)

    def _offer_data(self, node: Node, dst: int, pkt: dict) -> None:
        frame = make_frame(FrameKind.DATA, node.id, dst, self.sim.now,
                           {"pkt": pkt})
        if not self._offer(node, frame):
            self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_QUEUE)

    def _buffer_pending(self, node: Node, pkt: dict) -> None:
        node.sync_energy(self.sim.now)
        rs = node.routing
        if len(rs.pending) >= rs.buffer_pkts:
            self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_BUFFER)
            self.trace(f"drop_buffer pkt={pkt['pkt_id']} node={node.id}")
            return
        pkt["buffered_at"] = self.sim.now
        rs.pending.append(pkt)

    def _drain_pending(self, node: Node) -> None:
        if not node.routing.pending:
            return
        node.sync_energy(self.sim.now)
        now = self.sim.now
        pkts = list(node.routing.pending)
        node.routing.pending.clear()
        for pkt in pkts:
            if now - pkt.get("buffered_at", now) > PENDING_HOLD_S:
                self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_BUFFER)
                self.trace(f"drop_buffer pkt={pkt['pkt_id']} node={node.id}")
            else:
                self._dispatch_data(node, pkt)
        if self.sim.now > node.activity_until:
            node.activity_until = self.sim.now

    def _greedy_next_hop(self, node: Node, exclude) -> Optional[int]:
        """Usable neighbor strictly closer to the sink; the sink when in range."""
        now = self.sim.now
        if node.pos.distance_to(self.sink_pos) <= self.sc.radio_range_m:
            return SINK
        my_d = node.pos.distance_to(self.sink_pos)
        reach = self.sc.radio_range_m - GREEDY_MARGIN_M
        best = None
        for nid in sorted(node.routing.neighbors):
            if nid in exclude or nid == node.id:
                continue
            entry = node.routing.usable_neighbor(nid, now, node.pos, reach)
            if entry is None:
                continue
            d = entry.pos.distance_to(self.sink_pos)
            if d < my_d - 0.1 and (best is None or d < best[0]):
                best = (d, nid)
        return best[1] if best is not None else None

    def _ch_upward(self, node: Node, exclude) -> Optional[int]:
        """Next hop for a head: the sink when in range, else a relay head."""
        now = self.sim.now
        if node.pos.distance_to(self.sink_pos) <= self.sc.radio_range_m:
            return SINK
        r = node.relay_next
        if (r is not None and r != SINK and r not in exclude
                and self.nodes[r].alive and self.nodes[r].role == ROLE_CH
                and node.routing.usable_neighbor(r, now, node.pos,
                                                 self.sc.radio_range_m) is not None):
            return r
        node.relay_next = self._pick_relay(node, exclude)
        return node.relay_next

    def _pick_relay(self, node: Node, exclude=()) -> Optional[int]:
        """Relay head choice over heads this node heard announce themselves.

        Positions come from the live neighbor table (refreshed by any frame
        carrying one), so a head that went silent or walked away since its
        announcement is not considered.
        """
        now = self.sim.now
        my_d = node.pos.distance_to(self.sink_pos)
        cands = []
        anchors = {node.id: node.pos}
        for s in sorted(node.rnd_heard):
            other = self.nodes[s]
            if not other.alive or other.role != ROLE_CH:
                continue
            entry = node.routing.usable_neighbor(s, now, node.pos,
                                                 self.sc.radio_range_m)
            if entry is None:
                continue
            anchors[s] = entry.pos
            if s not in exclude and entry.pos.distance_to(self.sink_pos) < my_d:
                cands.append((s, entry.pos))
        if not cands:
            return None
        neighbors_of = {s: [p for t, p in anchors.items() if t != s]
                        for s, _ in cands}
        return clustering.select_relay_ch(cands, neighbors_of)

    def _receive_data(self, node: Node, frame: Frame) -> None:
        pkt = frame.payload["pkt"]
        if node.id == SINK:
            if self.recorder.on_delivered(pkt["pkt_id"], self.sim.now,
                                          hops=len(pkt["path"])):
                self.trace(f"deliver pkt={pkt['pkt_id']} hops={len(pkt['path'])}")
            return
        pkt["path"].append(node.id)
        self._dispatch_data(node, pkt)

    # -- MAC state machine -----------------------------------------------------

    def _offer(self, node: Node, frame: Frame) -> bool:
        if not node.alive:
            return False
        node.sync_energy(self.sim.now)
        node.assign_mac_seq(frame)
        if not node.queue.offer(frame):
            self.trace(f"drop_queue node={node.id} kind={frame.kind.value}")
            return False
        self.recorder.queue_high_water = max(self.recorder.queue_high_water,
                                             len(node.queue))
        self._service(node)
        return True

    def _offer_delayed(self, node: Node, frame: Frame, jitter_max: float) -> None:
        delay = self.sim.uniform("ctrl_jitter", 0.0, jitter_max)
        self.sim.schedule_in(delay, "jitter", self._ev_jittered_offer,
                             node=node.id, payload=frame)

    def _ev_jittered_offer(self, ev) -> None:
        node = self.nodes[ev.node]
        if node.alive:
            self._offer(node, ev.payload)

    def _data_gate_open(self, node: Node) -> bool:
        if node.role != ROLE_MEMBER or node.slots is None:
            return True
        return node.in_slot(self.sim.now, self.slot_need)

    def _service(self, node: Node) -> None:
        if not node.alive or node.phase != PHASE_IDLE or node.current is not None:
            return
        data_ok = self._data_gate_open(node)
        frame = node.queue.pop_ready(data_ok)
        if frame is None:
            if node.queue.has_data() and not data_ok and node.slots is not None:
                self._ensure_slot_wake(node)
            return
        node.sync_energy(self.sim.now)
        node.current = frame
        node.phase = PHASE_BACKOFF
        node.retries = 0
        node.nb = 0
        node.be = self.mac.min_be
        if self.sim.now > node.activity_until:
            node.activity_until = self.sim.now
        self._begin_backoff(node)

    def _ensure_slot_wake(self, node: Node) -> None:
        if node.slot_wake_pending:
            return
        node.slot_wake_pending = True
        # land a hair inside the slot so the gate is surely open at the wake
        self.sim.schedule(node.next_slot_start(self.sim.now) + 1e-6, "slotwake",
                          self._ev_slot_wake, node=node.id)

    def _ev_slot_wake(self, ev) -> None:
        node = self.nodes[ev.node]
        node.slot_wake_pending = False
        self._service(node)

    def _begin_backoff(self, node: Node) -> None:
        delay = backoff_delay(node.be, self.sim.stream("backoff"),
                              self.mac.unit_backoff_s)
        node.tx_token += 1
        self.sim.schedule_in(delay, "backoff", self._ev_backoff, node=node.id,
                             payload=node.tx_token)

    def _cca_busy(self, node: Node) -> bool:
        now = self.sim.now
        for g in self.airings:
            if g.start <= now < g.end:
                if g.sender == node.id:
                    return True
                d = node.pos.distance_to(g.pos)
                if d <= 1e-9 or radio.received_power(self.radio, d) >= self.radio.cs_thresh:
                    return True
        return False

    def _ev_backoff(self, ev) -> None:
        node = self.nodes[ev.node]
        if (ev.payload != node.tx_token or node.phase != PHASE_BACKOFF
                or not node.alive):
            return
        if self._cca_busy(node):
            self.trace(f"cca_busy node={node.id} nb={node.nb}")
            node.nb += 1
            node.be = min(node.be + 1, self.mac.max_be)
            if node.nb > self.mac.max_csma_backoffs:
                self._frame_failed(node, "csma")
            else:
                self._begin_backoff(node)
            return
        self._start_airing(node)

    def _prune_airings(self) -> None:
        cutoff = self.sim.now - 0.05
        if self.airings and self.airings[0].end <= cutoff:
            self.airings = [g for g in self.airings if g.end > cutoff]

    def _launch_airing(self, node: Node, frame: Frame) -> Airing:
        dur = airtime(frame.size, self.mac)
        airing = Airing(frame, node.id, node.pos, self.sim.now, self.sim.now + dur)
        self._prune_airings()
        self.airings.append(airing)
        weight = frame.size / DATA_BYTES
        energy.charge_packet(node.ledger, energy.TX,
                             self._tx_distance(node, frame), weight)
        self._post_charge(node)
        self.trace(f"tx_start node={node.id} kind={frame.kind.value} "
                   f"dst={frame.dst} seq={frame.mac_seq}")
        self.sim.schedule(airing.end, "txend", self._ev_txend, node=node.id,
                          payload=airing)
        for other_id in sorted(self.nodes):
            other = self.nodes[other_id]
            if other_id == node.id or not other.alive:
                continue
            d = airing.pos.distance_to(other.pos)
            if self._can_receive(d):
                self.sim.schedule(airing.end, "rxend", self._ev_rxend,
                                  node=other_id, payload=(airing, other.pos))
        return airing

    def _start_airing(self, node: Node) -> None:
        node.phase = PHASE_AIRING
        self._launch_airing(node, node.current)

    def _ev_txend(self, ev) -> None:
        airing: Airing = ev.payload
        node = self.nodes[airing.sender]
        if node.current is not airing.frame or node.phase != PHASE_AIRING:
            return
        if airing.frame.wants_ack() and node.alive:
            node.phase = PHASE_WAIT_ACK
            node.tx_token += 1
            self.sim.schedule_in(self.mac.ack_timeout_s, "acktmo",
                                 self._ev_ack_timeout, node=node.id,
                                 payload=node.tx_token)
        else:
            self._frame_done(node)

    def _ev_ack_timeout(self, ev) -> None:
        node = self.nodes[ev.node]
        if (ev.payload != node.tx_token or node.phase != PHASE_WAIT_ACK
                or not node.alive):
            return
        node.retries += 1
        if node.retries > self.mac.max_retries:
            self._frame_failed(node, "retry")
        else:
            node.phase = PHASE_BACKOFF
            node.nb = 0
            node.be = self.mac.min_be
            self._begin_backoff(node)

    def _frame_done(self, node: Node) -> None:
        frame = node.current
        node.sync_energy(self.sim.now)
        node.phase = PHASE_IDLE
        node.current = None
        node.activity_until = self.sim.now
        node.tx_token += 1
        self.trace(f"sent node={node.id} kind={frame.kind.value} seq={frame.mac_seq}")
        self._service(node)

    def _frame_failed(self, node: Node, reason: str) -> None:
        frame = node.current
        node.sync_energy(self.sim.now)
        node.phase = PHASE_IDLE
        node.current = None
        node.activity_until = self.sim.now
        node.tx_token += 1
        self.trace(f"mac_fail node={node.id} kind={frame.kind.value} "
                   f"reason={reason} seq={frame.mac_seq}")
        if frame.kind is FrameKind.DATA:
            pkt = frame.payload["pkt"]
            if reason == "csma":
                self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_CSMA)
            else:
                self._repair_after_break(node, frame.dst, pkt)
        elif frame.kind is FrameKind.JOIN:
            if node.rnd_token == self.round_token and node.rnd_role == ROLE_MEMBER:
                node.rnd_role = ROLE_NONE
                node.rnd_ch = None
        self._service(node)

    def _fork_for_repair(self, node: Node, pkt: dict) -> dict:
        """Fresh copy for re-dispatch; the old copy may live on downstream.

        When retries die on a lost ACK the data may in fact have advanced, so
        the repairing node re-sends an independent copy whose path restarts
        from its own position (first delivery or drop still settles the fate).
        """
        path = pkt["path"]
        cut = path.index(node.id) + 1 if node.id in path else len(path)
        return {"pkt_id": pkt["pkt_id"], "origin": pkt["origin"],
                "path": path[:cut], "repaired": True}

    def _repair_after_break(self, node: Node, dead_hop: int, pkt: dict) -> None:
        self._link_break(node, dead_hop)
        stranded = [f.payload["pkt"] for f in node.queue.remove_data_to(dead_hop)]
        if pkt.get("repaired"):
            self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_RETRY)
        else:
            self._dispatch_data(node, self._fork_for_repair(node, pkt))
        for other in stranded:
            if other.get("repaired"):
                self.recorder.assign_fate(other["pkt_id"], metrics.DROP_RETRY)
            else:
                self._dispatch_data(node, self._fork_for_repair(node, other))

    def _link_break(self, node: Node, nbr: int) -> None:
        self.trace(f"link_break node={node.id} nbr={nbr}")
        node.routing.drop_neighbor(nbr)
        node.routing.invalidate_via(nbr)
        if node.relay_next == nbr:
            node.relay_next = None
        if node.ch_id == nbr:
            node.role = ROLE_NONE
            node.ch_id = None
            node.slots = None

    # -- reception ---------------------------------------------------------------

    def _collided(self, airing: Airing, receiver_id: int, rx_pos: Position) -> bool:
        for g in self.airings:
            if g is airing:
                continue
            if g.end <= airing.start or g.start >= airing.end:
                continue
            if g.sender == receiver_id:
                return True
            d = rx_pos.distance_to(g.pos)
            if d <= 1e-9 or radio.received_power(self.radio, d) >= self.radio.cs_thresh:
                return True
        return False

    def _ev_rxend(self, ev) -> None:
        airing, rx_pos = ev.payload
        node = self.nodes[ev.node]
        if not node.alive:
            return
        if self._collided(airing, node.id, rx_pos):
            self.trace(f"rx_collision node={node.id} kind={airing.frame.kind.value}")
            return
        # reception charges the ledger but does not reset the sleep timer:
        # only pending transmit work of the node's own keeps it awake.
        # Overheard unicasts cost a header decode only (address filtering).
        frame = airing.frame
        if frame.is_broadcast() or frame.dst == node.id:
            rx_bytes = frame.size
        else:
            rx_bytes = min(frame.size, OVERHEAR_HEADER_BYTES)
        energy.charge_packet(node.ledger, energy.RX,
                             weight=rx_bytes / DATA_BYTES)
        self._post_charge(node)
        if not node.alive:
            return
        self._handle_frame(node, airing.frame)

    def _send_ack(self, node: Node, frame: Frame) -> None:
        ack = make_frame(FrameKind.ACK, node.id, frame.src, self.sim.now,
                         {"ack_seq": frame.mac_seq})
        node.assign_mac_seq(ack)
        self.sim.schedule_in(self.mac.turnaround_s, "ackair", self._ev_ack_air,
                             node=node.id, payload=ack)

    def _ev_ack_air(self, ev) -> None:
        node = self.nodes[ev.node]
        if node.alive:
            self._launch_airing(node, ev.payload)

    def _is_duplicate(self, node: Node, frame: Frame) -> bool:
        last = node.last_seq_from.get(frame.src)
        if last == frame.mac_seq:
            return True
        node.last_seq_from[frame.src] = frame.mac_seq
        return False

    def _handle_frame(self, node: Node, frame: Frame) -> None:
        pl = frame.payload
        if "pos" in pl:
            node.routing.update_neighbor(frame.src, pl["pos"],
                                         pl.get("energy", 0.0), self.sim.now,
                                         pl.get("speed", 0.0))
        else:
            node.routing.touch_neighbor(frame.src, self.sim.now)
        if frame.src == SINK and node.id != SINK:
            # hearing the collector transmit proves a one-hop path to it
            node.routing.install_route(SINK, SINK, 1, float("inf"), self.sim.now)
        kind = frame.kind
        if kind is FrameKind.ACK:
            if (frame.dst == node.id and node.phase == PHASE_WAIT_ACK
                    and node.current is not None
                    and node.current.mac_seq == pl.get("ack_seq")
                    and node.current.dst == frame.src):
                self._frame_done(node)
        elif kind is FrameKind.DATA:
            if frame.dst == node.id:
                self._send_ack(node, frame)
                if not self._is_duplicate(node, frame):
                    self._receive_data(node, frame)
        elif kind is FrameKind.BEACON:
            pass  # neighbor refresh above is the whole effect
        elif kind is FrameKind.RREQ:
            self._on_rreq(node, frame)
        elif kind is FrameKind.RREP:
            if frame.dst == node.id:
                self._send_ack(node, frame)
                if not self._is_duplicate(node, frame):
                    self._on_rrep(node, frame)
            elif (node.id != SINK and node.routing.route_for(
                    pl["dest"], self.sim.now) is None):
                # overheard reply: cache the route through its transmitter
                node.routing.install_route(pl["dest"], frame.src,
                                           pl["hops"] + 1, pl["bottleneck"],
                                           self.sim.now)
        elif kind is FrameKind.ADV_CH:
            self._on_adv(node, frame)
        elif kind is FrameKind.JOIN:
            if frame.dst == node.id:
                self._send_ack(node, frame)
                if not self._is_duplicate(node, frame):
                    self._on_join(node, frame)
        elif kind is FrameKind.SCHEDULE:
            self._on_schedule(node, frame)

    # -- route discovery -----------------------------------------------------------

    def _start_discovery(self, node: Node) -> None:
        rs = node.routing
        if rs.discovery is None:
            from .routing import Discovery
            rs.discovery = Discovery(dest=SINK)
        d = rs.discovery
        d.token += 1
        d.window_open = False
        d.candidates = []
        rid = rs.next_rreq_id
        rs.next_rreq_id += 1
        rs.cache.check_and_add(node.id, rid)
        ring = routing_mod.RING_HOPS[min(d.attempt, len(routing_mod.RING_HOPS) - 1)]
        frame = make_frame(FrameKind.RREQ, node.id, BROADCAST, self.sim.now, {
            "origin": node.id, "rid": rid, "dest": SINK, "hops": 0,
            "ttl": ring, "bottleneck": node.residual(), "pos": node.pos,
            "energy": node.residual(), "speed": node.waypoint.speed})
        self.recorder.rreq_sent += 1
        self._offer(node, frame)
        timeout = RREQ_TIMEOUT_S * (2 ** d.attempt)
        self.sim.schedule_in(timeout, "rreqtmo", self._ev_rreq_timeout,
                             node=node.id, payload=d.token)

    def _ev_rreq_timeout(self, ev) -> None:
        node = self.nodes[ev.node]
        d = node.routing.discovery
        if d is None or ev.payload != d.token or d.window_open or not node.alive:
            return
        d.attempt += 1
        node.sync_energy(self.sim.now)
        if d.attempt > self.sc.route_rreq_retries:
            node.routing.discovery = None
            node.routing.cooldown_until = (self.sim.now
                                           + node.routing.failure_cooldown())
            node.routing.fail_streak += 1
            while node.routing.pending:
                pkt = node.routing.pending.popleft()
                self.recorder.assign_fate(pkt["pkt_id"], metrics.DROP_BUFFER)
                self.trace(f"drop_buffer pkt={pkt['pkt_id']} node={node.id}")
            if self.sim.now > node.activity_until:
                node.activity_until = self.sim.now
        else:
            self._start_discovery(node)

    def _on_rreq(self, node: Node, frame: Frame) -> None:
        pl = frame.payload
        if pl["origin"] == node.id:
            return
        if not node.routing.cache.check_and_add(pl["origin"], pl["rid"]):
            return
        hops_here = pl["hops"] + 1
        node.routing.install_route(pl["origin"], frame.src, hops_here,
                                   pl["bottleneck"], self.sim.now)
        if node.id == pl["dest"]:
            self._send_rrep(node, frame.src, pl, hops=0,
                            bottleneck=node.residual())
            return
        route = node.routing.route_for(pl["dest"], self.sim.now)
        if route is not None and route.hop_count <= 2:
            # only near-destination holders shortcut the flood, and only
            # when their next hop is still credibly in range
            if route.next_hop == SINK:
                nh_ok = (node.pos.distance_to(self.sink_pos)
                         <= self.sc.radio_range_m)
            else:
                nh_ok = node.routing.usable_neighbor(
                    route.next_hop, self.sim.now, node.pos,
                    self.sc.radio_range_m) is not None
            if nh_ok:
                self._send_rrep(node, frame.src, pl, hops=route.hop_count,
                                bottleneck=min(route.bottleneck_energy,
                                               node.residual()))
                return
        if hops_here < pl.get("ttl", MAX_RREQ_HOPS) and node.alive:
            fwd = make_frame(FrameKind.RREQ, node.id, BROADCAST, self.sim.now, {
                "origin": pl["origin"], "rid": pl["rid"], "dest": pl["dest"],
                "hops": hops_here, "ttl": pl.get("ttl", MAX_RREQ_HOPS),
                "bottleneck": min(pl["bottleneck"], node.residual()),
                "pos": node.pos, "energy": node.residual(),
                "speed": node.waypoint.speed})
            self.recorder.rreq_sent += 1
            self._offer_delayed(node, fwd, RREQ_FORWARD_JITTER_S)

    def _send_rrep(self, node: Node, back_to: int, rreq_pl: dict, hops: int,
                   bottleneck: float) -> None:
        node.routing.seq += 1
        frame = make_frame(FrameKind.RREP, node.id, back_to, self.sim.now, {
            "origin": rreq_pl["origin"], "dest": rreq_pl["dest"],
            "rid": rreq_pl["rid"], "hops": hops, "bottleneck": bottleneck,
            "seq": node.routing.seq, "pos": node.pos,
            "energy": node.residual(), "speed": node.waypoint.speed})
        self._offer_delayed(node, frame, RREP_REPLY_JITTER_S)

    def _on_rrep(self, node: Node, frame: Frame) -> None:
        pl = frame.payload
        hops_here = pl["hops"] + 1
        node.routing.install_route(pl["dest"], frame.src, hops_here,
                                   pl["bottleneck"], self.sim.now,
                                   dest_seq=pl.get("seq", 0))
        if node.id == pl["origin"]:
            d = node.routing.discovery
            if d is None:
                return
            candidate = RouteEntry(pl["dest"], frame.src, hops_here,
                                   pl["bottleneck"], pl.get("seq", 0),
                                   self.sim.now + 10.0)
            d.candidates.append(candidate)
            if not d.window_open:
                d.window_open = True
                d.token += 1
                self.sim.schedule_in(self.sc.route_rrep_window_ms * 1e-3,
                                     "rrepwin", self._ev_rrep_window,
                                     node=node.id, payload=d.token)
            return
        back = node.routing.route_for(pl["origin"], self.sim.now)
        if back is None:
            return
        node.routing.refresh_route(back, self.sim.now)
        fwd = make_frame(FrameKind.RREP, node.id, back.next_hop, self.sim.now, {
            "origin": pl["origin"], "dest": pl["dest"], "rid": pl["rid"],
            "hops": hops_here,
            "bottleneck": min(pl["bottleneck"], node.residual()),
            "seq": pl.get("seq", 0), "pos": node.pos,
            "energy": node.residual(), "speed": node.waypoint.speed})
        self._offer(node, fwd)

    def _ev_rrep_window(self, ev) -> None:
        node = self.nodes[ev.node]
        d = node.routing.discovery
        if d is None or ev.payload != d.token or not node.alive:
            return
        node.sync_energy(self.sim.now)
        best = select_route(d.candidates)
        node.routing.routes[best.dest] = best
        node.routing.discovery = None
        node.routing.fail_streak = 0
        self.trace(f"route node={node.id} dest={best.dest} via={best.next_hop} "
                   f"hops={best.hop_count}")
        self._drain_pending(node)

    # -- clustering rounds ------------------------------------------------------------

    def _ev_election_round(self, ev) -> None:
        sc = self.sc
        now = self.sim.now
        self.recorder.ch_rounds += 1
        self.round_token += 1
        self.round_start = now
        alive = self.alive_sensors()
        if alive:
            dists = {n.id: n.pos.distance_to(self.sink_pos) for n in alive}
            d_max, d_min = max(dists.values()), min(dists.values())
            e_max = sc.energy_e0_j
            election_rng = self.sim.stream("election")
            for n in alive:
                n.rnd_token = self.round_token
                n.rnd_suppressed = False
                n.rnd_role = ROLE_NONE
                n.rnd_ch = None
                n.rnd_heard = {}
                n.rnd_join_order = []
                n.rnd_slots = None
                n.rnd_relay = None
                v_r = (sc.cluster_pin_vr if sc.cluster_pin_vr is not None
                       else election_rng.uniform(sc.cluster_vr_lo, sc.cluster_vr_hi))
                wait = clustering.waiting_time(min(n.residual(), e_max), e_max,
                                               sc.cluster_t2_s, v_r)
                n.rnd_roi = clustering.overlying_radius(
                    dists[n.id], d_max, d_min, sc.cluster_alpha, sc.cluster_r_max_m)
                self.sim.schedule_in(wait, "etimer", self._ev_election_timer,
                                     node=n.id, payload=self.round_token)
            t_adv = now + sc.cluster_t2_s + ADV_MARGIN_S
            self.sim.schedule(t_adv, "advdl", self._ev_adv_deadline,
                              payload=self.round_token)
            self.sim.schedule(t_adv + JOIN_WINDOW_S, "joindl",
                              self._ev_join_deadline, payload=self.round_token)
            self.sim.schedule(t_adv + JOIN_WINDOW_S + SCHED_MARGIN_S, "plan",
                              self._ev_plan_swap, payload=self.round_token)
        nxt = now + sc.cluster_t1_s
        if nxt < sc.sim_time:
            self.sim.schedule(nxt, "election", self._ev_election_round)

    def _ev_election_timer(self, ev) -> None:
        node = self.nodes[ev.node]
        if (ev.payload != node.rnd_token or not node.alive
                or node.rnd_suppressed or node.rnd_role != ROLE_NONE):
            return
        node.rnd_role = ROLE_CH
        frame = make_frame(FrameKind.ADV_CH, node.id, BROADCAST, self.sim.now, {
            "pos": node.pos, "energy": node.residual(), "roi": node.rnd_roi,
            "round": node.rnd_token, "speed": node.waypoint.speed})
        self._offer(node, frame)

    def _on_adv(self, node: Node, frame: Frame) -> None:
        pl = frame.payload
        if node.id == SINK or pl["round"] != node.rnd_token:
            return
        dist = node.pos.distance_to(pl["pos"])
        node.rnd_heard[frame.src] = (pl["pos"], pl["energy"], pl["roi"], dist)
        if node.rnd_role == ROLE_NONE and dist <= pl["roi"]:
            node.rnd_suppressed = True

    def _ev_adv_deadline(self, ev) -> None:
        if ev.payload != self.round_token:
            return
        alive = self.alive_sensors()
        # heads sharing a grid cell yield to the best-heard co-cell head
        for n in alive:
            if n.rnd_role != ROLE_CH:
                continue
            my_cell = self.grid.cell_index(n.pos)
            best = None
            for s in sorted(n.rnd_heard):
                pos, en, _, _ = n.rnd_heard[s]
                if self.grid.cell_index(pos) != my_cell:
                    continue
                if (en > n.residual() or (en == n.residual() and s < n.id)):
                    if best is None or (en, -s) > (best[1], -best[0]):
                        best = (s, en)
            if best is not None:
                n.rnd_role = ROLE_MEMBER
                n.rnd_ch = best[0]
        # everyone else picks a head: own-cell heads first, then nearest heard
        for n in alive:
            if n.rnd_role == ROLE_CH:
                continue
            target = n.rnd_ch
            if target is not None and self.nodes[target].rnd_role != ROLE_CH:
                target = None
            if target is None:
                my_cell = self.grid.cell_index(n.pos)
                in_cell, anywhere = [], []
                for s in sorted(n.rnd_heard):
                    pos, _, _, dist = n.rnd_heard[s]
                    if self.nodes[s].rnd_role != ROLE_CH or not self.nodes[s].alive:
                        continue
                    entry = (dist, s)
                    anywhere.append(entry)
                    if self.grid.cell_index(pos) == my_cell:
                        in_cell.append(entry)
                pool = in_cell or anywhere
                if pool:
                    target = min(pool)[1]
            if target is None:
                n.rnd_role = ROLE_NONE
                continue
            n.rnd_role = ROLE_MEMBER
            n.rnd_ch = target
            join = make_frame(FrameKind.JOIN, n.id, target, self.sim.now, {
                "pos": n.pos, "energy": n.residual(), "round": self.round_token,
                "speed": n.waypoint.speed})
            self._offer(n, join)

    def _on_join(self, node: Node, frame: Frame) -> None:
        pl = frame.payload
        if pl["round"] != node.rnd_token or node.rnd_role != ROLE_CH:
            return
        if frame.src not in node.rnd_join_order:
            node.rnd_join_order.append(frame.src)

    def _ev_join_deadline(self, ev) -> None:
        if ev.payload != self.round_token:
            return
        plan_time = (self.round_start + self.sc.cluster_t2_s + ADV_MARGIN_S
                     + JOIN_WINDOW_S + SCHED_MARGIN_S)
        for n in self.alive_sensors():
            if n.rnd_role != ROLE_CH or not n.rnd_join_order:
                continue
            cycle_len = len(n.rnd_join_order) * self.slot_len
            slots = tuple((m, i * self.slot_len)
                          for i, m in enumerate(n.rnd_join_order))
            frame = make_frame(FrameKind.SCHEDULE, n.id, BROADCAST, self.sim.now, {
                "round": self.round_token, "cycle_start": plan_time,
                "cycle_len": cycle_len, "slot_len": self.slot_len,
                "slots": slots, "pos": n.pos, "energy": n.residual(),
                "speed": n.waypoint.speed})
            self._offer(n, frame)

    def _on_schedule(self, node: Node, frame: Frame) -> None:
        pl = frame.payload
        if pl["round"] != node.rnd_token or node.rnd_ch != frame.src:
            return
        for member, offset in pl["slots"]:
            if member == node.id:
                node.rnd_slots = (pl["cycle_start"], pl["cycle_len"], offset,
                                  pl["slot_len"])
                return

    def _ev_plan_swap(self, ev) -> None:
        if ev.payload != self.round_token:
            return
        for n in self.alive_sensors():
            if n.rnd_role == ROLE_CH:
                n.role = ROLE_CH
                n.ch_id = None
                n.slots = None
            elif n.rnd_role == ROLE_MEMBER and n.rnd_slots is not None:
                n.role = ROLE_MEMBER
                n.ch_id = n.rnd_ch
                n.slots = n.rnd_slots
            else:
                if n.rnd_role == ROLE_MEMBER or n.rnd_role == ROLE_NONE:
                    self.recorder.unclustered += 1
                n.role = ROLE_NONE
                n.ch_id = None
                n.slots = None
            n.relay_next = None
        for n in self.alive_sensors():
            if n.role == ROLE_CH:
                n.relay_next = self._pick_relay(n)
                n.queue.retarget_data(self._ch_upward(n, exclude=()) or SINK)
            elif n.role == ROLE_MEMBER:
                n.queue.retarget_data(n.ch_id)
        for n in self.alive_sensors():
            self._drain_pending(n)
            self._service(n)

    # -- finish -----------------------------------------------------------------

    def run(self) -> metrics.MetricsTable:
        self.sim.run_until(self.sc.sim_time)
        return self._finalize()

    def _finalize(self) -> metrics.MetricsTable:
        sc = self.sc
        for nid in self.sensor_ids():
            self.nodes[nid].sync_energy(sc.sim_time)
        self.nodes[SINK].sync_energy(sc.sim_time)
        self.recorder.flush_in_flight()
        ledgers = [self.nodes[nid].ledger for nid in self.sensor_ids()]
        total, mean_e, per_node = metrics.energy_report(ledgers)
        records = list(self.recorder.records.values())
        rec = self.recorder
        if sc.traffic_load_kbps > 0:
            offered = round(sc.traffic_load_kbps * 1000.0
                            * (sc.traffic_stop_s - sc.traffic_start_s))
        else:
            offered = 0
        self.table = metrics.MetricsTable(
            scenario=sc.label, seed=sc.seed, nodes=sc.nodes,
            offered_load_bits=offered, generated=len(records),
            delivered=rec.fate_count(metrics.DELIVERED),
            drop_queue=rec.fate_count(metrics.DROP_QUEUE),
            drop_csma=rec.fate_count(metrics.DROP_CSMA),
            drop_retry=rec.fate_count(metrics.DROP_RETRY),
            drop_buffer=rec.fate_count(metrics.DROP_BUFFER),
            drop_dead=rec.fate_count(metrics.DROP_DEAD),
            mean_delay_s=metrics.mean_delay(records),
            throughput_kbps=metrics.throughput_kbps(records, sc.sim_time),
            total_energy_j=total, mean_energy_j=mean_e,
            beacons_sent=rec.beacons_sent, rreq_sent=rec.rreq_sent,
            ch_rounds=rec.ch_rounds, samples=list(rec.samples),
            per_node_energy_j=per_node)
        return self.table

    def check_conservation(self) -> bool:
        """Per-node residual + consumed == budget, and fates cover packets."""
        for nid in self.sensor_ids():
            led = self.nodes[nid].ledger
            if energy.remaining(led) + energy.consumed(led) != led.e0:
                return False
        t = self.table
        if t is not None:
            drops = (t.drop_queue + t.drop_csma + t.drop_retry + t.drop_buffer
                     + t.drop_dead)
            if t.delivered + drops != t.generated:
                return False
        return True


def run_network(scenario: Scenario, positions: Optional[dict] = None,
                trace=None) -> Network:
    net = Network(scenario, positions=positions, trace=trace)
    net.run()
    return net
