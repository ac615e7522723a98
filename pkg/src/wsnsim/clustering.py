"""Cluster-head election, grid partitioning, slot schedules and relay selection.

Election: every node backs off for a waiting time that shrinks with its
residual energy, scaled by a random factor in [vr_lo, vr_hi]; the first
timer to expire announces itself cluster head and suppresses every node
that hears the announcement within the announcer's competition radius.

Grid: the region is cut into square cells of side r_tx/sqrt(2) so any two
nodes sharing a cell are mutually in range; relays between heads are chosen
by the minimum summed distance to their neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .mobility import Position


@dataclass(slots=True)
class ElectionParams:
    t1: float = 20.0          # election round period, s
    t2: float = 2.0           # maximum waiting window, s
    vr_lo: float = 0.9
    vr_hi: float = 1.0
    alpha: float = 0.5        # competition-radius shrink factor in [0, 1]
    r_max: float = 35.0       # maximum competition radius, m
    pin_vr: Optional[float] = None  # test hook fixing the random factor


def waiting_time(e_i: float, e_max: float, t2: float, v_r: float) -> float:
    """Election backoff: high-energy nodes wait least."""
    if e_max <= 0:
        raise ValueError(f"e_max must be positive, got {e_max}")
    if not 0 <= e_i <= e_max:
        raise ValueError(f"residual energy {e_i} outside [0, {e_max}]")
    return (1.0 - e_i / e_max) * t2 * v_r


def overlying_radius(d_i: float, d_max: float, d_min: float,
                     alpha: float, r_max: float) -> float:
    """Competition radius; shrinks for nodes near the minimum sink distance.

    The degenerate single-distance network (d_max == d_min) returns r_max.
    """
    if r_max <= 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    if d_max == d_min:
        return r_max
    if not d_min <= d_i <= d_max:
        raise ValueError(f"distance {d_i} outside [{d_min}, {d_max}]")
    return (1.0 - alpha * (d_max - d_i) / (d_max - d_min)) * r_max


@dataclass(slots=True)
class ElectionOutcome:
    chs: list                      # elected head ids, announcement order
    suppressed_by: dict            # member id -> head id that silenced it
    waits: dict                    # node id -> waiting time
    v_r: dict                      # node id -> drawn random factor
    radii: dict                    # node id -> competition radius


def run_election(nodes, sink: Position, params: ElectionParams,
                 rng=None, e_max: Optional[float] = None,
                 rx_range: Optional[float] = None) -> ElectionOutcome:
    """Replay one election round over an ideal loss-free channel.

    `nodes` is a sequence of (id, Position, residual_energy).  Timers fire
    in (waiting_time, id) order and announcements are heard instantly by
    every node within both radio range and the announcer's competition
    radius.  The in-network election runs the same rules over real frames.
    """
    nodes = list(nodes)
    if not nodes:
        return ElectionOutcome([], {}, {}, {}, {})
    if e_max is None:
        e_max = max(e for _, _, e in nodes)
    if rx_range is None:
        rx_range = params.r_max
    d = {nid: pos.distance_to(sink) for nid, pos, _ in nodes}
    d_max, d_min = max(d.values()), min(d.values())
    waits, v_rs, radii = {}, {}, {}
    for nid, pos, e in sorted(nodes, key=lambda n: n[0]):
        v = params.pin_vr if params.pin_vr is not None else rng.uniform(params.vr_lo, params.vr_hi)
        v_rs[nid] = v
        waits[nid] = waiting_time(e, e_max, params.t2, v)
        radii[nid] = overlying_radius(d[nid], d_max, d_min, params.alpha, params.r_max)
    pos_of = {nid: pos for nid, pos, _ in nodes}
    chs: list = []
    suppressed: dict = {}
    for nid in sorted(waits, key=lambda n: (waits[n], n)):
        if nid in suppressed:
            continue
        chs.append(nid)
        for other in pos_of:
            if other == nid or other in suppressed or other in chs:
                continue
            dist = pos_of[other].distance_to(pos_of[nid])
            if dist <= radii[nid] and dist <= rx_range:
                suppressed[other] = nid
    return ElectionOutcome(chs, suppressed, waits, v_rs, radii)


@dataclass(frozen=True, slots=True)
class GridCell:
    ix: int
    iy: int
    min_x: float
    max_x: float
    min_y: float
    max_y: float
    midpoint: Position


class Grid:
    """Square cells of side r_tx/sqrt(2) covering the deployment region.

    Cells are half-open on their upper edges except that the last row and
    column also take the region boundary, so every in-region point maps to
    exactly one cell.
    """

    def __init__(self, region: float, r_tx: float):
        if r_tx <= 0:
            raise ValueError(f"transmit range must be positive, got {r_tx}")
        self.region = region
        self.side = r_tx / math.sqrt(2.0)
        self.n = math.ceil(region / self.side)
        self.cells = [
            GridCell(ix, iy, ix * self.side, (ix + 1) * self.side,
                     iy * self.side, (iy + 1) * self.side,
                     Position((ix + 0.5) * self.side, (iy + 0.5) * self.side))
            for iy in range(self.n) for ix in range(self.n)
        ]

    def cell_index(self, pos: Position) -> tuple:
        ix = min(int(pos.x // self.side), self.n - 1)
        iy = min(int(pos.y // self.side), self.n - 1)
        return ix, iy

    def cell_of(self, pos: Position) -> GridCell:
        ix, iy = self.cell_index(pos)
        return self.cells[iy * self.n + ix]

    def midpoint_distance(self, pos: Position) -> float:
        return pos.distance_to(self.cell_of(pos).midpoint)


def grid_partition(region: float, r_tx: float) -> Grid:
    return Grid(region, r_tx)


def ch_neighbor_distance(ch: Position, neighbors) -> float:
    """Summed straight-line distance from a head to each of its neighbors."""
    neighbors = list(neighbors)
    if not neighbors:
        raise ValueError("neighbor set must be non-empty")
    return sum(ch.distance_to(p) for p in neighbors)


def select_relay_ch(candidates, neighbors_of) -> int:
    """Head with the minimum summed neighbor distance; ties go to lowest id.

    `candidates` is an iterable of (id, Position); `neighbors_of` maps each
    candidate id to its neighbor positions.
    """
    best = None
    for nid, pos in sorted(candidates, key=lambda c: c[0]):
        total = ch_neighbor_distance(pos, neighbors_of[nid])
        if best is None or total < best[0]:
            best = (total, nid)
    if best is None:
        raise ValueError("candidate set must be non-empty")
    return best[1]


def build_schedule(members, start: float, slot_len: float) -> list:
    """Slot list (node id, slot offset, slot length) in join order."""
    return [(nid, start + i * slot_len, slot_len) for i, nid in enumerate(members)]


@dataclass(slots=True)
class ClusterPlan:
    """One round's cluster structure as applied to the data plane."""

    grid: Grid
    ch_of_cell: dict = field(default_factory=dict)   # (ix, iy) -> head id
    members: dict = field(default_factory=dict)      # node id -> head id
    schedule: dict = field(default_factory=dict)     # head id -> slot list
    relay_next: dict = field(default_factory=dict)   # head id -> next hop id
