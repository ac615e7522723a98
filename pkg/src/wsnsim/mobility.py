"""Node placement, random-waypoint motion and the position-history beacon gate.

A node predicts its own position as a dwell-weighted mean of its recent
position samples; when the straight-line deviation between where it is and
where the prediction says it should be exceeds a distance threshold, it
emits a beacon and restarts the history from the current sample.  Static
nodes therefore beacon exactly once (the deployment announcement).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(slots=True)
class WaypointState:
    """Current leg of a random-waypoint walk."""

    destination: Position
    speed: float = 0.0
    pause_until: float = 0.0


def step_waypoint(pos: Position, wp: WaypointState, dt: float, rng,
                  region: float = 250.0, v_min: float = 0.0,
                  v_max: float = 5.0) -> Position:
    """Advance one mobility step of length dt seconds.

    On arrival a new destination is drawn uniformly in the region and a new
    speed uniformly in [v_min, v_max]; the node then moves on the next step
    (arrival ends this one, so exact-arrival positions are reachable).
    v_max == 0 configures a static node: the position is never touched.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if v_max <= 0:
        return pos
    dist = pos.distance_to(wp.destination)
    if dist <= 1e-12:
        wp.destination = Position(rng.uniform(0.0, region), rng.uniform(0.0, region))
        wp.speed = rng.uniform(v_min, v_max)
        dist = pos.distance_to(wp.destination)
    if wp.speed <= 0 or dist <= 1e-12:
        return pos
    step = wp.speed * dt
    if step >= dist:
        nx, ny = wp.destination.x, wp.destination.y
    else:
        f = step / dist
        nx = pos.x + (wp.destination.x - pos.x) * f
        ny = pos.y + (wp.destination.y - pos.y) * f
    # destinations are drawn inside the region, so this is defensive only
    nx = min(max(nx, 0.0), region)
    ny = min(max(ny, 0.0), region)
    return Position(nx, ny)


def weighted_mean(values, weights) -> float:
    """Sum of value*weight over the sample count (not the weight sum)."""
    values = list(values)
    if not values:
        raise ValueError("empty sample history")
    return sum(v * w for v, w in zip(values, weights)) / len(values)


@dataclass(slots=True)
class MepHistory:
    """Recent (x, y, t) samples feeding the position predictor.

    Sample weights are dwell intervals expressed in units of the nominal
    sampling period, so at the regular check cadence every weight is 1 and
    the predictor reduces to the plain mean of the retained positions.
    """

    window: int = 10
    nominal_dt: float = 1.0
    samples: list = field(default_factory=list)
    last_beacon_pos: Optional[Position] = None

    @property
    def k(self) -> int:
        return len(self.samples)

    def record(self, x: float, y: float, t: float) -> None:
        if self.samples and t <= self.samples[-1][2]:
            raise ValueError("sample timestamps must be strictly increasing")
        self.samples.append((x, y, t))
        if len(self.samples) > self.window:
            del self.samples[0]

    def dwell_weights(self) -> list:
        out = []
        prev_t = None
        for _, _, t in self.samples:
            out.append(1.0 if prev_t is None else (t - prev_t) / self.nominal_dt)
            prev_t = t
        return out

    def reset_keep_last(self) -> None:
        """Restart the history from its newest sample (post-beacon state)."""
        if self.samples:
            self.samples = [self.samples[-1]]


def mep_mean_x(history: MepHistory) -> float:
    return weighted_mean((s[0] for s in history.samples), history.dwell_weights())


def mep_mean_y(history: MepHistory) -> float:
    return weighted_mean((s[1] for s in history.samples), history.dwell_weights())


def deviation(current: Position, predicted: tuple) -> float:
    """Straight-line distance between the actual and predicted position."""
    return math.hypot(current.x - predicted[0], current.y - predicted[1])


def deviation_literal(current: Position, predicted: tuple) -> float:
    """Sum-form variant kept for auditing only; never drives any decision."""
    return math.hypot(current.x + predicted[0], current.y + predicted[1])


def should_beacon(history: MepHistory, current: Position,
                  threshold: float = 5.0) -> bool:
    """True when the deviation strictly exceeds the threshold.

    A trigger restarts the history at the current sample and pins
    last_beacon_pos so the caller can queue the beacon frame.
    """
    if history.k == 0:
        raise ValueError("beacon check requires at least one recorded sample")
    pred = (mep_mean_x(history), mep_mean_y(history))
    if deviation(current, pred) > threshold:
        history.reset_keep_last()
        history.last_beacon_pos = current
        return True
    return False
