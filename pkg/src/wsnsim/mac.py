"""Frame model and unslotted CSMA/CA parameters, backoff and airtime arithmetic.

The contention loop itself runs inside the network event handlers; this
module holds the data carried over the air, the standard's timing constants
at 250 kb/s and the bounded transmit queue.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class FrameKind(Enum):
    DATA = "DATA"
    ACK = "ACK"
    BEACON = "BEACON"
    RREQ = "RREQ"
    RREP = "RREP"
    ADV_CH = "ADV_CH"
    JOIN = "JOIN"
    SCHEDULE = "SCHEDULE"


BROADCAST = -1

DATA_BYTES = 256
CONTROL_BYTES = {
    FrameKind.ACK: 16,
    FrameKind.BEACON: 32,
    FrameKind.RREQ: 24,
    FrameKind.RREP: 24,
    FrameKind.ADV_CH: 32,
    FrameKind.JOIN: 16,
    FrameKind.SCHEDULE: 32,
}


@dataclass(slots=True)
class Frame:
    kind: FrameKind
    src: int
    dst: int                      # node id or BROADCAST
    size: int                     # bytes
    payload: dict = field(default_factory=dict)
    created_at: float = 0.0
    mac_seq: int = -1

    def is_broadcast(self) -> bool:
        return self.dst == BROADCAST

    def wants_ack(self) -> bool:
        return not self.is_broadcast() and self.kind is not FrameKind.ACK


def make_frame(kind: FrameKind, src: int, dst: int, created_at: float,
               payload: Optional[dict] = None) -> Frame:
    size = DATA_BYTES if kind is FrameKind.DATA else CONTROL_BYTES[kind]
    return Frame(kind, src, dst, size, payload or {}, created_at)


@dataclass(frozen=True, slots=True)
class MacParams:
    """Unslotted contention constants; defaults are the standard's at 250 kb/s."""

    min_be: int = 3
    max_be: int = 5
    max_csma_backoffs: int = 4
    max_retries: int = 3
    queue_len: int = 100
    unit_backoff_s: float = 320e-6
    ack_timeout_s: float = 864e-6   # after the airing ends
    turnaround_s: float = 192e-6    # rx-to-tx gap before an ACK airs
    bitrate_bps: float = 250_000.0
    phy_overhead_bits: int = 0


def airtime(size_bytes: int, params: MacParams) -> float:
    """Seconds a frame of the given payload size occupies the channel."""
    if size_bytes <= 0:
        raise ValueError(f"frame size must be positive, got {size_bytes}")
    return (size_bytes * 8 + params.phy_overhead_bits) / params.bitrate_bps


def backoff_delay(be: int, rng, unit_backoff_s: float = 320e-6) -> float:
    """Random backoff: an integer in [0, 2^be - 1] unit periods."""
    if be < 0:
        raise ValueError(f"backoff exponent must be >= 0, got {be}")
    return rng.randint(0, (1 << be) - 1) * unit_backoff_s


class TxQueue:
    """Bounded transmit queue; control frames serve ahead of data frames.

    The head being transmitted is popped out of the queue, so the capacity
    bounds frames waiting for the channel.
    """

    def __init__(self, capacity: int = 100):
        self.capacity = capacity
        self.drops = 0
        self.high_water = 0
        self._ctrl: deque = deque()
        self._data: deque = deque()

    def __len__(self) -> int:
        return len(self._ctrl) + len(self._data)

    def offer(self, frame: Frame) -> bool:
        if len(self) >= self.capacity:
            self.drops += 1
            return False
        if frame.kind is FrameKind.DATA:
            self._data.append(frame)
        else:
            self._ctrl.append(frame)
        self.high_water = max(self.high_water, len(self))
        return True

    def pop_ready(self, data_ok: bool = True) -> Optional[Frame]:
        if self._ctrl:
            return self._ctrl.popleft()
        if data_ok and self._data:
            return self._data.popleft()
        return None

    def has_data(self) -> bool:
        return bool(self._data)

    def data_frames(self) -> list:
        return list(self._data)

    def drain(self) -> list:
        out = list(self._ctrl) + list(self._data)
        self._ctrl.clear()
        self._data.clear()
        return out

    def remove_data_to(self, dst: int) -> list:
        """Pull all queued data frames addressed to dst (for rerouting)."""
        keep, pulled = deque(), []
        for f in self._data:
            if f.dst == dst:
                pulled.append(f)
            else:
                keep.append(f)
        self._data = keep
        return pulled

    def retarget_data(self, new_dst: int) -> None:
        for f in self._data:
            f.dst = new_dst
