"""Run bookkeeping and the fixed-schema CSV emitter.

Every generated data packet is assigned exactly one fate: delivered, or one
of the five drop causes.  Packets still sitting in queues or discovery
buffers when the horizon is reached are folded into the buffer-drop column
so the fate breakdown always sums to the generated count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .traffic import PacketRecord

CSV_COLUMNS = [
    "scenario", "seed", "nodes", "offered_load_bits", "generated",
    "delivered", "drop_queue", "drop_csma", "drop_retry", "drop_buffer",
    "drop_dead", "mean_delay_s", "throughput_kbps", "total_energy_j",
    "mean_energy_j", "beacons_sent", "rreq_sent", "ch_rounds",
]

DELIVERED = "delivered"
DROP_QUEUE = "drop_queue"
DROP_CSMA = "drop_csma"
DROP_RETRY = "drop_retry"
DROP_BUFFER = "drop_buffer"
DROP_DEAD = "drop_dead"

_FATES = (DELIVERED, DROP_QUEUE, DROP_CSMA, DROP_RETRY, DROP_BUFFER, DROP_DEAD)


@dataclass(slots=True)
class MetricsTable:
    """One CSV row plus the periodic throughput samples kept off-schema."""

    scenario: str
    seed: int
    nodes: int
    offered_load_bits: int
    generated: int
    delivered: int
    drop_queue: int
    drop_csma: int
    drop_retry: int
    drop_buffer: int
    drop_dead: int
    mean_delay_s: Optional[float]
    throughput_kbps: float
    total_energy_j: float
    mean_energy_j: float
    beacons_sent: int
    rreq_sent: int
    ch_rounds: int
    samples: list = field(default_factory=list)   # (t, cumulative kbps)
    per_node_energy_j: list = field(default_factory=list)


class MetricsRecorder:
    """Counters and packet records accumulated while a run executes."""

    def __init__(self):
        self.records: dict[int, PacketRecord] = {}
        self.fates: dict[int, str] = {}
        self.delivered_bits = 0
        self.beacons_sent = 0
        self.rreq_sent = 0
        self.ch_rounds = 0
        self.unclustered = 0
        self.queue_high_water = 0
        self.samples: list = []

    def on_generated(self, record: PacketRecord) -> None:
        self.records[record.pkt_id] = record

    def assign_fate(self, pkt_id: int, fate: str) -> bool:
        """First terminal event wins; repeats (e.g. late duplicates) no-op."""
        if fate not in _FATES:
            raise ValueError(f"unknown packet fate {fate!r}")
        if pkt_id in self.fates:
            return False
        self.fates[pkt_id] = fate
        return True

    def on_delivered(self, pkt_id: int, now: float, hops: int) -> bool:
        if not self.assign_fate(pkt_id, DELIVERED):
            return False
        rec = self.records[pkt_id]
        rec.delivered_at = now
        rec.hops = hops
        self.delivered_bits += rec.size * 8
        return True

    def fate_count(self, fate: str) -> int:
        return sum(1 for f in self.fates.values() if f == fate)

    def flush_in_flight(self) -> int:
        """Fold end-of-horizon survivors into the buffer-drop column."""
        n = 0
        for pkt_id in self.records:
            if pkt_id not in self.fates:
                self.fates[pkt_id] = DROP_BUFFER
                n += 1
        return n


def mean_delay(records) -> Optional[float]:
    """Mean end-to-end delay over delivered packets; None when none arrived."""
    delays = [r.delivered_at - r.generated_at for r in records
              if r.delivered_at is not None]
    if not delays:
        return None
    return sum(delays) / len(delays)


def throughput_kbps(records, horizon: float) -> float:
    """Delivered payload bits per second of horizon, in kb/s."""
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    bits = sum(r.size * 8 for r in records if r.delivered_at is not None)
    return bits / horizon / 1000.0


def energy_report(ledgers) -> tuple:
    """(total consumed, mean per node, per-node list) over the given ledgers."""
    from .energy import consumed
    per_node = [consumed(led) for led in ledgers]
    total = sum(per_node)
    mean = total / len(per_node) if per_node else 0.0
    return total, mean, per_node


def fmt(value) -> str:
    """Render one CSV field: 9 significant digits for floats, blank for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def rows_to_csv_text(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(fmt(getattr(row, col)) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def emit_csv(rows, path) -> None:
    """Write header plus one row per run; identical runs give identical bytes."""
    text = rows_to_csv_text(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
