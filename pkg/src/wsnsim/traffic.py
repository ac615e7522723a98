"""Constant-bit-rate sources and per-packet delivery records."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True, slots=True)
class CbrConfig:
    offered_load_bps: float        # per source
    sources: tuple
    start_t: float
    stop_t: float
    packet_bytes: int = 256

    def interval(self) -> float:
        """Seconds between packets of one source."""
        if self.offered_load_bps <= 0:
            raise ValueError("offered load must be positive")
        return self.packet_bytes * 8 / self.offered_load_bps


def first_emission(cfg: CbrConfig, rng) -> float:
    """Start time of a source's stream: jittered within one interval."""
    return cfg.start_t + rng.uniform(0.0, cfg.interval())


@dataclass(slots=True)
class PacketRecord:
    pkt_id: int
    src: int
    generated_at: float
    delivered_at: Optional[float] = None
    hops: int = 0
    size: int = 256
