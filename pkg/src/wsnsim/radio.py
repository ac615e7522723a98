"""Two-ray ground / free-space received power, range calibration, carrier sense.

Below the crossover distance the free-space (inverse-square) law applies,
beyond it the ground-reflection inverse-fourth law.  Reception and carrier
sense thresholds are not set by hand: they are calibrated from the wanted
reception range (default 35 m) and carrier-sense range (default 70 m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .engine import ConfigError


@dataclass(frozen=True, slots=True)
class RadioParams:
    pt: float                 # transmit power, W
    gt: float = 1.0           # antenna gains
    gr: float = 1.0
    ht: float = 0.5           # antenna heights, m
    hr: float = 0.5
    sys_loss: float = 1.0     # system loss L >= 1
    wavelength: float = 0.125  # m (2.4 GHz band)
    rx_thresh: float = 0.0    # W, receive decision threshold
    cs_thresh: float = 0.0    # W, carrier-sense threshold


def crossover_distance(p: RadioParams) -> float:
    """Distance where the free-space and ground-reflection laws meet."""
    return 4.0 * math.pi * p.ht * p.hr / p.wavelength


def received_power(p: RadioParams, d: float) -> float:
    """Received power in watts at distance d (meters)."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    if d < crossover_distance(p):
        return p.pt * p.gt * p.gr * p.wavelength ** 2 / ((4.0 * math.pi * d) ** 2 * p.sys_loss)
    return p.pt * p.gt * p.gr * p.ht ** 2 * p.hr ** 2 / (d ** 4 * p.sys_loss)


def calibrated(pt_mw: float = 31.32, ht: float = 0.5, hr: float = 0.5,
               wavelength: float = 0.125, range_m: float = 35.0,
               cs_range_m: float = 70.0, gt: float = 1.0, gr: float = 1.0,
               sys_loss: float = 1.0) -> RadioParams:
    """Build params with thresholds derived from the wanted ranges."""
    if range_m <= 0 or cs_range_m < range_m:
        raise ConfigError(
            f"need 0 < range ({range_m}) <= carrier-sense range ({cs_range_m})")
    base = RadioParams(pt=pt_mw * 1e-3, gt=gt, gr=gr, ht=ht, hr=hr,
                       sys_loss=sys_loss, wavelength=wavelength)
    return replace(base,
                   rx_thresh=received_power(base, range_m),
                   cs_thresh=received_power(base, cs_range_m))


def can_receive(p: RadioParams, d: float) -> bool:
    return received_power(p, d) >= p.rx_thresh


def senses_busy(p: RadioParams, concurrent_transmitters, at) -> bool:
    """True when any concurrent transmitter is heard above cs_thresh at `at`.

    `concurrent_transmitters` is an iterable of (Position, RadioParams).
    """
    for pos, tx_params in concurrent_transmitters:
        d = at.distance_to(pos)
        if d <= 0 or received_power(tx_params, d) >= p.cs_thresh:
            return True
    return False
