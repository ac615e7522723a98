"""Per-node energy ledger: packet charges, idle/sleep accrual, residual accounting.

Consumption is the exact sum of four terms: per-packet reception and
transmission charges plus idle and sleep power integrated over time.
Control frames charge proportionally to their size by incrementing the
packet counters with fractional weights, which keeps the four-term sum
exact.  A distance-normalized transmit accumulator is kept alongside as a
diagnostic; it never drives any decision.
"""

from __future__ import annotations

from dataclasses import dataclass

TX = "tx"
RX = "rx"
IDLE = "idle"
SLEEP = "sleep"


@dataclass(slots=True)
class EnergyLedger:
    e0: float = 100.0          # initial energy, J
    e_txn: float = 0.3e-3      # J per full-size data packet transmitted
    e_rxn: float = 0.2e-3      # J per full-size data packet received
    p_idle: float = 1.0e-3     # W
    p_sleep: float = 1.0e-6    # W
    n_tx: float = 0.0          # packet equivalents (control frames weigh size/256)
    n_rx: float = 0.0
    t_idle: float = 0.0        # s
    t_sleep: float = 0.0
    tx_dist_sum: float = 0.0   # sum of per-packet tx energy / tx distance
    state: str = IDLE
    dead: bool = False
    dead_activity: int = 0


def charge_packet(ledger: EnergyLedger, direction: str,
                  distance: float | None = None, weight: float = 1.0) -> None:
    """Charge one packet (or a size-weighted fraction of one) to the ledger."""
    if ledger.dead:
        ledger.dead_activity += 1
        return
    if direction == TX:
        if distance is None or distance <= 0:
            raise ValueError("transmit charge requires a positive distance")
        ledger.n_tx += weight
        ledger.tx_dist_sum += ledger.e_txn * weight / distance
    elif direction == RX:
        ledger.n_rx += weight
    else:
        raise ValueError(f"unknown charge direction {direction!r}")


def accrue_state(ledger: EnergyLedger, state: str, dt: float) -> None:
    if dt < 0:
        raise ValueError(f"negative accrual interval {dt}")
    if state == IDLE:
        ledger.t_idle += dt
    elif state == SLEEP:
        ledger.t_sleep += dt
    else:
        raise ValueError(f"unknown accrual state {state!r}")


def consumed(ledger: EnergyLedger) -> float:
    return (ledger.e_rxn * ledger.n_rx + ledger.e_txn * ledger.n_tx
            + ledger.p_idle * ledger.t_idle + ledger.p_sleep * ledger.t_sleep)


def remaining(ledger: EnergyLedger) -> float:
    return ledger.e0 - consumed(ledger)


def check_death(ledger: EnergyLedger) -> bool:
    """Mark the node dead once its budget is exhausted; True on transition."""
    if not ledger.dead and remaining(ledger) <= 0.0:
        ledger.dead = True
        return True
    return False


def remaining_distance_normalized(ledger: EnergyLedger) -> float:
    """Diagnostic variant with the transmit term divided by tx distance."""
    return (ledger.tx_dist_sum + ledger.e_rxn * ledger.n_rx
            + ledger.p_idle * ledger.t_idle + ledger.p_sleep * ledger.t_sleep)
