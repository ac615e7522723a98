"""Deterministic discrete-event simulator for mobile wireless sensor networks.

Capabilities: deviation-triggered adaptive beaconing, residual-energy
cluster-head election with grid-based multi-hop relaying, on-demand route
discovery, unslotted CSMA/CA medium access and a two-ray ground radio, with
per-run energy/delay/throughput metrics emitted as CSV.
"""

from .engine import ConfigError, Event, RngStream, SimulationError, Simulator, uniform
from .mobility import (MepHistory, Position, WaypointState, deviation,
                       deviation_literal, mep_mean_x, mep_mean_y, should_beacon,
                       step_waypoint, weighted_mean)
from .radio import (RadioParams, calibrated, can_receive, crossover_distance,
                    received_power, senses_busy)
from .mac import (BROADCAST, Frame, FrameKind, MacParams, TxQueue, airtime,
                  backoff_delay, make_frame)
from .energy import (EnergyLedger, accrue_state, charge_packet, consumed,
                     remaining, remaining_distance_normalized)
from .clustering import (ClusterPlan, ElectionParams, Grid, build_schedule,
                         ch_neighbor_distance, grid_partition, overlying_radius,
                         run_election, select_relay_ch, waiting_time)
from .routing import (NeighborEntry, RouteEntry, RoutingState, RreqCache,
                      select_route)
from .traffic import CbrConfig, PacketRecord, first_emission
from .metrics import (CSV_COLUMNS, MetricsRecorder, MetricsTable, emit_csv,
                      energy_report, mean_delay, rows_to_csv_text,
                      throughput_kbps)
from .scenario import Scenario, ScenarioError, default_scenario, parse_scenario
from .network import Network, run_network

__version__ = "0.1.0"
