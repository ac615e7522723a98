"""Line-oriented scenario configuration with deployment defaults.

Format: one ``key = value`` per line, ``#`` starts a comment, unknown keys
are rejected with the offending line number, missing keys take the default
deployment values (50 sensor nodes in a 250 m square, sink at the center,
100 s horizon, 35 m range, 256-byte packets, 100-packet queues, 100 J
initial energy, speeds up to 5 m/s).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .engine import ConfigError

REGION_M = 250.0
SINK_XY = (REGION_M / 2.0, REGION_M / 2.0)

MODE_CHOICES = ("hybrid", "aodv_only", "cluster_only")
BEACONING_CHOICES = ("adaptive", "periodic")


class ScenarioError(ConfigError):
    """Scenario text did not parse or violated a field constraint."""


@dataclass(slots=True)
class Scenario:
    label: str = "default"
    nodes: int = 80
    sim_time: float = 100.0
    seed: int = 1
    replications: int = 5
    mode: str = "hybrid"
    traffic_load_kbps: float = 20.0     # aggregate offered load
    traffic_start_s: float = 5.0
    traffic_stop_s: float = 95.0
    mobility_v_min: float = 0.0
    mobility_v_max: float = 5.0
    mep_threshold_m: float = 5.0
    mep_check_interval_s: float = 1.0
    mep_window: int = 10
    beaconing_mode: str = "adaptive"
    beaconing_period_s: float = 1.0
    radio_pt_mw: float = 31.32
    radio_ht_m: float = 0.5
    radio_hr_m: float = 0.5
    radio_range_m: float = 35.0
    radio_cs_range_m: float = 70.0
    mac_min_be: int = 3
    mac_max_be: int = 5
    mac_max_csma_backoffs: int = 4
    mac_max_retries: int = 3
    mac_queue_len: int = 100
    mac_phy_overhead_bits: int = 0
    energy_e0_j: float = 100.0
    energy_e_txn_mj: float = 0.3
    energy_e_rxn_mj: float = 0.2
    energy_p_idle_mw: float = 1.0
    energy_p_sleep_uw: float = 1.0
    energy_sleep_after_ms: float = 500.0
    cluster_t1_s: float = 20.0
    cluster_t2_s: float = 2.0
    cluster_alpha: float = 0.5
    cluster_r_max_m: float = 35.0
    cluster_vr_lo: float = 0.9
    cluster_vr_hi: float = 1.0
    cluster_pin_vr: float | None = None
    route_neighbor_ttl_s: float = 60.0
    route_rreq_retries: int = 2
    route_rrep_window_ms: float = 50.0
    route_buffer_pkts: int = 64


def _int(text: str) -> int:
    return int(text, 10)


def _float(text: str) -> float:
    return float(text)


def _choice(options):
    def cast(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return cast


def _optional_float(text: str):
    if text.lower() in ("none", ""):
        return None
    return float(text)


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _fraction(v):
    return 0.0 <= v <= 1.0


# key -> (attribute, caster, constraint predicate or None, constraint text)
KEY_REGISTRY = {
    "nodes": ("nodes", _int, lambda v: 1 <= v <= 100, "in [1, 100]"),
    "sim_time": ("sim_time", _float, _positive, "> 0"),
    "seed": ("seed", _int, None, ""),
    "replications": ("replications", _int, _positive, "> 0"),
    "mode": ("mode", _choice(MODE_CHOICES), None, ""),
    "traffic.load_kbps": ("traffic_load_kbps", _float, _non_negative, ">= 0"),
    "traffic.start_s": ("traffic_start_s", _float, _non_negative, ">= 0"),
    "traffic.stop_s": ("traffic_stop_s", _float, _non_negative, ">= 0"),
    "mobility.v_min": ("mobility_v_min", _float, lambda v: 0 <= v <= 5, "in [0, 5]"),
    "mobility.v_max": ("mobility_v_max", _float, lambda v: 0 <= v <= 5, "in [0, 5]"),
    "mep.threshold_m": ("mep_threshold_m", _float, _positive, "> 0"),
    "mep.check_interval_s": ("mep_check_interval_s", _float, _positive, "> 0"),
    "mep.window": ("mep_window", _int, _positive, "> 0"),
    "beaconing.mode": ("beaconing_mode", _choice(BEACONING_CHOICES), None, ""),
    "beaconing.period_s": ("beaconing_period_s", _float, _positive, "> 0"),
    "radio.pt_mw": ("radio_pt_mw", _float, _positive, "> 0"),
    "radio.ht_m": ("radio_ht_m", _float, _positive, "> 0"),
    "radio.hr_m": ("radio_hr_m", _float, _positive, "> 0"),
    "radio.range_m": ("radio_range_m", _float, _positive, "> 0"),
    "radio.cs_range_m": ("radio_cs_range_m", _float, _positive, "> 0"),
    "mac.min_be": ("mac_min_be", _int, _non_negative, ">= 0"),
    "mac.max_be": ("mac_max_be", _int, _non_negative, ">= 0"),
    "mac.max_csma_backoffs": ("mac_max_csma_backoffs", _int, _non_negative, ">= 0"),
    "mac.max_retries": ("mac_max_retries", _int, _non_negative, ">= 0"),
    "mac.queue_len": ("mac_queue_len", _int, _positive, "> 0"),
    "mac.phy_overhead_bits": ("mac_phy_overhead_bits", _int, _non_negative, ">= 0"),
    "energy.e0_j": ("energy_e0_j", _float, _positive, "> 0"),
    "energy.e_txn_mj": ("energy_e_txn_mj", _float, _positive, "> 0"),
    "energy.e_rxn_mj": ("energy_e_rxn_mj", _float, _positive, "> 0"),
    "energy.p_idle_mw": ("energy_p_idle_mw", _float, _non_negative, ">= 0"),
    "energy.p_sleep_uw": ("energy_p_sleep_uw", _float, _non_negative, ">= 0"),
    "energy.sleep_after_ms": ("energy_sleep_after_ms", _float, _non_negative, ">= 0"),
    "cluster.t1_s": ("cluster_t1_s", _float, _positive, "> 0"),
    "cluster.t2_s": ("cluster_t2_s", _float, _positive, "> 0"),
    "cluster.alpha": ("cluster_alpha", _float, _fraction, "in [0, 1]"),
    "cluster.r_max_m": ("cluster_r_max_m", _float, _positive, "> 0"),
    "cluster.vr_lo": ("cluster_vr_lo", _float, _non_negative, ">= 0"),
    "cluster.vr_hi": ("cluster_vr_hi", _float, _non_negative, ">= 0"),
    "cluster.pin_vr": ("cluster_pin_vr", _optional_float, None, ""),
    "route.neighbor_ttl_s": ("route_neighbor_ttl_s", _float, _positive, "> 0"),
    "route.rreq_retries": ("route_rreq_retries", _int, _non_negative, ">= 0"),
    "route.rrep_window_ms": ("route_rrep_window_ms", _float, _positive, "> 0"),
    "route.buffer_pkts": ("route_buffer_pkts", _int, _positive, "> 0"),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _, _, _) in KEY_REGISTRY.items()}


def _cross_validate(sc: Scenario) -> None:
    if sc.mobility_v_min > sc.mobility_v_max:
        raise ScenarioError("mobility.v_min must not exceed mobility.v_max")
    if sc.traffic_stop_s < sc.traffic_start_s:
        raise ScenarioError("traffic.stop_s must not precede traffic.start_s")
    if sc.traffic_stop_s > sc.sim_time:
        raise ScenarioError("traffic.stop_s must not exceed sim_time")
    if sc.mac_min_be > sc.mac_max_be:
        raise ScenarioError("mac.min_be must not exceed mac.max_be")
    if sc.cluster_vr_lo > sc.cluster_vr_hi:
        raise ScenarioError("cluster.vr_lo must not exceed cluster.vr_hi")
    if sc.radio_cs_range_m < sc.radio_range_m:
        raise ScenarioError("radio.cs_range_m must be >= radio.range_m")
    if sc.cluster_t2_s >= sc.cluster_t1_s:
        raise ScenarioError("cluster.t2_s must be below cluster.t1_s")


def parse_scenario(text: str, label: str = "default") -> Scenario:
    """Parse scenario text; raises ScenarioError naming the key and line."""
    sc = Scenario(label=label)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        entry = KEY_REGISTRY.get(key)
        if entry is None:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        attr, cast, check, bound = entry
        try:
            parsed = cast(value)
        except ValueError as exc:
            raise ScenarioError(
                f"line {lineno}: bad value for {key!r}: {exc}") from None
        if check is not None and not check(parsed):
            raise ScenarioError(f"line {lineno}: {key!r} must be {bound}, got {value}")
        setattr(sc, attr, parsed)
    _cross_validate(sc)
    return sc


def default_scenario(**overrides) -> Scenario:
    sc = replace(Scenario(), **overrides)
    _cross_validate(sc)
    return sc


def scenario_text(sc: Scenario) -> str:
    """Render every key = value, suitable for --print-defaults and echoing."""
    lines = []
    for f in fields(Scenario):
        key = _ATTR_TO_KEY.get(f.name)
        if key is None:
            continue
        value = getattr(sc, f.name)
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
