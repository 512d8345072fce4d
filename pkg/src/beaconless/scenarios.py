"""Scenario configuration, presets, the evaluation pipeline, and sweeps."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, replace

from . import hopstats, linkmodel, protocols
from .geometry import (
    SlicingGeometry,
    SlicingStrategy,
    far_field_fraction_threshold,
    slice_subareas,
)
from .linkmodel import (
    MCS_TABLE,
    FadingChannelModel,
    LinkBudget,
    LinkInfeasibleError,
    McsProfile,
    solve_link_budget,
)
from .protocols import EndToEndResult, Protocol, ProtocolLedger

__all__ = [
    "ScenarioConfig",
    "SweepSpec",
    "SweepRow",
    "DerivedHop",
    "PRESET_NAMES",
    "CONTROL_MCS",
    "preset",
    "evaluate_scenario",
    "run_sweep",
    "optimize_subareas",
]

# Control frames always ride the most robust scheme.
CONTROL_MCS = MCS_TABLE["qpsk-1/2"]

_NON_OPT = (Protocol.GERAF_PC, Protocol.GERAF_MRC, Protocol.BOSS)


@dataclass(frozen=True)
class ScenarioConfig:
    """Every physical, protocol, and deployment parameter of one evaluation.

    Durations are seconds, powers watts, the density nodes per square
    meter. payload_bits and control_bits derive from the durations, the
    symbol time, and the modulation so packet length and duration can
    never disagree.
    """

    distance: float = 60.0
    density: float = 1.0
    duty_cycle: float = 0.1
    subarea_count: int = 4
    slot_granularity: int = 4
    data_duration: float = 4.0e-3
    control_duration: float = 2.56e-4
    max_power: float = 1.0e-3
    noise_power: float = 1.0e-13
    rx_power: float = 5.0e-4
    busy_tone_power: float = 5.0e-4
    wavelength: float = 0.125
    pathloss_exponent: float = 3.0
    energy_weight: float = 0.5
    per_target: float = 0.1
    mcs: McsProfile = CONTROL_MCS
    channel: FadingChannelModel = FadingChannelModel()
    slicing: SlicingStrategy = SlicingStrategy.EQUAL_PROGRESS
    boss_npa_rounds: float = 1.0
    boss_listen_window_factor: int = 2
    boss_collision_window_factor: int = 1
    pmf_averaged_listeners: bool = False
    collision_slots_override: float | None = None

    def __post_init__(self):
        positive = {
            "distance": self.distance,
            "density": self.density,
            "data_duration": self.data_duration,
            "control_duration": self.control_duration,
            "max_power": self.max_power,
            "noise_power": self.noise_power,
            "wavelength": self.wavelength,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rx_power < 0 or self.busy_tone_power < 0:
            raise ValueError("receive and busy-tone powers cannot be negative")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError("duty cycle must lie in (0, 1]")
        if self.subarea_count < 1:
            raise ValueError("need at least one forwarding subarea")
        if self.slot_granularity < 2:
            raise ValueError("slot granularity must be at least 2")
        if self.control_duration > self.data_duration:
            raise ValueError("control packets cannot outlast the data packet")
        if self.pathloss_exponent < 2:
            raise ValueError("path loss exponent below free space")
        if not 0.0 <= self.energy_weight <= 1.0:
            raise ValueError("energy weight must lie in [0, 1]")
        if not 0.0 < self.per_target < 1.0:
            raise ValueError("PER target must lie strictly between 0 and 1")
        if self.boss_npa_rounds < 0:
            raise ValueError("NPA round count cannot be negative")

    @property
    def symbol_rate(self) -> float:
        return 1.0 / self.channel.symbol_duration

    @property
    def payload_bits(self) -> int:
        return max(
            1, round(self.data_duration * self.symbol_rate * self.mcs.bits_per_symbol)
        )

    @property
    def control_bits(self) -> int:
        return max(
            1,
            round(
                self.control_duration * self.symbol_rate * CONTROL_MCS.bits_per_symbol
            ),
        )


# Channels: a vehicular frequency-selective profile, a pedestrian one, and
# a quasi-static profile for stationary deployments.
_VEHICULAR_CHANNEL = FadingChannelModel(
    multipath_taps=3, tap_gains=(0.6, 0.3, 0.1), coherence_time=1.0e-3
)
_PEDESTRIAN_CHANNEL = FadingChannelModel(coherence_time=3.5e-2)
_STATIC_CHANNEL = FadingChannelModel(coherence_time=5.0e-2)

_PRESETS = {
    # Dense mobile network, plentiful energy: no sleeping, delay-weighted.
    "vanet": dict(
        distance=150.0,
        density=0.1,
        duty_cycle=1.0,
        energy_weight=0.2,
        max_power=10.0 ** (22.0 / 10.0) * 1e-3,  # 22 dBm
        channel=_VEHICULAR_CHANNEL,
        subarea_count=4,
        slot_granularity=4,
    ),
    # Voice/video between team members: short packets, higher rates.
    "rescue": dict(
        distance=40.0,
        density=0.3,
        duty_cycle=1.0,
        energy_weight=0.6,
        data_duration=1.0e-2,
        channel=_PEDESTRIAN_CHANNEL,
    ),
    # Meter readings: heavy sleeping, energy dominates.
    "sun": dict(
        distance=50.0,
        density=2.0,
        duty_cycle=0.05,
        energy_weight=0.9,
        channel=_STATIC_CHANNEL,
    ),
    # Level-crossing alarms: energy and delay weighted equally.
    "environmental": dict(
        distance=50.0,
        density=1.0,
        duty_cycle=0.1,
        energy_weight=0.5,
        data_duration=1.2e-2,
        channel=_STATIC_CHANNEL,
    ),
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(name: str) -> ScenarioConfig:
    """Named application scenario with its documented defaults."""
    try:
        fields = _PRESETS[name.strip().lower()]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; choose from {', '.join(PRESET_NAMES)}"
        ) from None
    return ScenarioConfig(**fields)


@dataclass(frozen=True)
class DerivedHop:
    """Everything the ledger of one protocol consumed, for inspection."""

    protocol: Protocol
    link: LinkBudget
    effective_range: float
    geometry: SlicingGeometry
    stats: hopstats.HopStatistics
    ledger: ProtocolLedger
    result: EndToEndResult


def _geometry_for(cfg: ScenarioConfig, range_r: float) -> SlicingGeometry:
    d = cfg.distance
    if d > far_field_fraction_threshold * range_r:
        d = math.inf
    elif d <= range_r:
        # terminal hop: destination in range; keep the far-field slicing
        # shape for listener counts, contention statistics are zeroed.
        d = math.inf
    return slice_subareas(range_r, d, cfg.subarea_count, cfg.slicing)


def _terminal_stats() -> hopstats.HopStatistics:
    return hopstats.HopStatistics(
        mean_empty_cycles=0.0,
        mean_empty_slots=0.0,
        mean_collision_slots=0.0,
        npa_probability=0.0,
        ppa_probability=1.0,
        collision_probability=0.0,
        mean_collision_cycles=0.0,
        expected_hops=1.0,
    )


def solve_config_link(cfg: ScenarioConfig) -> LinkBudget:
    return solve_link_budget(
        control_bits=cfg.control_bits,
        data_bits=cfg.payload_bits,
        per_target=cfg.per_target,
        channel=cfg.channel,
        data_mcs=cfg.mcs,
        control_mcs=CONTROL_MCS,
        max_power=cfg.max_power,
        noise_power=cfg.noise_power,
        wavelength=cfg.wavelength,
        pathloss_alpha=cfg.pathloss_exponent,
        control_duration=cfg.control_duration,
        data_duration=cfg.data_duration,
    )


def evaluate_scenario(
    cfg: ScenarioConfig,
    requested: tuple = _NON_OPT,
    seed: int = 0,
    hop_routes: int = 8192,
) -> dict:
    """Full pipeline for one configuration.

    Returns a mapping protocol -> DerivedHop covering the requested
    protocols plus the optimal baseline. Raises LinkInfeasibleError when
    the PER target cannot be met.
    """
    link = solve_config_link(cfg)
    wanted = list(dict.fromkeys(tuple(requested) + (Protocol.OPT,)))
    hop_cache: dict = {}
    geo_cache: dict = {}

    def hops_for(range_r: float):
        if range_r not in hop_cache:
            if cfg.distance <= range_r:
                hop_cache[range_r] = (1.0, 0.0)
            else:
                hop_cache[range_r] = hopstats.expected_hop_count(
                    cfg.distance,
                    range_r,
                    cfg.density,
                    cfg.duty_cycle,
                    routes=hop_routes,
                    seed=seed,
                )
        return hop_cache[range_r]

    def geometry_for(range_r: float):
        if range_r not in geo_cache:
            geo_cache[range_r] = _geometry_for(cfg, range_r)
        return geo_cache[range_r]

    def derive(proto: Protocol, baseline: EndToEndResult | None) -> DerivedHop:
        range_r = protocols.effective_range(proto, link)
        geometry = geometry_for(range_r)
        q, q_se = hops_for(range_r)
        if cfg.distance <= range_r:
            stats = _terminal_stats()
        else:
            stats = protocols.protocol_hop_statistics(
                proto,
                cfg.density,
                cfg.duty_cycle,
                geometry,
                cfg.slot_granularity,
                expected_hops=q,
                expected_hops_se=q_se,
            )
            if cfg.collision_slots_override is not None and proto in (
                Protocol.GERAF_PC,
                Protocol.GERAF_MRC,
            ):
                stats = dataclasses.replace(
                    stats, mean_collision_slots=cfg.collision_slots_override
                )
        ledger = protocols.build_ledger(proto, stats, link, geometry, cfg)
        result = protocols.end_to_end(
            ledger, q, baseline, cfg.energy_weight, cfg.payload_bits
        )
        return DerivedHop(
            protocol=proto,
            link=link,
            effective_range=range_r,
            geometry=geometry,
            stats=stats,
            ledger=ledger,
            result=result,
        )

    out: dict = {Protocol.OPT: derive(Protocol.OPT, None)}
    baseline = out[Protocol.OPT].result
    for proto in wanted:
        if proto is Protocol.OPT:
            continue
        out[proto] = derive(proto, baseline)
    return out


@dataclass(frozen=True)
class SweepSpec:
    """One swept ScenarioConfig parameter and the protocols to evaluate."""

    parameter: str
    values: tuple
    protocols: tuple = _NON_OPT

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.parameter != "mcs" and self.parameter not in {
            f.name for f in dataclasses.fields(ScenarioConfig)
        }:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")


@dataclass(frozen=True)
class SweepRow:
    param_value: object
    protocol: Protocol
    hop_energy: float
    hop_delay: float
    expected_hops: float
    total_energy: float
    total_delay: float
    energy_per_bit: float
    delay_per_bit: float
    composite_cost: float
    infeasible: bool = False


def apply_sweep_value(cfg: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    if parameter == "mcs":
        profile = MCS_TABLE[value] if isinstance(value, str) else value
        return replace(cfg, mcs=profile)
    return replace(cfg, **{parameter: value})


def run_sweep(
    spec: SweepSpec, base: ScenarioConfig, seed: int = 0, hop_routes: int = 8192
) -> list:
    """Evaluate every (value, protocol) cell in deterministic order.

    Infeasible link budgets mark the whole value's rows instead of
    aborting the sweep.
    """
    rows: list = []
    order = list(dict.fromkeys(tuple(spec.protocols) + (Protocol.OPT,)))
    for index, value in enumerate(spec.values):
        cfg = apply_sweep_value(base, spec.parameter, value)
        point_seed = (seed * 1000003 + index) & 0xFFFFFFFFFFFFFFFF
        try:
            derived = evaluate_scenario(
                cfg, tuple(spec.protocols), seed=point_seed, hop_routes=hop_routes
            )
        except LinkInfeasibleError:
            for proto in order:
                rows.append(
                    SweepRow(
                        param_value=value,
                        protocol=proto,
                        hop_energy=math.nan,
                        hop_delay=math.nan,
                        expected_hops=math.nan,
                        total_energy=math.nan,
                        total_delay=math.nan,
                        energy_per_bit=math.nan,
                        delay_per_bit=math.nan,
                        composite_cost=math.nan,
                        infeasible=True,
                    )
                )
            continue
        for proto in order:
            res = derived[proto].result
            rows.append(
                SweepRow(
                    param_value=value,
                    protocol=proto,
                    hop_energy=res.hop_energy,
                    hop_delay=res.hop_delay,
                    expected_hops=res.expected_hops,
                    total_energy=res.total_energy,
                    total_delay=res.total_delay,
                    energy_per_bit=res.energy_per_bit,
                    delay_per_bit=res.delay_per_bit,
                    composite_cost=res.composite_cost,
                )
            )
    return rows


_OPT_METRICS = {
    "delay": "total_delay",
    "energy": "total_energy",
    "composite": "composite_cost",
}


def optimize_subareas(
    base: ScenarioConfig,
    protocol: Protocol,
    n_values,
    metric: str = "composite",
    seed: int = 0,
    hop_routes: int = 8192,
) -> tuple:
    """Scan the forwarding-subarea count and return (best_n, value, curve).

    Exhaustive scan; ties break toward the smaller count. The curve is a
    list of (n, value) pairs for convexity inspection.
    """
    if metric not in _OPT_METRICS:
        raise ValueError(f"metric must be one of {sorted(_OPT_METRICS)}")
    values = sorted(set(int(v) for v in n_values))
    if not values:
        raise ValueError("empty subarea-count range")
    attr = _OPT_METRICS[metric]
    curve = []
    for n in values:
        cfg = replace(base, subarea_count=n)
        derived = evaluate_scenario(cfg, (protocol,), seed=seed, hop_routes=hop_routes)
        curve.append((n, getattr(derived[protocol].result, attr)))
    best_n, best_value = min(curve, key=lambda pair: (pair[1], pair[0]))
    return best_n, best_value, curve
